//! Primitive positive formulas: syntax, text form and evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structures::{Elem, RelStructure, Relation, Signature};

/// An atom over variable indices; free variables come first, then the
/// existentially quantified ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    Rel { name: String, args: Vec<usize> },
    Eq(usize, usize),
}

impl Atom {
    fn vars(&self) -> Vec<usize> {
        match self {
            Atom::Rel { args, .. } => args.clone(),
            Atom::Eq(a, b) => vec![*a, *b],
        }
    }
}

/// `∃ y_1 … y_m. atom_1 ∧ … ∧ atom_r` with free variables `x_1 … x_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PPFormula {
    pub free_vars: usize,
    pub exist_vars: usize,
    pub atoms: Vec<Atom>,
}

impl PPFormula {
    pub fn new(free_vars: usize, exist_vars: usize, atoms: Vec<Atom>) -> Result<Self> {
        let total = free_vars + exist_vars;
        for atom in &atoms {
            if atom.vars().iter().any(|&v| v >= total) {
                return Err(Error::invalid("pp-formula atom uses an undeclared variable"));
            }
            if let Atom::Rel { args, name } = atom {
                if args.is_empty() {
                    return Err(Error::invalid(format!("atom `{name}` has no arguments")));
                }
            }
        }
        Ok(PPFormula {
            free_vars,
            exist_vars,
            atoms,
        })
    }

    /// The formula `R(x_1, …, x_k)`.
    pub fn atom(name: &str, arity: usize) -> Self {
        PPFormula {
            free_vars: arity,
            exist_vars: 0,
            atoms: vec![Atom::Rel {
                name: name.to_string(),
                args: (0..arity).collect(),
            }],
        }
    }

    /// Checks relation names and arities against `sig`.
    pub fn check(&self, sig: &Signature) -> Result<()> {
        for atom in &self.atoms {
            if let Atom::Rel { name, args } = atom {
                let arity = sig
                    .arity(name)
                    .ok_or_else(|| Error::SignatureMismatch(format!("unknown relation `{name}`")))?;
                if arity != args.len() {
                    return Err(Error::ArityMismatch {
                        name: name.clone(),
                        expected: arity,
                        found: args.len(),
                    });
                }
            }
        }
        Ok(())
    }

    fn var_name(&self, v: usize) -> String {
        if v < self.free_vars {
            format!("x{}", v + 1)
        } else {
            format!("y{}", v - self.free_vars + 1)
        }
    }

    /// Text form with head `name`, e.g. `pp(x1,x2) := exists y1. R(x1,y1) & y1 = x2;`.
    pub fn to_text(&self, name: &str) -> String {
        let head: Vec<String> = (0..self.free_vars).map(|v| self.var_name(v)).collect();
        let mut out = format!("{name}({}) := ", head.join(","));
        if self.exist_vars > 0 {
            let ys: Vec<String> = (self.free_vars..self.free_vars + self.exist_vars)
                .map(|v| self.var_name(v))
                .collect();
            out.push_str(&format!("exists {}. ", ys.join(",")));
        }
        if self.atoms.is_empty() {
            out.push_str("true");
        }
        let body: Vec<String> = self
            .atoms
            .iter()
            .map(|a| match a {
                Atom::Rel { name, args } => {
                    let args: Vec<String> = args.iter().map(|&v| self.var_name(v)).collect();
                    format!("{name}({})", args.join(","))
                }
                Atom::Eq(a, b) => format!("{} = {}", self.var_name(*a), self.var_name(*b)),
            })
            .collect();
        out.push_str(&body.join(" & "));
        out.push(';');
        out
    }
}

impl fmt::Display for PPFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text("pp"))
    }
}

/// Parses a sequence of `head(vars) := [exists vars.] body;` definitions.
pub fn parse_pp_definitions(text: &str) -> Result<Vec<(String, PPFormula)>> {
    let mut p = Lexer::new(text)?;
    let mut out = Vec::new();
    while p.peek().is_some() {
        out.push(p.definition()?);
    }
    Ok(out)
}

/// Parses exactly one definition.
pub fn parse_pp_formula(text: &str) -> Result<(String, PPFormula)> {
    let mut defs = parse_pp_definitions(text)?;
    match defs.len() {
        1 => Ok(defs.pop().unwrap()),
        n => Err(Error::syntax_at(text, 0, format!("expected one definition, found {n}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Num(u64),
    P(&'static str),
}

pub(crate) struct Lexer<'a> {
    text: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(text: &'a str) -> Result<Self> {
        let mut toks = Vec::new();
        let b = text.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let c = b[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c == '#' {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            } else if text[i..].starts_with(":=") {
                toks.push((i, Tok::P(":=")));
                i += 2;
            } else if c.is_ascii_digit() {
                let s = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let n = text[s..i]
                    .parse()
                    .map_err(|_| Error::syntax_at(text, s, "number too large"))?;
                toks.push((s, Tok::Num(n)));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let s = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'\'') {
                    i += 1;
                }
                toks.push((s, Tok::Ident(text[s..i].to_string())));
            } else {
                let p = match c {
                    '(' => "(",
                    ')' => ")",
                    ',' => ",",
                    '.' => ".",
                    ';' => ";",
                    '&' => "&",
                    '=' => "=",
                    _ => return Err(Error::syntax_at(text, i, format!("unexpected `{c}`"))),
                };
                toks.push((i, Tok::P(p)));
                i += 1;
            }
        }
        Ok(Lexer { text, toks, pos: 0 })
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |t| t.0)
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> Error {
        Error::syntax_at(self.text, self.offset(), msg)
    }

    pub(crate) fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::P(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, p: &str) -> Result<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{p}`")))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<String> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected a name")),
        }
    }

    pub(crate) fn number(&mut self) -> Result<u64> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err("expected a number")),
        }
    }

    fn name_list(&mut self) -> Result<Vec<String>> {
        let mut out = vec![self.ident()?];
        while self.eat(",") {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    pub(crate) fn definition(&mut self) -> Result<(String, PPFormula)> {
        let head = self.ident()?;
        self.expect("(")?;
        let free = if self.eat(")") {
            Vec::new()
        } else {
            let v = self.name_list()?;
            self.expect(")")?;
            v
        };
        self.expect(":=")?;
        let mut vars = free.clone();
        for (i, v) in free.iter().enumerate() {
            if free[..i].contains(v) {
                return Err(self.err(format!("head variable `{v}` repeated; use an equality atom")));
            }
        }
        let mut exist = 0;
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "exists") {
            self.pos += 1;
            for y in self.name_list()? {
                if vars.contains(&y) {
                    return Err(self.err(format!("variable `{y}` declared twice")));
                }
                vars.push(y);
                exist += 1;
            }
            self.expect(".")?;
        }
        let lookup = |lx: &Self, name: &str| {
            vars.iter()
                .position(|v| v == name)
                .ok_or_else(|| lx.err(format!("undeclared variable `{name}`")))
        };
        let mut atoms = Vec::new();
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "true") {
            self.pos += 1;
        } else {
            loop {
                let first = self.ident()?;
                if self.eat("(") {
                    let mut args = Vec::new();
                    for a in self.name_list()? {
                        args.push(lookup(self, &a)?);
                    }
                    self.expect(")")?;
                    atoms.push(Atom::Rel { name: first, args });
                } else {
                    let a = lookup(self, &first)?;
                    self.expect("=")?;
                    let second = self.ident()?;
                    let b = lookup(self, &second)?;
                    atoms.push(Atom::Eq(a, b));
                }
                if !self.eat("&") {
                    break;
                }
            }
        }
        self.expect(";")?;
        Ok((head, PPFormula::new(free.len(), exist, atoms)?))
    }
}

struct Compiled<'a> {
    size: Elem,
    free: usize,
    total: usize,
    /// Atoms to check when variable `v` is assigned (its largest variable).
    triggers: Vec<Vec<(Option<&'a Relation>, Vec<usize>)>>,
}

impl Compiled<'_> {
    fn ok(&self, level: usize, assign: &[Elem], buf: &mut Vec<Elem>) -> bool {
        self.triggers[level].iter().all(|(rel, vars)| match rel {
            Some(r) => {
                buf.clear();
                buf.extend(vars.iter().map(|&v| assign[v]));
                r.contains(buf)
            }
            None => assign[vars[0]] == assign[vars[1]],
        })
    }

    fn extend(&self, level: usize, assign: &mut Vec<Elem>, buf: &mut Vec<Elem>) -> bool {
        if level == self.total {
            return true;
        }
        for x in 0..self.size {
            assign[level] = x;
            if self.ok(level, assign, buf) && self.extend(level + 1, assign, buf) {
                return true;
            }
        }
        false
    }

    fn enumerate(&self, level: usize, assign: &mut Vec<Elem>, buf: &mut Vec<Elem>, out: &mut Vec<Elem>) {
        if level == self.free {
            if self.extend(level, assign, buf) {
                out.extend_from_slice(&assign[..self.free]);
            }
            return;
        }
        for x in 0..self.size {
            assign[level] = x;
            if self.ok(level, assign, buf) {
                self.enumerate(level + 1, assign, buf, out);
            }
        }
    }
}

/// The set of free-variable tuples satisfying `phi` in `a`.
pub fn evaluate_pp(a: &RelStructure, phi: &PPFormula) -> Result<Relation> {
    phi.check(a.signature())?;
    if phi.free_vars == 0 {
        return Err(Error::invalid("pp-formula needs at least one free variable"));
    }
    let total = phi.free_vars + phi.exist_vars;
    let mut triggers = vec![Vec::new(); total];
    for atom in &phi.atoms {
        let vars = atom.vars();
        let last = *vars.iter().max().expect("atoms have variables");
        let rel = match atom {
            Atom::Rel { name, .. } => Some(a.relation(name).expect("checked")),
            Atom::Eq(..) => None,
        };
        triggers[last].push((rel, vars));
    }
    let compiled = Compiled {
        size: a.size() as Elem,
        free: phi.free_vars,
        total,
        triggers,
    };
    let mut out = Vec::new();
    let mut assign = vec![0; total];
    compiled.enumerate(0, &mut assign, &mut Vec::new(), &mut out);
    Ok(Relation::from_flat(a.size(), phi.free_vars, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::structures::TupleCoding;

    /// Enumerates every assignment of all variables.
    fn naive(a: &RelStructure, phi: &PPFormula) -> Relation {
        let total = phi.free_vars + phi.exist_vars;
        let coding = TupleCoding::new(a.size(), total).unwrap();
        let mut out = Vec::new();
        for code in 0..coding.count() {
            let v = coding.decode(code);
            let sat = phi.atoms.iter().all(|atom| match atom {
                Atom::Rel { name, args } => {
                    let t: Vec<Elem> = args.iter().map(|&i| v[i]).collect();
                    a.relation(name).unwrap().contains(&t)
                }
                Atom::Eq(x, y) => v[*x] == v[*y],
            });
            if sat {
                out.push(v[..phi.free_vars].to_vec());
            }
        }
        Relation::new(a.size(), phi.free_vars, out).unwrap()
    }

    #[test]
    fn antisymmetry() {
        let (_, phi) = parse_pp_formula("d(x,y) := le(x,y) & le(y,x);").unwrap();
        let r = evaluate_pp(&fixtures::boolean_order(), &phi).unwrap();
        assert_eq!(r, Relation::new(2, 2, [[0, 0], [1, 1]]).unwrap());
    }

    #[test]
    fn projection_of_order() {
        let (_, phi) = parse_pp_formula("u(x) := exists y. le(y,x);").unwrap();
        let r = evaluate_pp(&fixtures::boolean_order(), &phi).unwrap();
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn hepp_zero_sum_projection_is_full() {
        let (_, phi) = parse_pp_formula("u(x) := exists y, z. R00(x,y,z);").unwrap();
        let r = evaluate_pp(&fixtures::hepp_a(), &phi).unwrap();
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn agrees_with_naive_enumeration() {
        let a = fixtures::hepp_a();
        let b = fixtures::boolean_order_with_constants();
        let cases = [
            (&a, "p(x1,x2) := exists y1. R01(x1,y1,x2) & C10(y1);"),
            (&a, "p(x1,x2,x3) := exists y1,y2. R11(x1,y1,y2) & R00(y2,x2,x3) & y1 = x1;"),
            (&a, "p(x1) := exists y1. C00(y1) & C01(y1);"),
            (&b, "p(x1,x2) := exists y1. le(x1,y1) & le(y1,x2) & c1(y1);"),
            (&b, "p(x1,x2,x3) := x1 = x2 & le(x2,x3);"),
            (&b, "p(x1,x2) := true;"),
        ];
        for (s, text) in cases {
            let (_, phi) = parse_pp_formula(text).unwrap();
            assert_eq!(evaluate_pp(s, &phi).unwrap(), naive(s, &phi), "{text}");
        }
    }

    #[test]
    fn text_round_trip() {
        let text = "pp(x1,x2) := exists y1. R(x1,y1) & y1 = x2;";
        let (name, phi) = parse_pp_formula(text).unwrap();
        assert_eq!(name, "pp");
        assert_eq!(phi.to_text("pp"), text);
        assert_eq!(phi.free_vars, 2);
        assert_eq!(phi.exist_vars, 1);
    }

    #[test]
    fn malformed_formulas() {
        assert!(parse_pp_formula("p(x) := R(z);").is_err());
        assert!(parse_pp_formula("p(x,x) := R(x);").is_err());
        assert!(parse_pp_formula("p(x) := R(x)").is_err());
        let (_, phi) = parse_pp_formula("p(x) := nope(x);").unwrap();
        assert!(matches!(
            evaluate_pp(&fixtures::boolean_order(), &phi),
            Err(Error::SignatureMismatch(_))
        ));
        let (_, phi) = parse_pp_formula("p(x) := le(x);").unwrap();
        assert!(matches!(
            evaluate_pp(&fixtures::boolean_order(), &phi),
            Err(Error::ArityMismatch { .. })
        ));
    }
}
