//! Systems of height-1 (and height ≤ 1) identities and the search for
//! polymorphisms satisfying them.
//!
//! An identity system is compiled into a constraint problem whose variables
//! are table cells: for every valuation of an identity's variables the two
//! sides name either a cell or, for a bare variable, a fixed element. Cells
//! forced equal are merged up front, fixed elements pin the merged cell, and
//! relation preservation adds the usual power-structure constraints.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::budget::{Decision, Limits, Meter, SearchBudget};
use crate::clone::{preserves_all, table_len, OperationTable};
use crate::error::{Error, Result};
use crate::search::{solve_first, Csp, VarOrder};
use crate::structures::{power_structure_with, Elem, RelStructure, Relation, TupleCoding};

/// One side of an identity: a bare variable or a symbol applied to
/// variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlatTerm {
    Var(usize),
    App { symbol: usize, args: Vec<usize> },
}

/// Interpretation of the symbols of a system, keyed by symbol name.
pub type Assignment = BTreeMap<String, OperationTable>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct H1IdentitySystem {
    symbols: Vec<(String, usize)>,
    variables: Vec<String>,
    equations: Vec<(FlatTerm, FlatTerm)>,
}

impl H1IdentitySystem {
    pub fn symbols(&self) -> &[(String, usize)] {
        &self.symbols
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn equations(&self) -> &[(FlatTerm, FlatTerm)] {
        &self.equations
    }

    /// Parses `t(a,r,e,a) = t(r,a,r,e); p(x,y,y) = x;`. Variables are bare
    /// identifiers or quoted names; `≈` may be used for `=`, and chains
    /// `s = t = u` expand to consecutive equations.
    pub fn parse(text: &str) -> Result<Self> {
        DslParser::new(text)?.parse()
    }

    pub fn siggers() -> Self {
        Self::parse("t(a,r,e,a) = t(r,a,r,e)").unwrap()
    }

    /// `t(x1, …, xn) = t(x2, …, xn, x1)`.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("cyclic operations need arity >= 2"));
        }
        let vars: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let mut shifted = vars.clone();
        shifted.rotate_left(1);
        Self::parse(&format!("t({}) = t({})", vars.join(","), shifted.join(",")))
    }

    pub fn maltsev() -> Self {
        Self::parse("p(x,y,y) = x; p(x,x,y) = y").unwrap()
    }

    /// Hagemann–Mitschke operations `p1 … p(n-1)` for `n`-permutability.
    pub fn hagemann_mitschke(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("Hagemann-Mitschke chains need n >= 2"));
        }
        let mut eqs = vec!["p1(x,y,y) = x".to_string()];
        for i in 1..n - 1 {
            eqs.push(format!("p{i}(x,x,y) = p{}(x,y,y)", i + 1));
        }
        eqs.push(format!("p{}(x,x,y) = y", n - 1));
        Self::parse(&eqs.join("; "))
    }

    fn side_text(&self, t: &FlatTerm) -> String {
        match t {
            FlatTerm::Var(v) => self.variables[*v].clone(),
            FlatTerm::App { symbol, args } => {
                let args: Vec<&str> = args.iter().map(|&v| self.variables[v].as_str()).collect();
                format!("{}({})", self.symbols[*symbol].0, args.join(","))
            }
        }
    }

    fn eval_side(&self, t: &FlatTerm, val: &[Elem], ops: &[&OperationTable]) -> Elem {
        match t {
            FlatTerm::Var(v) => val[*v],
            FlatTerm::App { symbol, args } => {
                let args: Vec<Elem> = args.iter().map(|&v| val[v]).collect();
                ops[*symbol].eval(&args)
            }
        }
    }

    fn equation_vars(&self, eq: &(FlatTerm, FlatTerm)) -> Vec<usize> {
        let mut vars = Vec::new();
        for side in [&eq.0, &eq.1] {
            match side {
                FlatTerm::Var(v) => vars.push(*v),
                FlatTerm::App { args, .. } => vars.extend(args),
            }
        }
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Checks every equation pointwise under all valuations.
    pub fn holds(&self, assignment: &Assignment) -> bool {
        let mut ops = Vec::new();
        let mut domain = None;
        for (name, arity) in &self.symbols {
            let Some(op) = assignment.get(name) else {
                return false;
            };
            if op.arity() != *arity || domain.is_some_and(|d| d != op.domain_size()) {
                return false;
            }
            domain = Some(op.domain_size());
            ops.push(op);
        }
        let Some(d) = domain else {
            // no symbols: only variable identities
            return self.equations.iter().all(|(l, r)| l == r);
        };
        let mut val = vec![0; self.variables.len()];
        for eq in &self.equations {
            let vars = self.equation_vars(eq);
            let coding = TupleCoding::new(d, vars.len()).expect("small valuation space");
            let mut point = vec![0; vars.len()];
            for code in 0..coding.count() {
                coding.decode_into(code, &mut point);
                for (&v, &x) in vars.iter().zip(&point) {
                    val[v] = x;
                }
                if self.eval_side(&eq.0, &val, &ops) != self.eval_side(&eq.1, &val, &ops) {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Display for H1IdentitySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eqs: Vec<String> = self
            .equations
            .iter()
            .map(|(l, r)| format!("{} = {};", self.side_text(l), self.side_text(r)))
            .collect();
        write!(f, "{}", eqs.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Quoted(String),
    Open,
    Close,
    Comma,
    Eq,
    End,
}

struct DslParser<'a> {
    text: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
    symbols: Vec<(String, usize)>,
    variables: Vec<String>,
}

impl<'a> DslParser<'a> {
    fn new(text: &'a str) -> Result<Self> {
        let mut toks = Vec::new();
        let mut chars = text.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            match c {
                '(' => toks.push((i, Tok::Open)),
                ')' => toks.push((i, Tok::Close)),
                ',' => toks.push((i, Tok::Comma)),
                '=' | '≈' => toks.push((i, Tok::Eq)),
                ';' | '\n' => toks.push((i, Tok::End)),
                '\'' | '"' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some((_, q)) if q == c => break,
                            Some((_, q)) => name.push(q),
                            None => return Err(Error::syntax_at(text, i, "unterminated quote")),
                        }
                    }
                    if name.is_empty() {
                        return Err(Error::syntax_at(text, i, "empty variable name"));
                    }
                    toks.push((i, Tok::Quoted(name)));
                }
                c if c.is_whitespace() => {}
                c if c.is_alphanumeric() || c == '_' => {
                    let mut name = c.to_string();
                    while let Some(&(_, n)) = chars.peek() {
                        if n.is_alphanumeric() || n == '_' {
                            name.push(n);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    toks.push((i, Tok::Name(name)));
                }
                _ => return Err(Error::syntax_at(text, i, format!("unexpected `{c}`"))),
            }
        }
        Ok(DslParser {
            text,
            toks,
            pos: 0,
            symbols: Vec::new(),
            variables: Vec::new(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |t| t.0)
    }

    fn error(&self, msg: &str) -> Error {
        Error::syntax_at(self.text, self.offset(), msg)
    }

    fn variable(&mut self, name: String) -> usize {
        match self.variables.iter().position(|v| *v == name) {
            Some(i) => i,
            None => {
                self.variables.push(name);
                self.variables.len() - 1
            }
        }
    }

    fn term(&mut self) -> Result<FlatTerm> {
        let at = self.offset();
        let name = match self.toks.get(self.pos).map(|t| t.1.clone()) {
            Some(Tok::Quoted(q)) => {
                self.pos += 1;
                return Ok(FlatTerm::Var(self.variable(q)));
            }
            Some(Tok::Name(n)) => {
                self.pos += 1;
                n
            }
            _ => return Err(self.error("expected a term")),
        };
        if self.peek() != Some(&Tok::Open) {
            return Ok(FlatTerm::Var(self.variable(name)));
        }
        self.pos += 1;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::Close) {
            self.pos += 1;
        } else {
            loop {
                match self.toks.get(self.pos).map(|t| t.1.clone()) {
                    Some(Tok::Name(v)) | Some(Tok::Quoted(v)) => {
                        self.pos += 1;
                        args.push(self.variable(v));
                    }
                    _ => return Err(self.error("expected a variable (terms must be flat)")),
                }
                match self.peek() {
                    Some(Tok::Comma) => self.pos += 1,
                    Some(Tok::Close) => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected `,` or `)`")),
                }
            }
        }
        let symbol = match self.symbols.iter().position(|(s, _)| *s == name) {
            Some(i) => {
                if self.symbols[i].1 != args.len() {
                    return Err(Error::syntax_at(
                        self.text,
                        at,
                        format!("`{name}` used with arities {} and {}", self.symbols[i].1, args.len()),
                    ));
                }
                i
            }
            None => {
                self.symbols.push((name, args.len()));
                self.symbols.len() - 1
            }
        };
        Ok(FlatTerm::App { symbol, args })
    }

    fn parse(mut self) -> Result<H1IdentitySystem> {
        let mut equations = Vec::new();
        loop {
            while self.peek() == Some(&Tok::End) {
                self.pos += 1;
            }
            if self.peek().is_none() {
                break;
            }
            let mut sides = vec![self.term()?];
            while self.peek() == Some(&Tok::Eq) {
                self.pos += 1;
                sides.push(self.term()?);
            }
            if sides.len() < 2 {
                return Err(self.error("expected `=`"));
            }
            match self.peek() {
                None | Some(Tok::End) => {}
                _ => return Err(self.error("expected `;`")),
            }
            for pair in sides.windows(2) {
                equations.push((pair[0].clone(), pair[1].clone()));
            }
        }
        if equations.is_empty() {
            return Err(Error::syntax_at(self.text, 0, "no identities"));
        }
        Ok(H1IdentitySystem {
            symbols: self.symbols,
            variables: self.variables,
            equations,
        })
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

enum Side {
    Cell(usize),
    Fixed(Elem),
}

/// Searches for polymorphisms of `a` that satisfy `system`.
pub fn find_operation_satisfying(
    a: &RelStructure,
    system: &H1IdentitySystem,
    budget: &SearchBudget,
) -> Result<Decision<Assignment>> {
    find_operation_metered(a, system, &budget.meter())
}

pub(crate) fn find_operation_metered(
    a: &RelStructure,
    system: &H1IdentitySystem,
    meter: &Meter,
) -> Result<Decision<Assignment>> {
    let limits = Limits::default();
    let d = a.size();
    let mut offsets = Vec::new();
    let mut total = 0usize;
    for (_, arity) in &system.symbols {
        offsets.push(total);
        total += table_len(d, *arity, &limits)?;
    }
    if total as u64 > limits.table_cells {
        return Err(Error::Capacity {
            what: "identity search cells",
            requested: total as u128,
            limit: limits.table_cells as u128,
        });
    }

    let mut uf = UnionFind((0..total).collect());
    let mut pins: Vec<(usize, Elem)> = Vec::new();
    let mut val = vec![0 as Elem; system.variables.len()];
    for eq in &system.equations {
        let vars = system.equation_vars(eq);
        let coding = TupleCoding::new(d, vars.len())?;
        let mut point = vec![0; vars.len()];
        for code in 0..coding.count() {
            coding.decode_into(code, &mut point);
            for (&v, &x) in vars.iter().zip(&point) {
                val[v] = x;
            }
            let side = |t: &FlatTerm| match t {
                FlatTerm::Var(v) => Side::Fixed(val[*v]),
                FlatTerm::App { symbol, args } => {
                    let idx = args.iter().fold(0usize, |acc, &v| acc * d + val[v] as usize);
                    Side::Cell(offsets[*symbol] + idx)
                }
            };
            match (side(&eq.0), side(&eq.1)) {
                (Side::Cell(x), Side::Cell(y)) => uf.union(x, y),
                (Side::Cell(x), Side::Fixed(e)) | (Side::Fixed(e), Side::Cell(x)) => pins.push((x, e)),
                (Side::Fixed(e), Side::Fixed(f)) => {
                    if e != f {
                        return Ok(Decision::Absent);
                    }
                }
            }
        }
    }

    let mut class_of = vec![usize::MAX; total];
    let mut classes = 0;
    for cell in 0..total {
        let root = uf.find(cell);
        if class_of[root] == usize::MAX {
            class_of[root] = classes;
            classes += 1;
        }
        class_of[cell] = class_of[root];
    }

    let mut csp = Csp::new(classes, d);
    for &(cell, e) in &pins {
        csp.restrict(class_of[cell], |x| x == e);
    }
    let targets: Vec<Arc<Relation>> = a.relations().iter().map(|r| Arc::new(r.clone())).collect();
    let mut powers: HashMap<usize, RelStructure> = HashMap::new();
    for (s, (_, arity)) in system.symbols.iter().enumerate() {
        if *arity == 0 {
            for r in a.relations() {
                csp.restrict(class_of[offsets[s]], |c| r.contains(&vec![c; r.arity()]));
            }
            continue;
        }
        if !powers.contains_key(arity) {
            powers.insert(*arity, power_structure_with(a, *arity, &limits)?);
        }
        let power = &powers[arity];
        for ((_, pr), target) in power.iter().zip(&targets) {
            for t in pr.iter() {
                let scope = t.iter().map(|&c| class_of[offsets[s] + c as usize] as u32).collect();
                csp.add(scope, target);
            }
        }
    }

    let solution = match solve_first(csp, VarOrder::MinDomain, meter) {
        Decision::Found(s) => s,
        Decision::Absent => return Ok(Decision::Absent),
        Decision::BudgetExceeded => return Ok(Decision::BudgetExceeded),
    };
    let mut assignment = Assignment::new();
    for (s, (name, arity)) in system.symbols.iter().enumerate() {
        let len = table_len(d, *arity, &limits)?;
        let table = (0..len).map(|i| solution[class_of[offsets[s] + i]]).collect();
        assignment.insert(name.clone(), OperationTable::new(d, *arity, table)?);
    }
    if !assignment.values().all(|op| preserves_all(op, a)) || !system.holds(&assignment) {
        return Err(Error::CrossCheck(format!(
            "identity search returned an invalid witness for `{system}`"
        )));
    }
    Ok(Decision::Found(assignment))
}

fn single_symbol(decision: Decision<Assignment>) -> Decision<OperationTable> {
    decision.map(|mut a| a.remove("t").expect("system declares `t`"))
}

/// A 4-ary polymorphism with `t(a,r,e,a) = t(r,a,r,e)`.
pub fn has_siggers(a: &RelStructure, budget: &SearchBudget) -> Result<Decision<OperationTable>> {
    find_operation_satisfying(a, &H1IdentitySystem::siggers(), budget).map(single_symbol)
}

/// An `n`-ary polymorphism invariant under cyclic shifts of its arguments.
pub fn has_cyclic(a: &RelStructure, n: usize, budget: &SearchBudget) -> Result<Decision<OperationTable>> {
    find_operation_satisfying(a, &H1IdentitySystem::cyclic(n)?, budget).map(single_symbol)
}
