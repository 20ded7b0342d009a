//! pp-powers and pp-constructibility.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::pp::{evaluate_pp, Atom, Lexer, PPFormula, Tok};
use crate::budget::{checked_pow, Decision, Limits, Meter, SearchBudget};
use crate::error::{Error, Result};
use crate::hom::{hom_equivalent_metered, HomMap};
use crate::structures::{Elem, RelStructure, Relation, Signature, TupleCoding};

/// A dimension together with one pp-formula per output relation. A formula
/// for a `k`-ary output relation has `k * dimension` free variables, read
/// as `k` consecutive blocks of length `dimension`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PPPowerSpec {
    pub dimension: usize,
    pub out_signature: Signature,
    pub defs: Vec<PPFormula>,
}

impl PPPowerSpec {
    pub fn new(dimension: usize, defs: Vec<(String, PPFormula)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("pp-power dimension must be positive"));
        }
        let mut symbols = Vec::new();
        for (name, phi) in &defs {
            if phi.free_vars == 0 || phi.free_vars % dimension != 0 {
                return Err(Error::invalid(format!(
                    "definition of `{name}` has {} free variables, not a positive multiple of {dimension}",
                    phi.free_vars
                )));
            }
            symbols.push((name.clone(), phi.free_vars / dimension));
        }
        Ok(PPPowerSpec {
            dimension,
            out_signature: Signature::new(symbols)?,
            defs: defs.into_iter().map(|(_, phi)| phi).collect(),
        })
    }

    /// Dimension 1, each relation of `sig` defined by its own atom.
    pub fn identity(sig: &Signature) -> Self {
        PPPowerSpec {
            dimension: 1,
            out_signature: sig.clone(),
            defs: sig.iter().map(|(n, k)| PPFormula::atom(n, k)).collect(),
        }
    }

    /// Parses `dimension N;` followed by definitions.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lx = Lexer::new(text)?;
        match lx.peek() {
            Some(Tok::Ident(s)) if s == "dimension" => {
                lx.ident()?;
            }
            _ => return Err(lx.err("expected `dimension`")),
        }
        let n = lx.number()? as usize;
        lx.expect(";")?;
        let mut defs = Vec::new();
        while lx.peek().is_some() {
            defs.push(lx.definition()?);
        }
        Self::new(n, defs)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dimension {};\n", self.dimension);
        for ((name, _), phi) in self.out_signature.iter().zip(&self.defs) {
            out.push_str(&phi.to_text(name));
            out.push('\n');
        }
        out
    }
}

impl From<PPPowerSpec> for String {
    fn from(s: PPPowerSpec) -> String {
        s.to_text()
    }
}

impl TryFrom<String> for PPPowerSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        PPPowerSpec::parse(&s)
    }
}

/// Regroups a relation of arity `k * n` on `size` into a `k`-ary relation
/// on `size^n`.
fn regroup(rel: &Relation, size: usize, n: usize, domain: usize) -> Relation {
    let k = rel.arity() / n;
    let mut data = Vec::with_capacity(rel.len() * k);
    for t in rel.iter() {
        for block in t.chunks_exact(n) {
            let code = block.iter().fold(0u64, |c, &x| c * size as u64 + x as u64);
            data.push(code as Elem);
        }
    }
    Relation::from_flat(domain, k, data)
}

/// The pp-power of `a` given by `spec`, on domain `size^dimension`.
pub fn pp_power(a: &RelStructure, spec: &PPPowerSpec) -> Result<RelStructure> {
    pp_power_with(a, spec, &Limits::default())
}

pub fn pp_power_with(a: &RelStructure, spec: &PPPowerSpec, limits: &Limits) -> Result<RelStructure> {
    let n = spec.dimension;
    let domain = checked_pow(a.size() as u64, n as u64)
        .filter(|&d| d <= limits.power_domain)
        .ok_or(Error::Capacity {
            what: "pp-power domain",
            requested: (a.size() as u128).saturating_pow(n as u32),
            limit: limits.power_domain as u128,
        })? as usize;
    let mut rels = Vec::new();
    for ((name, k), phi) in spec.out_signature.iter().zip(&spec.defs) {
        if phi.free_vars != k * n {
            return Err(Error::invalid(format!("definition of `{name}` has the wrong number of free variables")));
        }
        let rel = evaluate_pp(a, phi)?;
        rels.push((name, regroup(&rel, a.size(), n, domain)));
    }
    RelStructure::new(domain, rels)
}

/// Certificates that `b` is homomorphically equivalent to a pp-power of `a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PpConstruction {
    pub spec: PPPowerSpec,
    pub power: RelStructure,
    /// Homomorphism from the pp-power to `b`.
    pub to_target: HomMap,
    /// Homomorphism from `b` to the pp-power.
    pub from_target: HomMap,
}

fn check_metered(
    a: &RelStructure,
    b: &RelStructure,
    spec: &PPPowerSpec,
    meter: &Meter,
) -> Result<Decision<PpConstruction>> {
    if &spec.out_signature != b.signature() {
        return Err(Error::SignatureMismatch(format!(
            "spec defines {}, target has {}",
            spec.out_signature,
            b.signature()
        )));
    }
    let power = pp_power(a, spec)?;
    Ok(hom_equivalent_metered(&power, b, meter)?.map(|(to_target, from_target)| PpConstruction {
        spec: spec.clone(),
        power,
        to_target,
        from_target,
    }))
}

/// Decides whether `b` is homomorphically equivalent to the pp-power of `a`
/// described by `spec`.
pub fn check_pp_constructible(
    a: &RelStructure,
    b: &RelStructure,
    spec: &PPPowerSpec,
    budget: &SearchBudget,
) -> Result<Decision<PpConstruction>> {
    check_metered(a, b, spec, &budget.meter())
}

/// Limits on the specs explored by [`bounded_pp_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PpBounds {
    pub max_dimension: usize,
    pub max_existentials: usize,
    pub max_atoms: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PpSearchOutcome {
    Found(Box<PpConstruction>),
    /// No spec within the bounds works. This is not a refutation of
    /// pp-constructibility.
    NoneWithinBounds(PpBounds),
    BudgetExceeded,
}

/// Atoms available over `vars` variables, in enumeration order.
fn atom_universe(sig: &Signature, vars: usize) -> Vec<Atom> {
    let mut out = Vec::new();
    for (name, k) in sig.iter() {
        let coding = TupleCoding::new(vars, k).expect("small formula");
        for code in 0..coding.count() {
            out.push(Atom::Rel {
                name: name.to_string(),
                args: coding.decode(code).into_iter().map(|x| x as usize).collect(),
            });
        }
    }
    for i in 0..vars {
        for j in i + 1..vars {
            out.push(Atom::Eq(i, j));
        }
    }
    out
}

fn rename_atom(atom: &Atom, perm: &[usize], free: usize) -> Atom {
    let r = |v: usize| if v < free { v } else { free + perm[v - free] };
    match atom {
        Atom::Rel { name, args } => Atom::Rel {
            name: name.clone(),
            args: args.iter().map(|&v| r(v)).collect(),
        },
        Atom::Eq(a, b) => {
            let (a, b) = (r(*a), r(*b));
            Atom::Eq(a.min(b), a.max(b))
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Keeps an atom set only if every bound variable occurs and the set is
/// lexicographically least among its renamings of bound variables.
fn canonical(
    pick: &[usize],
    universe: &[Atom],
    index: &HashMap<Atom, usize>,
    perms: &[Vec<usize>],
    free: usize,
    exist: usize,
) -> bool {
    let mut used = vec![false; exist];
    for &i in pick {
        let vars = match &universe[i] {
            Atom::Rel { args, .. } => args.clone(),
            Atom::Eq(a, b) => vec![*a, *b],
        };
        for v in vars {
            if v >= free {
                used[v - free] = true;
            }
        }
    }
    if used.iter().any(|u| !u) {
        return false;
    }
    for perm in perms {
        let mut renamed: Vec<usize> = pick
            .iter()
            .map(|&i| index[&rename_atom(&universe[i], perm, free)])
            .collect();
        renamed.sort_unstable();
        if renamed.as_slice() < pick {
            return false;
        }
    }
    true
}

/// Distinct relations definable by formulas within the bounds, with the
/// first formula found for each, in order of (atoms, existentials).
fn candidates(
    a: &RelStructure,
    free: usize,
    bounds: &PpBounds,
    meter: &Meter,
) -> Result<Vec<(PPFormula, Relation)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for atoms in 0..=bounds.max_atoms {
        for exist in 0..=bounds.max_existentials {
            if exist > 0 && atoms == 0 {
                continue;
            }
            let universe = atom_universe(a.signature(), free + exist);
            let index: HashMap<Atom, usize> = universe.iter().cloned().zip(0..).collect();
            let perms = permutations(exist);
            let mut pick: Vec<usize> = (0..atoms).collect();
            if atoms > universe.len() {
                continue;
            }
            loop {
                if canonical(&pick, &universe, &index, &perms, free, exist) {
                    meter.charge(1)?;
                    let chosen = pick.iter().map(|&i| universe[i].clone()).collect();
                    let phi = PPFormula::new(free, exist, chosen)?;
                    let rel = evaluate_pp(a, &phi)?;
                    if seen.insert(rel.flat().to_vec()) {
                        out.push((phi, rel));
                    }
                }
                // next strictly increasing index vector
                let mut i = atoms;
                let mut advanced = false;
                while i > 0 {
                    i -= 1;
                    if pick[i] < universe.len() - atoms + i {
                        pick[i] += 1;
                        for j in i + 1..atoms {
                            pick[j] = pick[j - 1] + 1;
                        }
                        advanced = true;
                        break;
                    }
                }
                if !advanced {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Searches pp-powers of `a` within `bounds` for one homomorphically
/// equivalent to `b`. Only a `Found` outcome carries information about
/// pp-constructibility.
pub fn bounded_pp_search(
    a: &RelStructure,
    b: &RelStructure,
    bounds: PpBounds,
    budget: &SearchBudget,
) -> Result<PpSearchOutcome> {
    let meter = budget.meter();
    match search(a, b, &bounds, &meter) {
        Ok(Some(found)) => Ok(PpSearchOutcome::Found(Box::new(found))),
        Ok(None) => Ok(PpSearchOutcome::NoneWithinBounds(bounds)),
        Err(Error::BudgetExceeded) => Ok(PpSearchOutcome::BudgetExceeded),
        Err(e) => Err(e),
    }
}

fn search(a: &RelStructure, b: &RelStructure, bounds: &PpBounds, meter: &Meter) -> Result<Option<PpConstruction>> {
    let symbols: Vec<(String, usize)> = b.signature().iter().map(|(n, k)| (n.to_string(), k)).collect();
    for dim in 1..=bounds.max_dimension {
        let Some(domain) = checked_pow(a.size() as u64, dim as u64).filter(|&d| d <= Limits::default().power_domain)
        else {
            break;
        };
        let domain = domain as usize;
        let mut per_symbol = Vec::new();
        for (name, k) in &symbols {
            let single = b.reduct(&[name.as_str()])?;
            let mut kept = Vec::new();
            for (phi, rel) in candidates(a, k * dim, bounds, meter)? {
                let grouped = regroup(&rel, a.size(), dim, domain);
                let p = RelStructure::new(domain, [(name.as_str(), grouped.clone())])?;
                match hom_equivalent_metered(&p, &single, meter)? {
                    Decision::Found(_) => kept.push((phi, grouped)),
                    Decision::Absent => {}
                    Decision::BudgetExceeded => return Err(Error::BudgetExceeded),
                }
            }
            per_symbol.push(kept);
        }
        let mut choice = Vec::new();
        if let Some(found) = extend(a, b, dim, domain, &symbols, &per_symbol, &mut choice, meter)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &RelStructure,
    b: &RelStructure,
    dim: usize,
    domain: usize,
    symbols: &[(String, usize)],
    per_symbol: &[Vec<(PPFormula, Relation)>],
    choice: &mut Vec<usize>,
    meter: &Meter,
) -> Result<Option<PpConstruction>> {
    let depth = choice.len();
    if depth == symbols.len() {
        let defs = symbols
            .iter()
            .zip(choice.iter())
            .zip(per_symbol)
            .map(|(((name, _), &c), cands)| (name.clone(), cands[c].0.clone()))
            .collect();
        let spec = PPPowerSpec::new(dim, defs)?;
        return match check_metered(a, b, &spec, meter)? {
            Decision::Found(c) => Ok(Some(c)),
            Decision::Absent => Err(Error::CrossCheck("pp-power rejected after prefix checks".into())),
            Decision::BudgetExceeded => Err(Error::BudgetExceeded),
        };
    }
    let names: Vec<&str> = symbols[..=depth].iter().map(|(n, _)| n.as_str()).collect();
    let target = b.reduct(&names)?;
    for c in 0..per_symbol[depth].len() {
        choice.push(c);
        let rels = names
            .iter()
            .zip(choice.iter())
            .zip(per_symbol)
            .map(|((&n, &c), cands)| (n, cands[c].1.clone()));
        let partial = RelStructure::new(domain, rels)?;
        let outcome = hom_equivalent_metered(&partial, &target, meter)?;
        match outcome {
            Decision::Found(_) => {
                if let Some(found) = extend(a, b, dim, domain, symbols, per_symbol, choice, meter)? {
                    return Ok(Some(found));
                }
            }
            Decision::Absent => {}
            Decision::BudgetExceeded => return Err(Error::BudgetExceeded),
        }
        choice.pop();
    }
    Ok(None)
}
