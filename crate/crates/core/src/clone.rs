//! Operation tables, composition, relation preservation, polymorphism
//! enumeration and clone generation.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::budget::{checked_pow, Limits, Meter, SearchBudget};
use crate::error::{Error, Result};
use crate::hom::hom_csp;
use crate::search::{SolutionIter, VarOrder};
use crate::structures::{power_structure_with, Elem, RelStructure, Relation, TupleCoding};

/// A total operation `domain^arity → domain` as a flat table indexed by
/// [`TupleCoding`] (first argument most significant).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct OperationTable {
    domain_size: usize,
    arity: usize,
    table: Vec<Elem>,
}

#[derive(Deserialize)]
struct RawTable {
    domain_size: usize,
    arity: usize,
    table: Vec<Elem>,
}

impl TryFrom<RawTable> for OperationTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        OperationTable::new(raw.domain_size, raw.arity, raw.table)
    }
}

impl fmt::Debug for OperationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Op[{};{}]{:?}", self.domain_size, self.arity, self.table)
    }
}

pub(crate) fn table_len(domain_size: usize, arity: usize, limits: &Limits) -> Result<usize> {
    checked_pow(domain_size as u64, arity as u64)
        .filter(|&c| c <= limits.table_cells)
        .map(|c| c as usize)
        .ok_or(Error::Capacity {
            what: "operation table cells",
            requested: (domain_size as u128).saturating_pow(arity as u32),
            limit: limits.table_cells as u128,
        })
}

impl OperationTable {
    pub fn new(domain_size: usize, arity: usize, table: Vec<Elem>) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::invalid("operations need a nonempty domain"));
        }
        let len = table_len(domain_size, arity, &Limits::default())?;
        if table.len() != len {
            return Err(Error::invalid(format!(
                "table for arity {arity} over {domain_size} elements needs {len} entries, got {}",
                table.len()
            )));
        }
        if let Some(&bad) = table.iter().find(|&&x| x as usize >= domain_size) {
            return Err(Error::OutOfRange {
                element: bad as u64,
                size: domain_size,
            });
        }
        Ok(OperationTable {
            domain_size,
            arity,
            table,
        })
    }

    /// Tabulates `f` over all argument tuples.
    pub fn from_fn(domain_size: usize, arity: usize, f: impl Fn(&[Elem]) -> Elem) -> Result<Self> {
        let len = table_len(domain_size, arity, &Limits::default())?;
        let coding = TupleCoding::new(domain_size, arity)?;
        let mut args = vec![0; arity];
        let mut table = Vec::with_capacity(len);
        for code in 0..len as u64 {
            coding.decode_into(code, &mut args);
            table.push(f(&args));
        }
        Self::new(domain_size, arity, table)
    }

    pub fn constant(domain_size: usize, arity: usize, value: Elem) -> Result<Self> {
        let len = table_len(domain_size, arity, &Limits::default())?;
        Self::new(domain_size, arity, vec![value; len])
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self) -> &[Elem] {
        &self.table
    }

    pub fn index_of(&self, args: &[Elem]) -> usize {
        debug_assert_eq!(args.len(), self.arity);
        args.iter()
            .fold(0usize, |acc, &x| acc * self.domain_size + x as usize)
    }

    pub fn eval(&self, args: &[Elem]) -> Elem {
        self.table[self.index_of(args)]
    }

    /// The 1-based coordinate if this is a projection.
    pub fn projection_index(&self) -> Option<usize> {
        (1..=self.arity).find(|&i| {
            projection(self.domain_size, self.arity, i).is_ok_and(|p| p.table == self.table)
        })
    }

    /// The `new_arity`-ary operation `(x_0..) ↦ self(x_{vars[0]}, …)`.
    pub fn minor(&self, vars: &[usize], new_arity: usize) -> Result<OperationTable> {
        if vars.len() != self.arity || vars.iter().any(|&v| v >= new_arity) {
            return Err(Error::invalid("minor variables out of range"));
        }
        let len = table_len(self.domain_size, new_arity, &Limits::default())?;
        let coding = TupleCoding::new(self.domain_size, new_arity)?;
        let mut x = vec![0; new_arity];
        let mut args = vec![0; self.arity];
        let mut table = Vec::with_capacity(len);
        for code in 0..len as u64 {
            coding.decode_into(code, &mut x);
            for (slot, &v) in args.iter_mut().zip(vars) {
                *slot = x[v];
            }
            table.push(self.eval(&args));
        }
        Ok(OperationTable {
            domain_size: self.domain_size,
            arity: new_arity,
            table,
        })
    }
}

/// The `n`-ary projection onto coordinate `i` (1-based).
pub fn projection(domain_size: usize, n: usize, i: usize) -> Result<OperationTable> {
    if i == 0 || i > n {
        return Err(Error::invalid(format!("projection index {i} not in 1..={n}")));
    }
    OperationTable::from_fn(domain_size, n, |args| args[i - 1])
}

/// `f(g_1, …, g_n)` computed pointwise.
pub fn compose(f: &OperationTable, gs: &[OperationTable]) -> Result<OperationTable> {
    if gs.len() != f.arity {
        return Err(Error::ArityMismatch {
            name: "composition".into(),
            expected: f.arity,
            found: gs.len(),
        });
    }
    let Some(first) = gs.first() else {
        return Err(Error::invalid(
            "composing a nullary operation needs the result arity; use OperationTable::constant",
        ));
    };
    let m = first.arity;
    if let Some(bad) = gs
        .iter()
        .find(|g| g.arity != m || g.domain_size != f.domain_size)
    {
        return Err(Error::ArityMismatch {
            name: "composition argument".into(),
            expected: m,
            found: bad.arity,
        });
    }
    Ok(compose_unchecked(f, gs.iter().map(|g| g.table.as_slice()), m, first.table.len()))
}

pub(crate) fn compose_unchecked<'a>(
    f: &OperationTable,
    gs: impl Iterator<Item = &'a [Elem]> + Clone,
    m: usize,
    len: usize,
) -> OperationTable {
    let mut table = Vec::with_capacity(len);
    for cell in 0..len {
        let idx = gs
            .clone()
            .fold(0usize, |acc, g| acc * f.domain_size + g[cell] as usize);
        table.push(f.table[idx]);
    }
    OperationTable {
        domain_size: f.domain_size,
        arity: m,
        table,
    }
}

/// Whether applying `f` componentwise to any `arity(f)` tuples of `rel`
/// yields a tuple of `rel`.
pub fn preserves(f: &OperationTable, rel: &Relation) -> bool {
    if f.domain_size != rel.base() {
        return false;
    }
    let n = f.arity;
    let k = rel.arity();
    if n == 0 {
        return rel.contains(&vec![f.table[0]; k]);
    }
    if rel.is_empty() {
        return true;
    }
    let mut pick = vec![0usize; n];
    let mut args = vec![0; n];
    let mut image = vec![0; k];
    loop {
        for j in 0..k {
            for (slot, &p) in args.iter_mut().zip(&pick) {
                *slot = rel.tuple(p)[j];
            }
            image[j] = f.eval(&args);
        }
        if !rel.contains(&image) {
            return false;
        }
        let mut i = n;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            pick[i] += 1;
            if pick[i] < rel.len() {
                break;
            }
            pick[i] = 0;
        }
    }
}

/// Whether `f` is a polymorphism of `a`.
pub fn preserves_all(f: &OperationTable, a: &RelStructure) -> bool {
    f.domain_size == a.size() && a.relations().iter().all(|r| preserves(f, r))
}

/// Lazy, lexicographically ordered stream of the `n`-ary polymorphisms.
pub struct Polymorphisms {
    inner: SolutionIter,
    domain_size: usize,
    arity: usize,
}

impl Iterator for Polymorphisms {
    type Item = Result<OperationTable>;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next().map(|s| {
            s.map(|table| OperationTable {
                domain_size: self.domain_size,
                arity: self.arity,
                table,
            })
        })
    }
}

/// All `n`-ary polymorphisms of `a`, as homomorphisms `a^n → a`.
pub fn polymorphisms(a: &RelStructure, n: usize, budget: &SearchBudget) -> Result<Polymorphisms> {
    polymorphisms_metered(a, n, Arc::new(budget.meter()))
}

pub(crate) fn polymorphisms_metered(
    a: &RelStructure,
    n: usize,
    meter: Arc<Meter>,
) -> Result<Polymorphisms> {
    let limits = Limits::default();
    table_len(a.size(), n, &limits)?;
    let csp = if n == 0 {
        // a nullary operation is a constant tuple of every relation
        let mut only = crate::search::Csp::new(1, a.size());
        for r in a.relations() {
            only.restrict(0, |c| r.contains(&vec![c; r.arity()]));
        }
        only
    } else {
        let power = power_structure_with(a, n, &limits)?;
        hom_csp(&power, a)?
    };
    Ok(Polymorphisms {
        inner: SolutionIter::new(csp, VarOrder::Lexicographic, meter),
        domain_size: a.size(),
        arity: n,
    })
}

/// Collects every `n`-ary polymorphism; budget exhaustion is an error.
pub fn all_polymorphisms(a: &RelStructure, n: usize, budget: &SearchBudget) -> Result<Vec<OperationTable>> {
    polymorphisms(a, n, budget)?.collect()
}

/// A finite generating set of a clone on `{0..domain_size-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneGenSet {
    pub domain_size: usize,
    pub generators: Vec<OperationTable>,
}

impl CloneGenSet {
    pub fn new(domain_size: usize, generators: Vec<OperationTable>) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::invalid("clones need a nonempty domain"));
        }
        if generators.iter().any(|g| g.domain_size != domain_size) {
            return Err(Error::invalid("generator over a different domain"));
        }
        Ok(CloneGenSet {
            domain_size,
            generators,
        })
    }

    /// The clone of projections.
    pub fn projections(domain_size: usize) -> Self {
        CloneGenSet {
            domain_size,
            generators: Vec::new(),
        }
    }
}

/// All `k`-ary members of the clone generated by `gen`: the closure of the
/// `k`-ary projections under the generators. Sorted.
pub fn generate_to_arity(gen: &CloneGenSet, k: usize, budget: &SearchBudget) -> Result<Vec<OperationTable>> {
    generate_metered(gen, k, &budget.meter())
}

pub(crate) fn generate_metered(gen: &CloneGenSet, k: usize, meter: &Meter) -> Result<Vec<OperationTable>> {
    let d = gen.domain_size;
    let len = table_len(d, k, &Limits::default())?;
    let mut members: Vec<OperationTable> = Vec::new();
    let mut index: HashMap<Vec<Elem>, usize> = HashMap::new();
    let mut insert = |op: OperationTable, members: &mut Vec<OperationTable>| {
        if !index.contains_key(&op.table) {
            index.insert(op.table.clone(), members.len());
            members.push(op);
        }
    };
    for i in 1..=k {
        insert(projection(d, k, i)?, &mut members);
    }
    for g in gen.generators.iter().filter(|g| g.arity == 0) {
        insert(OperationTable::constant(d, k, g.table[0])?, &mut members);
    }
    if k == 0 && members.is_empty() {
        return Ok(members);
    }
    let mut settled = 0;
    loop {
        let end = members.len();
        if settled == end {
            break;
        }
        for g in gen.generators.iter().filter(|g| g.arity > 0) {
            let m = g.arity;
            let mut pick = vec![0usize; m];
            'combos: loop {
                if pick.iter().any(|&p| p >= settled) {
                    meter.charge(1)?;
                    let op = compose_unchecked(g, pick.iter().map(|&p| members[p].table.as_slice()), k, len);
                    insert(op, &mut members);
                }
                let mut i = m;
                loop {
                    if i == 0 {
                        break 'combos;
                    }
                    i -= 1;
                    pick[i] += 1;
                    if pick[i] < end {
                        break;
                    }
                    pick[i] = 0;
                }
            }
        }
        settled = end;
    }
    members.sort();
    Ok(members)
}

/// Common operations on `{0,1}` used by fixtures and tests.
pub mod boolean {
    use super::OperationTable;

    pub fn min() -> OperationTable {
        OperationTable::from_fn(2, 2, |a| a[0].min(a[1])).unwrap()
    }

    pub fn max() -> OperationTable {
        OperationTable::from_fn(2, 2, |a| a[0].max(a[1])).unwrap()
    }

    /// `x ⊕ y ⊕ z`.
    pub fn minority() -> OperationTable {
        OperationTable::from_fn(2, 3, |a| a[0] ^ a[1] ^ a[2]).unwrap()
    }

    pub fn majority() -> OperationTable {
        OperationTable::from_fn(2, 3, |a| u32::from(a.iter().sum::<u32>() >= 2)).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::boolean::*;
    use super::*;
    use crate::fixtures;

    #[test]
    fn projection_tables() {
        assert_eq!(projection(2, 1, 1).unwrap().table(), &[0, 1]);
        assert_eq!(projection(2, 2, 2).unwrap().table(), &[0, 1, 0, 1]);
        assert_eq!(projection(2, 2, 1).unwrap().table(), &[0, 0, 1, 1]);
        assert!(projection(2, 2, 3).is_err());
        assert!(projection(2, 2, 0).is_err());
    }

    #[test]
    fn projection_laws() {
        let (f, g) = (min(), max());
        let p1 = projection(2, 2, 1).unwrap();
        let p2 = projection(2, 2, 2).unwrap();
        assert_eq!(compose(&p1, &[f.clone(), g.clone()]).unwrap(), f);
        assert_eq!(compose(&f, &[p1.clone(), p2.clone()]).unwrap(), f);
        let m = minority();
        assert_eq!(compose(&m, &[p1.clone(), p2.clone(), p2.clone()]).unwrap(), p1);
        let h = compose(&min(), &[max(), min()]).unwrap();
        assert_eq!(h.eval(&[0, 1]), 0);
        assert!(compose(&m, &[p1]).is_err());
    }

    #[test]
    fn preservation() {
        let le = fixtures::order_relation();
        assert!(preserves(&min(), &le));
        assert!(!preserves(&min(), &fixtures::disequality_relation()));
        for i in 1..=3 {
            let p = projection(2, 3, i).unwrap();
            assert!(preserves(&p, &fixtures::one_in_three_relation()));
            assert!(preserves(&p, &le));
        }
        assert!(preserves(&minority(), &fixtures::xor_relation()));
        assert!(!preserves(&majority(), &fixtures::xor_relation()));
    }

    #[test]
    fn table_validation() {
        assert!(OperationTable::new(2, 2, vec![0, 1, 1]).is_err());
        assert!(matches!(
            OperationTable::new(2, 1, vec![0, 2]),
            Err(Error::OutOfRange { .. })
        ));
        let json = r#"{"domain_size":2,"arity":1,"table":[0,3]}"#;
        assert!(serde_json::from_str::<OperationTable>(json).is_err());
        let op: OperationTable =
            serde_json::from_str(r#"{"domain_size":2,"arity":2,"table":[0,0,0,1]}"#).unwrap();
        assert_eq!(op, min());
    }

    #[test]
    fn binary_polymorphisms_of_order_with_constants() {
        let a = fixtures::boolean_order_with_constants();
        let b = SearchBudget::default();
        let unary = all_polymorphisms(&a, 1, &b).unwrap();
        assert_eq!(unary, vec![projection(2, 1, 1).unwrap()]);
        let binary = all_polymorphisms(&a, 2, &b).unwrap();
        let mut expected = vec![
            projection(2, 2, 1).unwrap(),
            projection(2, 2, 2).unwrap(),
            min(),
            max(),
        ];
        expected.sort();
        assert_eq!(binary, expected);
    }

    #[test]
    fn unary_polymorphisms_of_triangle() {
        let k3 = fixtures::clique(3);
        let ops = all_polymorphisms(&k3, 1, &SearchBudget::default()).unwrap();
        assert_eq!(ops.len(), 6);
        assert!(ops.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn generation_fixpoints() {
        let b = SearchBudget::default();
        let proj = generate_to_arity(&CloneGenSet::projections(2), 3, &b).unwrap();
        assert_eq!(proj.len(), 3);
        let gen = CloneGenSet::new(2, vec![minority()]).unwrap();
        let binary = generate_to_arity(&gen, 2, &b).unwrap();
        let mut expected = vec![projection(2, 2, 1).unwrap(), projection(2, 2, 2).unwrap()];
        expected.sort();
        assert_eq!(binary, expected);
        let lattice = CloneGenSet::new(2, vec![min(), max()]).unwrap();
        let mut expected = vec![
            projection(2, 2, 1).unwrap(),
            projection(2, 2, 2).unwrap(),
            min(),
            max(),
        ];
        expected.sort();
        assert_eq!(generate_to_arity(&lattice, 2, &b).unwrap(), expected);
        // odd xor sums of four variables: 4 singletons + 4 triples
        assert_eq!(generate_to_arity(&gen, 4, &b).unwrap().len(), 8);
        // free distributive lattice on four generators without bounds
        assert_eq!(generate_to_arity(&lattice, 4, &b).unwrap().len(), 166);
    }

    #[test]
    fn minors() {
        let m = minority();
        let collapsed = m.minor(&[0, 1, 1], 2).unwrap();
        assert_eq!(collapsed, projection(2, 2, 1).unwrap());
        assert!(m.minor(&[0, 1, 2], 2).is_err());
    }

    #[test]
    fn nullary_polymorphisms_are_constant_tuples() {
        let a = fixtures::boolean_order();
        let ops = all_polymorphisms(&a, 0, &SearchBudget::default()).unwrap();
        assert_eq!(ops.len(), 2);
        let k3 = fixtures::clique(3);
        assert!(all_polymorphisms(&k3, 0, &SearchBudget::default()).unwrap().is_empty());
    }
}
