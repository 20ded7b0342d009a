//! Free structures `F_𝒜(B)`, lifted relations, colorings and h1 clone
//! homomorphisms.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::budget::{Decision, Limits, Meter, SearchBudget};
use crate::clone::{
    compose_unchecked, generate_metered, polymorphisms_metered, preserves_all, projection, table_len, CloneGenSet,
    OperationTable,
};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::hom::{find_hom_metered, is_hom, HomMap};
use crate::identities::{find_operation_metered, H1IdentitySystem};
use crate::structures::{Elem, RelStructure, Relation, TupleCoding};

/// A clone given either by generators or as the polymorphism clone of a
/// structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CloneSource {
    Generated(CloneGenSet),
    Polymorphisms(RelStructure),
}

impl CloneSource {
    pub fn domain_size(&self) -> usize {
        match self {
            CloneSource::Generated(g) => g.domain_size,
            CloneSource::Polymorphisms(a) => a.size(),
        }
    }

    /// All `k`-ary members, sorted.
    pub(crate) fn members(&self, k: usize, meter: &Arc<Meter>) -> Result<Vec<OperationTable>> {
        match self {
            CloneSource::Generated(g) => generate_metered(g, k, meter),
            CloneSource::Polymorphisms(a) => collect_polymorphisms(a, k, meter),
        }
    }
}

fn collect_polymorphisms(a: &RelStructure, k: usize, meter: &Arc<Meter>) -> Result<Vec<OperationTable>> {
    polymorphisms_metered(a, k, Arc::clone(meter))?.collect()
}

/// `F_𝒜(B)`: the `|B|`-ary members of the clone, with every relation `R`
/// of `B` lifted to `R^𝒜`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeStructure {
    pub source: CloneSource,
    pub target: RelStructure,
    pub carrier: Vec<OperationTable>,
    /// Carrier index of `π^B_b` for each `b`.
    pub generators_index: Vec<u32>,
    /// The lifted relations, over carrier indices.
    pub lifted: RelStructure,
}

impl FreeStructure {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("free structures serialize")
    }

    fn index(&self) -> HashMap<&[Elem], u32> {
        self.carrier.iter().zip(0..).map(|(f, i)| (f.table(), i)).collect()
    }
}

/// Builds `F_𝒜(B)` for the clone `source` and the structure `b`.
pub fn free_structure(source: &CloneSource, b: &RelStructure, budget: &SearchBudget) -> Result<FreeStructure> {
    free_structure_metered(source, b, &Arc::new(budget.meter()))
}

pub(crate) fn free_structure_metered(
    source: &CloneSource,
    b: &RelStructure,
    meter: &Arc<Meter>,
) -> Result<FreeStructure> {
    let d = source.domain_size();
    let n = b.size();
    table_len(d, n, &Limits::default())?;
    let carrier = source.members(n, meter)?;
    let index: HashMap<&[Elem], u32> = carrier.iter().zip(0..).map(|(f, i)| (f.table(), i)).collect();
    let generators_index = (1..=n)
        .map(|i| {
            let p = projection(d, n, i)?;
            index
                .get(p.table())
                .copied()
                .ok_or_else(|| Error::CrossCheck("projection missing from the free structure".into()))
        })
        .collect::<Result<Vec<u32>>>()?;
    let mut rels = Vec::new();
    for (name, r) in b.iter() {
        let tuples = match source {
            CloneSource::Generated(g) => lift_generated(g, &carrier, &index, &generators_index, r, meter)?,
            CloneSource::Polymorphisms(a) => lift_polymorphisms(a, &index, n, r, meter)?,
        };
        rels.push((name, Relation::from_flat(carrier.len(), r.arity(), tuples)));
    }
    let lifted = RelStructure::new(carrier.len(), rels)?;
    Ok(FreeStructure {
        source: source.clone(),
        target: b.clone(),
        carrier,
        generators_index,
        lifted,
    })
}

/// How one generator acts on carrier indices.
enum Action {
    Table(Vec<u32>),
    Direct(OperationTable),
}

const ACTION_TABLE_LIMIT: u64 = 1 << 22;

impl Action {
    fn new(
        g: &OperationTable,
        carrier: &[OperationTable],
        index: &HashMap<&[Elem], u32>,
        meter: &Meter,
    ) -> Result<Self> {
        let n = carrier.len() as u64;
        let m = g.arity();
        match crate::budget::checked_pow(n, m as u64).filter(|&c| c <= ACTION_TABLE_LIMIT) {
            Some(count) => {
                meter.charge(count)?;
                let mut table = Vec::with_capacity(count as usize);
                let mut pick = vec![0usize; m];
                for _ in 0..count {
                    table.push(apply(g, carrier, index, &pick)?);
                    for slot in pick.iter_mut().rev() {
                        *slot += 1;
                        if *slot < carrier.len() {
                            break;
                        }
                        *slot = 0;
                    }
                }
                Ok(Action::Table(table))
            }
            None => Ok(Action::Direct(g.clone())),
        }
    }

    fn act(&self, carrier: &[OperationTable], index: &HashMap<&[Elem], u32>, args: &[usize]) -> Result<u32> {
        match self {
            Action::Table(t) => {
                let i = args.iter().fold(0usize, |acc, &a| acc * carrier.len() + a);
                Ok(t[i])
            }
            Action::Direct(g) => apply(g, carrier, index, args),
        }
    }
}

fn apply(g: &OperationTable, carrier: &[OperationTable], index: &HashMap<&[Elem], u32>, args: &[usize]) -> Result<u32> {
    let len = carrier[0].table().len();
    let arity = carrier[0].arity();
    let op = compose_unchecked(g, args.iter().map(|&a| carrier[a].table()), arity, len);
    index
        .get(op.table())
        .copied()
        .ok_or_else(|| Error::CrossCheck("carrier is not closed under a generator".into()))
}

/// Semi-naive closure of the generator tuples under the generators.
fn lift_generated(
    gen: &CloneGenSet,
    carrier: &[OperationTable],
    index: &HashMap<&[Elem], u32>,
    generators_index: &[u32],
    r: &Relation,
    meter: &Meter,
) -> Result<Vec<Elem>> {
    let k = r.arity();
    let mut tuples: Vec<Vec<u32>> = Vec::new();
    let mut seen: HashMap<Vec<u32>, ()> = HashMap::new();
    let mut push = |t: Vec<u32>, tuples: &mut Vec<Vec<u32>>| {
        if seen.insert(t.clone(), ()).is_none() {
            tuples.push(t);
        }
    };
    for t in r.iter() {
        push(t.iter().map(|&b| generators_index[b as usize]).collect(), &mut tuples);
    }
    let d = gen.domain_size;
    let arity = carrier[0].arity();
    for g in gen.generators.iter().filter(|g| g.arity() == 0) {
        let c = OperationTable::constant(d, arity, g.table()[0])?;
        let i = index
            .get(c.table())
            .copied()
            .ok_or_else(|| Error::CrossCheck("constant missing from the free structure".into()))?;
        push(vec![i; k], &mut tuples);
    }
    let actions = gen
        .generators
        .iter()
        .filter(|g| g.arity() > 0)
        .map(|g| Action::new(g, carrier, index, meter))
        .collect::<Result<Vec<_>>>()?;
    let mut settled = 0;
    let mut args = Vec::new();
    loop {
        let end = tuples.len();
        if settled == end {
            break;
        }
        for (g, action) in gen.generators.iter().filter(|g| g.arity() > 0).zip(&actions) {
            let m = g.arity();
            let mut pick = vec![0usize; m];
            'combos: loop {
                if pick.iter().any(|&p| p >= settled) {
                    meter.charge(1)?;
                    let mut out = Vec::with_capacity(k);
                    for j in 0..k {
                        args.clear();
                        args.extend(pick.iter().map(|&p| tuples[p][j] as usize));
                        out.push(action.act(carrier, index, &args)?);
                    }
                    push(out, &mut tuples);
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
    Ok(tuples.into_iter().flatten().collect())
}

/// `R^𝒜 = {(s(π_{col_1}), …, s(π_{col_k})) : s ∈ Pol(A) of arity |R|}`.
fn lift_polymorphisms(
    a: &RelStructure,
    index: &HashMap<&[Elem], u32>,
    n: usize,
    r: &Relation,
    meter: &Arc<Meter>,
) -> Result<Vec<Elem>> {
    let m = r.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let columns: Vec<Vec<usize>> = (0..r.arity())
        .map(|j| r.iter().map(|t| t[j] as usize).collect())
        .collect();
    let mut out = Vec::new();
    for s in polymorphisms_metered(a, m, Arc::clone(meter))? {
        let s = s?;
        for col in &columns {
            let minor = s.minor(col, n)?;
            let i = index
                .get(minor.table())
                .copied()
                .ok_or_else(|| Error::CrossCheck("minor of a polymorphism is not a polymorphism".into()))?;
            out.push(i);
        }
    }
    Ok(out)
}

/// A map from the carrier of a free structure to `B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub map: Vec<Elem>,
    pub strong: bool,
}

/// Searches for a (strong) coloring, i.e. a homomorphism from the lifted
/// structure to `B`, with `π_b ↦ b` when `strong`.
pub fn find_coloring(f: &FreeStructure, strong: bool, budget: &SearchBudget) -> Result<Decision<Coloring>> {
    find_coloring_metered(f, strong, &budget.meter())
}

pub(crate) fn find_coloring_metered(f: &FreeStructure, strong: bool, meter: &Meter) -> Result<Decision<Coloring>> {
    let pins: Vec<(usize, Elem)> = if strong {
        f.generators_index.iter().zip(0..).map(|(&i, b)| (i as usize, b)).collect()
    } else {
        Vec::new()
    };
    let found = find_hom_metered(&f.lifted, &f.target, &pins, meter)?.map(|h| Coloring { map: h.map, strong });
    if let Decision::Found(c) = &found {
        if !verify_coloring(f, c)? {
            return Err(Error::CrossCheck("coloring failed re-verification".into()));
        }
    }
    Ok(found)
}

/// Checks the coloring conditions directly.
pub fn verify_coloring(f: &FreeStructure, c: &Coloring) -> Result<bool> {
    if c.map.len() != f.carrier.len() {
        return Ok(false);
    }
    let h = HomMap::new(f.target.size(), c.map.clone())?;
    if !is_hom(&h, &f.lifted, &f.target)? {
        return Ok(false);
    }
    Ok(!c.strong || f.generators_index.iter().zip(0..).all(|(&i, b)| c.map[i as usize] == b))
}

/// Operations `f'(b_1, …, b_n) = c(f(π_{b_1}, …, π_{b_n}))` induced by a
/// coloring, for every clone member `f` of arity `1..=max_arity`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InducedOperations {
    /// Number of clone members reflected.
    pub checked: usize,
    /// The distinct induced operations on `B`.
    pub operations: Vec<OperationTable>,
    /// How many of them fail to preserve some relation of `B`.
    pub violations: usize,
}

pub fn induced_operations(
    f: &FreeStructure,
    c: &Coloring,
    max_arity: usize,
    budget: &SearchBudget,
) -> Result<InducedOperations> {
    induced_metered(f, c, max_arity, &Arc::new(budget.meter()))
}

pub(crate) fn induced_metered(
    f: &FreeStructure,
    c: &Coloring,
    max_arity: usize,
    meter: &Arc<Meter>,
) -> Result<InducedOperations> {
    let index = f.index();
    let b = f.target.size();
    let mut checked = 0;
    let mut operations: Vec<OperationTable> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for n in 1..=max_arity {
        for member in f.source.members(n, meter)? {
            checked += 1;
            let coding = TupleCoding::new(b, n)?;
            let mut table = Vec::with_capacity(coding.count() as usize);
            for code in 0..coding.count() {
                let vars: Vec<usize> = coding.decode(code).into_iter().map(|x| x as usize).collect();
                let minor = member.minor(&vars, b)?;
                let i = index
                    .get(minor.table())
                    .copied()
                    .ok_or_else(|| Error::CrossCheck("minor missing from the free structure".into()))?;
                table.push(c.map[i as usize]);
            }
            let op = OperationTable::new(b, n, table)?;
            if seen.insert(op.clone()) {
                operations.push(op);
            }
        }
    }
    let violations = operations.iter().filter(|op| !preserves_all(op, &f.target)).count();
    Ok(InducedOperations {
        checked,
        operations,
        violations,
    })
}

/// Witness of an h1 clone homomorphism `Pol(A) → Pol(B)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct H1Certificate {
    pub coloring: Coloring,
    pub induced: InducedOperations,
}

/// Decides whether there is an h1 clone homomorphism from `Pol(a)` to
/// `Pol(b)` by searching for a `b`-coloring of `Pol(a)`.
pub fn h1_homomorphism_exists(a: &RelStructure, b: &RelStructure, budget: &SearchBudget) -> Result<Decision<H1Certificate>> {
    h1_metered(a, b, &Arc::new(budget.meter()))
}

fn h1_metered(a: &RelStructure, b: &RelStructure, meter: &Arc<Meter>) -> Result<Decision<H1Certificate>> {
    let free = match free_structure_metered(&CloneSource::Polymorphisms(a.clone()), b, meter) {
        Ok(f) => f,
        Err(Error::BudgetExceeded) => return Ok(Decision::BudgetExceeded),
        Err(e) => return Err(e),
    };
    let coloring = match find_coloring_metered(&free, false, meter)? {
        Decision::Found(c) => c,
        Decision::Absent => return Ok(Decision::Absent),
        Decision::BudgetExceeded => return Ok(Decision::BudgetExceeded),
    };
    let induced = match induced_metered(&free, &coloring, 3, meter) {
        Ok(i) => i,
        Err(Error::BudgetExceeded) => return Ok(Decision::BudgetExceeded),
        Err(e) => return Err(e),
    };
    if induced.violations > 0 {
        return Err(Error::CrossCheck(format!(
            "{} induced operations fail to be polymorphisms of the target",
            induced.violations
        )));
    }
    Ok(Decision::Found(H1Certificate { coloring, induced }))
}

static PROJECTION_TEST_VALID: OnceLock<std::result::Result<(), String>> = OnceLock::new();

/// Confirms that the projection-test structure has only projections as
/// polymorphisms of arity at most 3.
pub fn validate_projection_test_structure() -> Result<()> {
    PROJECTION_TEST_VALID
        .get_or_init(|| {
            let t = fixtures::projection_test_structure();
            for n in 1..=3 {
                let meter = Arc::new(SearchBudget::default().meter());
                let polys = collect_polymorphisms(&t, n, &meter).map_err(|e| e.to_string())?;
                let all_projections = polys.len() == n && polys.iter().all(|p| p.projection_index().is_some());
                if !all_projections {
                    return Err(format!("projection-test structure has {} polymorphisms of arity {n}", polys.len()));
                }
            }
            Ok(())
        })
        .clone()
        .map_err(Error::CrossCheck)
}

/// Outcome of [`h1_to_projections`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionVerdict {
    /// `Pol(A)` maps to the projection clone: no Siggers polymorphism, and
    /// a coloring by the projection-test structure.
    Exists(H1Certificate),
    /// A Siggers polymorphism exists and no coloring does.
    NotExists { siggers: OperationTable },
    BudgetExceeded,
}

/// Decides whether `Pol(a)` has an h1 clone homomorphism to the projection
/// clone, once through Siggers polymorphisms and once through colorings;
/// the two answers must agree.
pub fn h1_to_projections(a: &RelStructure, budget: &SearchBudget) -> Result<ProjectionVerdict> {
    validate_projection_test_structure()?;
    let meter = Arc::new(budget.meter());
    let siggers = match find_operation_metered(a, &H1IdentitySystem::siggers(), &meter)? {
        Decision::Found(mut asg) => Some(asg.remove("t").expect("siggers symbol")),
        Decision::Absent => None,
        Decision::BudgetExceeded => return Ok(ProjectionVerdict::BudgetExceeded),
    };
    let coloring = h1_metered(a, &fixtures::projection_test_structure(), &meter)?;
    match (siggers, coloring) {
        (_, Decision::BudgetExceeded) => Ok(ProjectionVerdict::BudgetExceeded),
        (None, Decision::Found(cert)) => Ok(ProjectionVerdict::Exists(cert)),
        (Some(t), Decision::Absent) => Ok(ProjectionVerdict::NotExists { siggers: t }),
        (Some(_), Decision::Found(_)) => Err(Error::CrossCheck(
            "Siggers polymorphism found but the clone is colorable by the projection-test structure".into(),
        )),
        (None, Decision::Absent) => Err(Error::CrossCheck(
            "no Siggers polymorphism but no coloring by the projection-test structure".into(),
        )),
    }
}
