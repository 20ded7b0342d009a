//! Homomorphisms between finite structures, homomorphic equivalence and
//! cores.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::budget::{Decision, Meter, SearchBudget};
use crate::error::{Error, Result};
use crate::search::{solve_first, Csp, SolutionIter, VarOrder};
use crate::structures::{Elem, RelStructure, Relation};

/// A total map from a source domain to a target domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HomMap {
    pub source_size: usize,
    pub target_size: usize,
    pub map: Vec<Elem>,
}

impl HomMap {
    pub fn new(target_size: usize, map: Vec<Elem>) -> Result<Self> {
        if let Some(&bad) = map.iter().find(|&&x| x as usize >= target_size) {
            return Err(Error::OutOfRange {
                element: bad as u64,
                size: target_size,
            });
        }
        Ok(HomMap {
            source_size: map.len(),
            target_size,
            map,
        })
    }

    pub fn identity(size: usize) -> Self {
        HomMap {
            source_size: size,
            target_size: size,
            map: (0..size as Elem).collect(),
        }
    }

    pub fn apply(&self, x: Elem) -> Elem {
        self.map[x as usize]
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &HomMap) -> HomMap {
        HomMap {
            source_size: self.source_size,
            target_size: other.target_size,
            map: self.map.iter().map(|&x| other.apply(x)).collect(),
        }
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.target_size];
        self.map.iter().all(|&x| !std::mem::replace(&mut seen[x as usize], true))
    }

    /// Sorted, deduplicated image.
    pub fn image(&self) -> Vec<Elem> {
        let mut img = self.map.clone();
        img.sort_unstable();
        img.dedup();
        img
    }
}

/// Checks that `f` maps every tuple of every relation of `c` into `a`.
pub fn is_hom(f: &HomMap, c: &RelStructure, a: &RelStructure) -> Result<bool> {
    c.check_same_signature(a)?;
    if f.map.len() != c.size() || f.source_size != c.size() || f.target_size != a.size() {
        return Err(Error::invalid("map does not match the structures' domains"));
    }
    if f.map.iter().any(|&x| x as usize >= a.size()) {
        return Ok(false);
    }
    let mut buf = Vec::new();
    for ((_, rc), ra) in c.iter().zip(a.relations()) {
        for t in rc.iter() {
            buf.clear();
            buf.extend(t.iter().map(|&x| f.apply(x)));
            if !ra.contains(&buf) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub(crate) fn hom_csp(c: &RelStructure, a: &RelStructure) -> Result<Csp> {
    c.check_same_signature(a)?;
    let mut csp = Csp::new(c.size(), a.size());
    for ((_, rc), ra) in c.iter().zip(a.relations()) {
        let target: Arc<Relation> = Arc::new(ra.clone());
        for t in rc.iter() {
            csp.add(t.to_vec(), &target);
        }
    }
    Ok(csp)
}

pub(crate) fn find_hom_metered(
    c: &RelStructure,
    a: &RelStructure,
    pins: &[(usize, Elem)],
    meter: &Meter,
) -> Result<Decision<HomMap>> {
    let mut csp = hom_csp(c, a)?;
    for &(v, x) in pins {
        csp.pin(v, x);
    }
    let found = solve_first(csp, VarOrder::MinDomain, meter);
    certify(found, c, a)
}

fn certify(found: Decision<Vec<Elem>>, c: &RelStructure, a: &RelStructure) -> Result<Decision<HomMap>> {
    match found {
        Decision::Found(map) => {
            let f = HomMap::new(a.size(), map)?;
            if !is_hom(&f, c, a)? {
                return Err(Error::CrossCheck("search returned a non-homomorphism".into()));
            }
            Ok(Decision::Found(f))
        }
        Decision::Absent => Ok(Decision::Absent),
        Decision::BudgetExceeded => Ok(Decision::BudgetExceeded),
    }
}

/// Searches for a homomorphism `c → a`.
pub fn find_homomorphism(
    c: &RelStructure,
    a: &RelStructure,
    budget: &SearchBudget,
) -> Result<Decision<HomMap>> {
    find_hom_metered(c, a, &[], &budget.meter())
}

/// All homomorphisms `c → a` in lexicographic order of their maps.
pub fn homomorphisms(
    c: &RelStructure,
    a: &RelStructure,
    budget: &SearchBudget,
) -> Result<impl Iterator<Item = Result<HomMap>>> {
    let csp = hom_csp(c, a)?;
    let target = a.size();
    let meter = Arc::new(budget.meter());
    Ok(SolutionIter::new(csp, VarOrder::Lexicographic, meter)
        .map(move |s| s.map(|map| HomMap { source_size: map.len(), target_size: target, map })))
}

pub(crate) fn hom_equivalent_metered(
    a: &RelStructure,
    b: &RelStructure,
    meter: &Meter,
) -> Result<Decision<(HomMap, HomMap)>> {
    a.check_same_signature(b)?;
    let there = match find_hom_metered(a, b, &[], meter)? {
        Decision::Found(f) => f,
        Decision::Absent => return Ok(Decision::Absent),
        Decision::BudgetExceeded => return Ok(Decision::BudgetExceeded),
    };
    Ok(find_hom_metered(b, a, &[], meter)?.map(|back| (there, back)))
}

/// Homomorphisms in both directions, `a → b` first.
pub fn hom_equivalent(
    a: &RelStructure,
    b: &RelStructure,
    budget: &SearchBudget,
) -> Result<Decision<(HomMap, HomMap)>> {
    hom_equivalent_metered(a, b, &budget.meter())
}

pub(crate) fn find_isomorphism_metered(
    a: &RelStructure,
    b: &RelStructure,
    meter: &Meter,
) -> Result<Decision<HomMap>> {
    a.check_same_signature(b)?;
    let same_counts = a.size() == b.size()
        && a.relations()
            .iter()
            .zip(b.relations())
            .all(|(x, y)| x.len() == y.len());
    if !same_counts {
        return Ok(Decision::Absent);
    }
    // A bijective homomorphism between finite structures with equal
    // relation sizes is an isomorphism.
    let mut csp = hom_csp(a, b)?;
    csp.set_all_different();
    certify(solve_first(csp, VarOrder::MinDomain, meter), a, b)
}

pub fn find_isomorphism(
    a: &RelStructure,
    b: &RelStructure,
    budget: &SearchBudget,
) -> Result<Decision<HomMap>> {
    find_isomorphism_metered(a, b, &budget.meter())
}

/// A core of a structure together with a retraction onto it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Core {
    /// The induced substructure, relabelled to `0..elements.len()`.
    pub structure: RelStructure,
    /// Elements of the original structure forming the core.
    pub elements: Vec<Elem>,
    /// Map from the original structure onto the core (core labels). It
    /// fixes the core: `retraction[elements[i]] = i`.
    pub retraction: HomMap,
}

fn all_but(n: usize, skip: usize) -> Vec<Elem> {
    (0..n as Elem).filter(|&x| x as usize != skip).collect()
}

/// Looks for a homomorphism from `x` into one of its proper induced
/// substructures; returns the image (in `x`'s labels) if there is one.
fn shrink_once(x: &RelStructure, meter: &Meter) -> Result<Option<Vec<Elem>>> {
    if x.size() == 1 {
        return Ok(None);
    }
    for v in 0..x.size() {
        let keep = all_but(x.size(), v);
        let sub = x.induced(&keep)?;
        match find_hom_metered(x, &sub, &[], meter)? {
            Decision::Found(h) => {
                let mut img: Vec<Elem> = h.map.iter().map(|&i| keep[i as usize]).collect();
                img.sort_unstable();
                img.dedup();
                return Ok(Some(img));
            }
            Decision::Absent => {}
            Decision::BudgetExceeded => return Err(Error::BudgetExceeded),
        }
    }
    Ok(None)
}

/// Decides whether every endomorphism of `a` is an automorphism, by
/// refuting a homomorphism into each induced substructure on one fewer
/// element.
pub fn is_core(a: &RelStructure, budget: &SearchBudget) -> Result<bool> {
    Ok(shrink_once(a, &budget.meter())?.is_none())
}

/// Computes the core of `a`. Among all minimum-size retracts the one on the
/// lexicographically least element set is returned.
pub fn core_of(a: &RelStructure, budget: &SearchBudget) -> Result<Core> {
    let meter = budget.meter();
    let mut elements: Vec<Elem> = (0..a.size() as Elem).collect();
    let mut current = a.clone();
    while let Some(img) = shrink_once(&current, &meter)? {
        elements = img.iter().map(|&i| elements[i as usize]).collect();
        current = a.induced(&elements)?;
    }
    let size = elements.len();
    for subset in Combinations::new(a.size(), size) {
        let sub = a.induced(&subset)?;
        let h = match find_hom_metered(a, &sub, &[], &meter)? {
            Decision::Found(h) => h,
            Decision::Absent => continue,
            Decision::BudgetExceeded => return Err(Error::BudgetExceeded),
        };
        // h restricted to the subset is an automorphism of the core; undo it.
        let restricted: Vec<Elem> = subset.iter().map(|&x| h.apply(x)).collect();
        let mut inverse = vec![0 as Elem; size];
        for (i, &img) in restricted.iter().enumerate() {
            inverse[img as usize] = i as Elem;
        }
        let map = h.map.iter().map(|&x| inverse[x as usize]).collect();
        let retraction = HomMap::new(size, map)?;
        if !is_hom(&retraction, a, &sub)? {
            return Err(Error::CrossCheck("core retraction is not a homomorphism".into()));
        }
        return Ok(Core {
            structure: sub,
            elements: subset,
            retraction,
        });
    }
    Err(Error::CrossCheck("no retract of the computed core size".into()))
}

/// Lexicographic k-subsets of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    current: Option<Vec<Elem>>,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k as Elem).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<Elem>;

    fn next(&mut self) -> Option<Vec<Elem>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if (next[i] as usize) < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Adds the unary relation `{a}` for every element `a`, named `c<a>`.
/// Elements that already have a singleton relation get no second one.
pub fn add_singletons(a: &RelStructure) -> RelStructure {
    let mut out = a.clone();
    for x in 0..a.size() as Elem {
        let present = out
            .relations()
            .iter()
            .any(|r| r.arity() == 1 && r.len() == 1 && r.tuple(0)[0] == x);
        if present {
            continue;
        }
        let mut name = format!("c{x}");
        while out.signature().position(&name).is_some() {
            name.push('_');
        }
        let rel = Relation::new(a.size(), 1, [[x]]).expect("singleton in range");
        out = out.with_relation(name, rel).expect("fresh name");
    }
    out
}
