//! Congruence n-permutability and modularity through strong colorings, and
//! direct search for Hagemann–Mitschke chains.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::{Decision, Meter, SearchBudget};
use crate::clone::{projection, OperationTable};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::free::{find_coloring_metered, free_structure_metered, CloneSource, Coloring, FreeStructure};
use crate::identities::{find_operation_metered, H1IdentitySystem};
use crate::structures::{Elem, RelStructure};

/// The Day structure on four elements with the equivalences `12|34`,
/// `13|24` and `12|3|4`. Stored 0-based, printed 1-based.
pub struct DayFixture;

impl DayFixture {
    pub fn structure() -> RelStructure {
        fixtures::day_structure()
    }

    /// Blocks of an equivalence relation, 1-based, e.g. `12|34`.
    pub fn partition_label(a: &RelStructure, name: &str) -> Option<String> {
        let r = a.relation(name)?;
        let mut blocks: Vec<Vec<Elem>> = Vec::new();
        for x in 0..a.size() as Elem {
            if blocks.iter().any(|b| b.contains(&x)) {
                continue;
            }
            blocks.push((x..a.size() as Elem).filter(|&y| r.contains(&[x, y])).collect());
        }
        let parts: Vec<String> = blocks
            .iter()
            .map(|b| b.iter().map(|x| (x + 1).to_string()).collect())
            .collect();
        Some(parts.join("|"))
    }

    pub fn to_text() -> String {
        let d = Self::structure();
        let parts: Vec<String> = d
            .signature()
            .iter()
            .map(|(n, _)| format!("{n} = {}", Self::partition_label(&d, n).unwrap_or_default()))
            .collect();
        format!("({{1,2,3,4}}; {})", parts.join(", "))
    }
}

/// Ternary operations `p_1 … p_{n-1}` with `p_1(x,y,y) = x`,
/// `p_i(x,x,y) = p_{i+1}(x,y,y)` and `p_{n-1}(x,x,y) = y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HMChain {
    pub n: usize,
    pub ops: Vec<OperationTable>,
}

fn left(f: &OperationTable) -> OperationTable {
    f.minor(&[0, 1, 1], 2).expect("ternary")
}

fn right(f: &OperationTable) -> OperationTable {
    f.minor(&[0, 0, 1], 2).expect("ternary")
}

impl HMChain {
    pub fn verify(&self) -> bool {
        let Some(first) = self.ops.first() else {
            return false;
        };
        let d = first.domain_size();
        if self.n < 2 || self.ops.len() != self.n - 1 || self.ops.iter().any(|f| f.arity() != 3 || f.domain_size() != d)
        {
            return false;
        }
        let p1 = projection(d, 2, 1).expect("binary projection");
        let p2 = projection(d, 2, 2).expect("binary projection");
        left(first) == p1
            && right(self.ops.last().unwrap()) == p2
            && self.ops.windows(2).all(|w| right(&w[0]) == left(&w[1]))
    }
}

/// Searches the clone for a Hagemann–Mitschke chain of length `n`.
pub fn find_hagemann_mitschke(source: &CloneSource, n: usize, budget: &SearchBudget) -> Result<Decision<HMChain>> {
    hm_metered(source, n, &Arc::new(budget.meter()))
}

fn hm_metered(source: &CloneSource, n: usize, meter: &Arc<Meter>) -> Result<Decision<HMChain>> {
    if n < 2 {
        return Err(Error::invalid("Hagemann-Mitschke chains need n >= 2"));
    }
    let found = match source {
        CloneSource::Polymorphisms(a) => {
            let system = H1IdentitySystem::hagemann_mitschke(n)?;
            find_operation_metered(a, &system, meter)?.map(|mut asg| HMChain {
                n,
                ops: (1..n).map(|i| asg.remove(&format!("p{i}")).expect("declared symbol")).collect(),
            })
        }
        CloneSource::Generated(_) => match source.members(3, meter) {
            Ok(ternary) => chain_in(&ternary, n, source.domain_size()),
            Err(Error::BudgetExceeded) => Decision::BudgetExceeded,
            Err(e) => return Err(e),
        },
    };
    if let Decision::Found(chain) = &found {
        if !chain.verify() {
            return Err(Error::CrossCheck("Hagemann-Mitschke chain failed re-verification".into()));
        }
    }
    Ok(found)
}

/// Layered search over the ternary members: layer `i` holds the
/// candidates for `p_i` reachable from a valid `p_1`.
fn chain_in(ternary: &[OperationTable], n: usize, d: usize) -> Decision<HMChain> {
    let lefts: Vec<OperationTable> = ternary.iter().map(left).collect();
    let rights: Vec<OperationTable> = ternary.iter().map(right).collect();
    let p1 = projection(d, 2, 1).expect("binary projection");
    let p2 = projection(d, 2, 2).expect("binary projection");
    let mut by_left: HashMap<&OperationTable, Vec<usize>> = HashMap::new();
    for (i, l) in lefts.iter().enumerate() {
        by_left.entry(l).or_default().push(i);
    }
    let mut parent: Vec<HashMap<usize, usize>> = Vec::new();
    let mut layer: Vec<usize> = by_left.get(&p1).cloned().unwrap_or_default();
    parent.push(layer.iter().map(|&i| (i, usize::MAX)).collect());
    for _ in 1..n - 1 {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &i in &layer {
            for &j in by_left.get(&rights[i]).map(Vec::as_slice).unwrap_or(&[]) {
                next.entry(j).or_insert(i);
            }
        }
        let mut keys: Vec<usize> = next.keys().copied().collect();
        keys.sort_unstable();
        layer = keys;
        parent.push(next);
    }
    let Some(&last) = layer.iter().find(|&&i| rights[i] == p2) else {
        return Decision::Absent;
    };
    let mut ops = vec![last];
    for level in (1..parent.len()).rev() {
        let prev = parent[level][ops.last().unwrap()];
        ops.push(prev);
    }
    ops.reverse();
    Decision::Found(HMChain {
        n,
        ops: ops.into_iter().map(|i| ternary[i].clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Permutability {
    /// No strong `({0,1}; le)`-coloring. `chain` is the shortest
    /// Hagemann–Mitschke chain with `n <= 4`, if any.
    Permutable { chain: Option<HMChain> },
    NotPermutable { coloring: Coloring },
    BudgetExceeded,
}

pub const HM_CHAIN_CAP: usize = 4;

fn strong_coloring(source: &CloneSource, b: &RelStructure, meter: &Arc<Meter>) -> Result<Decision<(FreeStructure, Coloring)>> {
    let free = match free_structure_metered(source, b, meter) {
        Ok(f) => f,
        Err(Error::BudgetExceeded) => return Ok(Decision::BudgetExceeded),
        Err(e) => return Err(e),
    };
    Ok(find_coloring_metered(&free, true, meter)?.map(|c| (free, c)))
}

/// Whether the clone is congruence n-permutable for some n.
pub fn is_n_permutable_somewhere(source: &CloneSource, budget: &SearchBudget) -> Result<Permutability> {
    let meter = Arc::new(budget.meter());
    match strong_coloring(source, &fixtures::boolean_order(), &meter)? {
        Decision::Found((_, coloring)) => Ok(Permutability::NotPermutable { coloring }),
        Decision::BudgetExceeded => Ok(Permutability::BudgetExceeded),
        Decision::Absent => {
            for n in 2..=HM_CHAIN_CAP {
                match hm_metered(source, n, &meter)? {
                    Decision::Found(chain) => return Ok(Permutability::Permutable { chain: Some(chain) }),
                    Decision::Absent => {}
                    Decision::BudgetExceeded => break,
                }
            }
            Ok(Permutability::Permutable { chain: None })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modularity {
    /// No strong Day-coloring; the digest identifies the refuted instance
    /// (the lifted structure and the pinned generators).
    Modular { refutation_digest: String },
    NotModular { coloring: Coloring },
    BudgetExceeded,
}

/// SHA-256 of the lifted structure and the generator pins.
pub fn refutation_digest(free: &FreeStructure) -> String {
    let mut h = Sha256::new();
    h.update(free.lifted.to_json().as_bytes());
    h.update(serde_json::to_string(&free.generators_index).expect("indices serialize").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Whether the clone is congruence modular.
pub fn is_congruence_modular(source: &CloneSource, budget: &SearchBudget) -> Result<Modularity> {
    let meter = Arc::new(budget.meter());
    let free = match free_structure_metered(source, &DayFixture::structure(), &meter) {
        Ok(f) => f,
        Err(Error::BudgetExceeded) => return Ok(Modularity::BudgetExceeded),
        Err(e) => return Err(e),
    };
    Ok(match find_coloring_metered(&free, true, &meter)? {
        Decision::Found(coloring) => Modularity::NotModular { coloring },
        Decision::Absent => Modularity::Modular {
            refutation_digest: refutation_digest(&free),
        },
        Decision::BudgetExceeded => Modularity::BudgetExceeded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clone::{boolean, CloneGenSet};

    fn budget() -> SearchBudget {
        SearchBudget::default()
    }

    fn gen(ops: Vec<OperationTable>) -> CloneSource {
        CloneSource::Generated(CloneGenSet::new(2, ops).unwrap())
    }

    #[test]
    fn day_labels() {
        assert_eq!(
            DayFixture::to_text(),
            "({1,2,3,4}; alpha = 12|34, beta = 13|24, gamma = 12|3|4)"
        );
    }

    #[test]
    fn minority_is_maltsev() {
        let chain = find_hagemann_mitschke(&gen(vec![boolean::minority()]), 2, &budget())
            .unwrap()
            .found()
            .unwrap();
        assert_eq!(chain.ops, vec![boolean::minority()]);
        assert!(matches!(
            is_n_permutable_somewhere(&gen(vec![boolean::minority()]), &budget()).unwrap(),
            Permutability::Permutable { chain: Some(HMChain { n: 2, .. }) }
        ));
    }

    #[test]
    fn projections_and_lattices_have_no_chain() {
        for source in [gen(vec![]), gen(vec![boolean::min(), boolean::max()])] {
            for n in 2..=4 {
                assert!(find_hagemann_mitschke(&source, n, &budget()).unwrap().is_absent());
            }
            assert!(matches!(
                is_n_permutable_somewhere(&source, &budget()).unwrap(),
                Permutability::NotPermutable { .. }
            ));
        }
    }

    #[test]
    fn polymorphism_source_chain() {
        let a = fixtures::boolean_affine_with_constants();
        let chain = find_hagemann_mitschke(&CloneSource::Polymorphisms(a), 2, &budget())
            .unwrap()
            .found()
            .unwrap();
        assert!(chain.verify());
    }

    #[test]
    fn implication_chain_of_length_three() {
        let imp = |a: Elem, b: Elem| (1 - a) | b;
        let p1 = OperationTable::from_fn(2, 3, |v| imp(imp(v[2], v[1]), v[0])).unwrap();
        let p2 = OperationTable::from_fn(2, 3, |v| imp(imp(v[0], v[1]), v[2])).unwrap();
        let chain = HMChain { n: 3, ops: vec![p1.clone(), p2.clone()] };
        assert!(chain.verify());
        let swapped = HMChain { n: 3, ops: vec![p2.clone(), p1.clone()] };
        assert!(!swapped.verify());
        let found = find_hagemann_mitschke(&gen(vec![p1, p2]), 3, &budget()).unwrap().found().unwrap();
        assert!(found.verify());
    }

    #[test]
    fn modularity() {
        assert!(matches!(
            is_congruence_modular(&gen(vec![]), &budget()).unwrap(),
            Modularity::NotModular { .. }
        ));
        assert!(matches!(
            is_congruence_modular(&gen(vec![boolean::minority()]), &budget()).unwrap(),
            Modularity::Modular { .. }
        ));
    }
}
