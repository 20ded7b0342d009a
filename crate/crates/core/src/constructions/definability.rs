//! pp-definability through polymorphisms: a relation with `m` tuples is
//! pp-definable iff every `m`-ary polymorphism preserves it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::budget::{Decision, Limits, Meter, SearchBudget};
use crate::clone::{preserves, preserves_all, OperationTable};
use crate::error::{Error, Result};
use crate::hom::{hom_csp, Combinations};
use crate::search::{solve_first, VarOrder};
use crate::structures::{power_structure, Elem, RelStructure, Relation, TupleCoding};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definability {
    /// No polymorphism of arity `checked_arity` violates the relation.
    /// `complete` is set when that arity reaches the number of tuples, in
    /// which case the relation is pp-definable.
    Definable { complete: bool, checked_arity: usize },
    /// A polymorphism that maps `arguments` (tuples of the relation) to a
    /// tuple outside it.
    NotDefinable {
        witness: OperationTable,
        arguments: Vec<Vec<Elem>>,
    },
    BudgetExceeded,
}

pub const DEFAULT_CAP: usize = 4;

/// [`is_pp_definable_with_cap`] with the default cap of 4.
pub fn is_pp_definable(a: &RelStructure, r: &Relation, budget: &SearchBudget) -> Result<Definability> {
    is_pp_definable_with_cap(a, r, DEFAULT_CAP, budget)
}

/// Searches for a polymorphism of `a` of arity `min(|r|, cap)` violating
/// `r`. Above the cap every `cap`-subset of `r` is tried as argument list.
pub fn is_pp_definable_with_cap(
    a: &RelStructure,
    r: &Relation,
    cap: usize,
    budget: &SearchBudget,
) -> Result<Definability> {
    if r.base() != a.size() {
        return Err(Error::invalid("candidate relation is over a different domain"));
    }
    if cap == 0 {
        return Err(Error::invalid("arity cap must be positive"));
    }
    let m = r.len().min(cap);
    if m == 0 {
        return Ok(Definability::Definable {
            complete: true,
            checked_arity: 0,
        });
    }
    let meter = budget.meter();
    let power = power_structure(a, m)?;
    let complement = Arc::new(r.complement(&Limits::default())?);
    for subset in Combinations::new(r.len(), m) {
        let args: Vec<Vec<Elem>> = subset.iter().map(|&i| r.tuple(i as usize).to_vec()).collect();
        match violator(a, &power, r, &complement, &args, &meter)? {
            Decision::Found(witness) => {
                return Ok(Definability::NotDefinable {
                    witness,
                    arguments: args,
                })
            }
            Decision::Absent => {}
            Decision::BudgetExceeded => return Ok(Definability::BudgetExceeded),
        }
    }
    Ok(Definability::Definable {
        complete: m == r.len(),
        checked_arity: m,
    })
}

fn violator(
    a: &RelStructure,
    power: &RelStructure,
    r: &Relation,
    complement: &Arc<Relation>,
    args: &[Vec<Elem>],
    meter: &Meter,
) -> Result<Decision<OperationTable>> {
    let m = args.len();
    let coding = TupleCoding::new(a.size(), m)?;
    let cells: Vec<u32> = (0..r.arity())
        .map(|j| {
            let column: Vec<Elem> = args.iter().map(|t| t[j]).collect();
            coding.encode(&column) as u32
        })
        .collect();
    let mut csp = hom_csp(power, a)?;
    csp.add(cells, complement);
    match solve_first(csp, VarOrder::MinDomain, meter) {
        Decision::Found(table) => {
            let f = OperationTable::new(a.size(), m, table)?;
            if !preserves_all(&f, a) || preserves(&f, r) {
                return Err(Error::CrossCheck("violating polymorphism failed re-verification".into()));
            }
            Ok(Decision::Found(f))
        }
        Decision::Absent => Ok(Decision::Absent),
        Decision::BudgetExceeded => Ok(Decision::BudgetExceeded),
    }
}
