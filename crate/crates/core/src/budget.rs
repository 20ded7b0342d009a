use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Limits for a single top-level operation. Every search started on behalf
/// of that operation draws from the same node and time allowance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub node_limit: u64,
    pub time_limit: Duration,
    pub parallel_width: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            node_limit: u64::MAX,
            time_limit: Duration::from_secs(24 * 3600),
            parallel_width: 1,
        }
    }
}

impl SearchBudget {
    pub fn new(node_limit: u64, time_limit: Duration, parallel_width: usize) -> Result<Self> {
        if node_limit == 0 || time_limit.is_zero() || parallel_width == 0 {
            return Err(Error::invalid("budget limits must be positive"));
        }
        Ok(SearchBudget {
            node_limit,
            time_limit,
            parallel_width,
        })
    }

    pub fn with_nodes(mut self, node_limit: u64) -> Self {
        self.node_limit = node_limit.max(1);
        self
    }

    pub fn with_parallel(mut self, width: usize) -> Self {
        self.parallel_width = width.max(1);
        self
    }

    pub fn with_time(mut self, limit: Duration) -> Self {
        if !limit.is_zero() {
            self.time_limit = limit;
        }
        self
    }

    pub(crate) fn meter(&self) -> Meter {
        Meter::new(self)
    }
}

/// Shared consumption counter for one budget.
#[derive(Debug)]
pub(crate) struct Meter {
    node_limit: u64,
    deadline: Option<Instant>,
    pub(crate) parallel_width: usize,
    nodes: AtomicU64,
    exhausted: AtomicBool,
}

impl Meter {
    pub(crate) fn new(budget: &SearchBudget) -> Self {
        Meter {
            node_limit: budget.node_limit,
            deadline: Instant::now().checked_add(budget.time_limit),
            parallel_width: budget.parallel_width.max(1),
            nodes: AtomicU64::new(0),
            exhausted: AtomicBool::new(false),
        }
    }

    /// Records one search node. Returns false once the budget is spent.
    pub(crate) fn tick(&self) -> bool {
        if self.exhausted.load(Ordering::Relaxed) {
            return false;
        }
        let used = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if used > self.node_limit {
            self.exhausted.store(true, Ordering::Relaxed);
            return false;
        }
        if used % 256 == 0 {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.exhausted.store(true, Ordering::Relaxed);
                    return false;
                }
            }
        }
        true
    }

    /// Charges `amount` units of non-search work (closure steps and the like).
    pub(crate) fn charge(&self, amount: u64) -> Result<()> {
        if self.exhausted.load(Ordering::Relaxed) {
            return Err(Error::BudgetExceeded);
        }
        let used = self.nodes.fetch_add(amount, Ordering::Relaxed) + amount;
        let late = self.deadline.is_some_and(|d| Instant::now() >= d);
        if used > self.node_limit || late {
            self.exhausted.store(true, Ordering::Relaxed);
            return Err(Error::BudgetExceeded);
        }
        Ok(())
    }
}

/// Outcome of a search. `Absent` is only produced by a completed exhaustive
/// refutation; running out of budget is reported separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision<T> {
    Found(T),
    Absent,
    BudgetExceeded,
}

impl<T> Decision<T> {
    pub fn is_found(&self) -> bool {
        matches!(self, Decision::Found(_))
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, Decision::Absent)
    }

    pub fn found(self) -> Option<T> {
        match self {
            Decision::Found(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_ref(&self) -> Decision<&T> {
        match self {
            Decision::Found(t) => Decision::Found(t),
            Decision::Absent => Decision::Absent,
            Decision::BudgetExceeded => Decision::BudgetExceeded,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Decision<U> {
        match self {
            Decision::Found(t) => Decision::Found(f(t)),
            Decision::Absent => Decision::Absent,
            Decision::BudgetExceeded => Decision::BudgetExceeded,
        }
    }
}

/// Capacity limits for materialized objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest `base^arity` for which a relation keeps a membership bitset.
    pub bitset_cells: u64,
    /// Largest domain a power structure may have.
    pub power_domain: u64,
    /// Largest number of tuples materialized for a single relation.
    pub relation_tuples: u64,
    /// Largest operation table (`domain_size^arity` cells).
    pub table_cells: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            bitset_cells: 1 << 24,
            power_domain: 1_000_000,
            relation_tuples: 1 << 24,
            table_cells: 1 << 20,
        }
    }
}

pub(crate) fn checked_pow(base: u64, exp: u64) -> Option<u64> {
    let exp = u32::try_from(exp).ok()?;
    base.checked_pow(exp)
}
