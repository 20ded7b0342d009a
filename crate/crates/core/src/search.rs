//! Backtracking search with generalized arc consistency over table
//! constraints. Every decision procedure in the crate compiles down to this
//! kernel: homomorphisms, polymorphisms, identity-constrained tables and
//! colorings.

use std::collections::{HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::budget::{Decision, Meter};
use crate::structures::{Elem, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarOrder {
    /// Smallest domain first, ties broken by index.
    MinDomain,
    /// Index order; with ascending values this enumerates solutions in
    /// lexicographic order.
    Lexicographic,
}

#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub scope: Vec<u32>,
    pub rel: Arc<Relation>,
    /// Pairs of scope positions holding the same variable.
    repeats: Vec<(usize, usize)>,
}

impl Constraint {
    pub(crate) fn new(scope: Vec<u32>, rel: Arc<Relation>) -> Self {
        assert_eq!(scope.len(), rel.arity());
        let mut repeats = Vec::new();
        for i in 0..scope.len() {
            for j in i + 1..scope.len() {
                if scope[i] == scope[j] {
                    repeats.push((i, j));
                }
            }
        }
        Constraint {
            scope,
            rel,
            repeats,
        }
    }
}

/// A finite CSP: variables `0..num_vars`, values `0..num_values`.
#[derive(Debug, Clone)]
pub(crate) struct Csp {
    num_vars: usize,
    num_values: usize,
    words: usize,
    initial: Vec<u64>,
    constraints: Vec<Constraint>,
    var_cons: Vec<Vec<u32>>,
    all_different: bool,
    seen: HashSet<(usize, Vec<u32>)>,
}

impl Csp {
    pub(crate) fn new(num_vars: usize, num_values: usize) -> Self {
        let words = num_values.div_ceil(64).max(1);
        let mut initial = vec![0u64; num_vars * words];
        for v in 0..num_vars {
            for x in 0..num_values {
                initial[v * words + x / 64] |= 1 << (x % 64);
            }
        }
        Csp {
            num_vars,
            num_values,
            words,
            initial,
            constraints: Vec::new(),
            var_cons: vec![Vec::new(); num_vars],
            all_different: false,
            seen: HashSet::new(),
        }
    }

    pub(crate) fn set_all_different(&mut self) {
        self.all_different = true;
    }

    /// Restricts a variable's initial domain to `allowed`.
    pub(crate) fn restrict(&mut self, var: usize, allowed: impl Fn(Elem) -> bool) {
        for x in 0..self.num_values {
            if !allowed(x as Elem) {
                self.initial[var * self.words + x / 64] &= !(1 << (x % 64));
            }
        }
    }

    pub(crate) fn pin(&mut self, var: usize, value: Elem) {
        self.restrict(var, |x| x == value);
    }

    /// Adds a table constraint. Unary constraints become domain
    /// restrictions; exact duplicates are dropped.
    pub(crate) fn add(&mut self, scope: Vec<u32>, rel: &Arc<Relation>) {
        let id = Arc::as_ptr(rel) as usize;
        if scope.len() == 1 {
            let var = scope[0] as usize;
            self.restrict(var, |x| rel.contains(&[x]));
            return;
        }
        if !self.seen.insert((id, scope.clone())) {
            return;
        }
        let c = self.constraints.len() as u32;
        let mut vars: Vec<u32> = scope.clone();
        vars.sort_unstable();
        vars.dedup();
        for v in vars {
            self.var_cons[v as usize].push(c);
        }
        self.constraints.push(Constraint::new(scope, Arc::clone(rel)));
    }
}

pub(crate) enum Step {
    Solution(Vec<Elem>),
    Exhausted,
    OutOfBudget,
}

struct Frame {
    var: usize,
    untried: Vec<Elem>,
    mark: usize,
}

/// Resumable depth-first search over one [`Csp`].
pub(crate) struct Solver {
    csp: Arc<Csp>,
    order: VarOrder,
    dom: Vec<u64>,
    trail: Vec<(usize, u64)>,
    stack: Vec<Frame>,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    support: Vec<u64>,
    started: bool,
    done: bool,
}

impl Solver {
    pub(crate) fn new(csp: Arc<Csp>, order: VarOrder) -> Self {
        let dom = csp.initial.clone();
        let queued = vec![false; csp.constraints.len()];
        Solver {
            csp,
            order,
            dom,
            trail: Vec::new(),
            stack: Vec::new(),
            queue: VecDeque::new(),
            queued,
            support: Vec::new(),
            started: false,
            done: false,
        }
    }

    fn has(&self, var: usize, x: Elem) -> bool {
        let w = self.csp.words;
        self.dom[var * w + x as usize / 64] >> (x % 64) & 1 == 1
    }

    fn count(&self, var: usize) -> u32 {
        let w = self.csp.words;
        self.dom[var * w..(var + 1) * w]
            .iter()
            .map(|x| x.count_ones())
            .sum()
    }

    fn values(&self, var: usize) -> Vec<Elem> {
        (0..self.csp.num_values as Elem)
            .filter(|&x| self.has(var, x))
            .collect()
    }

    fn set_word(&mut self, idx: usize, value: u64) {
        self.trail.push((idx, self.dom[idx]));
        self.dom[idx] = value;
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (idx, old) = self.trail.pop().unwrap();
            self.dom[idx] = old;
        }
    }

    fn assign(&mut self, var: usize, x: Elem) {
        let w = self.csp.words;
        for k in 0..w {
            let want = if k == x as usize / 64 { 1u64 << (x % 64) } else { 0 };
            if self.dom[var * w + k] != want {
                self.set_word(var * w + k, want);
            }
        }
    }

    fn enqueue_var(&mut self, var: usize, skip: Option<u32>) {
        let csp = Arc::clone(&self.csp);
        for &c in &csp.var_cons[var] {
            if Some(c) != skip && !self.queued[c as usize] {
                self.queued[c as usize] = true;
                self.queue.push_back(c);
            }
        }
    }

    fn clear_queue(&mut self) {
        while let Some(c) = self.queue.pop_front() {
            self.queued[c as usize] = false;
        }
    }

    /// Removes `x` from every other variable. Returns false on a wipeout.
    fn alldiff_prune(&mut self, var: usize, x: Elem, fresh: &mut Vec<usize>) -> bool {
        let w = self.csp.words;
        let (word, bit) = (x as usize / 64, 1u64 << (x % 64));
        for other in 0..self.csp.num_vars {
            if other == var {
                continue;
            }
            let idx = other * w + word;
            if self.dom[idx] & bit != 0 {
                let before = self.count(other);
                self.set_word(idx, self.dom[idx] & !bit);
                if before == 1 {
                    return false;
                }
                if before == 2 {
                    fresh.push(other);
                }
                self.enqueue_var(other, None);
            }
        }
        true
    }

    fn revise(&mut self, c: usize) -> Option<Vec<usize>> {
        let csp = Arc::clone(&self.csp);
        let con = &csp.constraints[c];
        let w = csp.words;
        let k = con.scope.len();
        self.support.clear();
        self.support.resize(k * w, 0);
        'tuples: for t in con.rel.iter() {
            for (i, &x) in t.iter().enumerate() {
                let var = con.scope[i] as usize;
                if self.dom[var * w + x as usize / 64] >> (x % 64) & 1 == 0 {
                    continue 'tuples;
                }
            }
            for &(i, j) in &con.repeats {
                if t[i] != t[j] {
                    continue 'tuples;
                }
            }
            for (i, &x) in t.iter().enumerate() {
                self.support[i * w + x as usize / 64] |= 1 << (x % 64);
            }
        }
        let mut changed = Vec::new();
        for i in 0..k {
            let var = con.scope[i] as usize;
            let mut shrunk = false;
            let mut empty = true;
            for word in 0..w {
                let idx = var * w + word;
                let new = self.dom[idx] & self.support[i * w + word];
                if new != self.dom[idx] {
                    self.set_word(idx, new);
                    shrunk = true;
                }
                if new != 0 {
                    empty = false;
                }
            }
            if empty {
                return None;
            }
            if shrunk && !changed.contains(&var) {
                changed.push(var);
            }
        }
        Some(changed)
    }

    /// Runs arc consistency to a fixpoint starting from `seeds`.
    fn propagate(&mut self, seeds: &[usize], all: bool) -> bool {
        if all {
            for c in 0..self.csp.constraints.len() {
                if !self.queued[c] {
                    self.queued[c] = true;
                    self.queue.push_back(c as u32);
                }
            }
        }
        let mut fresh: Vec<usize> = Vec::new();
        for &v in seeds {
            self.enqueue_var(v, None);
            if self.csp.all_different && self.count(v) == 1 {
                fresh.push(v);
            }
        }
        if self.csp.all_different && all {
            fresh.extend((0..self.csp.num_vars).filter(|&v| self.count(v) == 1));
        }
        loop {
            while let Some(v) = fresh.pop() {
                let x = self.values(v)[0];
                if !self.alldiff_prune(v, x, &mut fresh) {
                    self.clear_queue();
                    return false;
                }
            }
            let Some(c) = self.queue.pop_front() else {
                break;
            };
            self.queued[c as usize] = false;
            match self.revise(c as usize) {
                None => {
                    self.clear_queue();
                    return false;
                }
                Some(changed) => {
                    for v in changed {
                        self.enqueue_var(v, Some(c));
                        if self.csp.all_different && self.count(v) == 1 {
                            fresh.push(v);
                        }
                    }
                }
            }
        }
        true
    }

    fn pick_var(&self) -> Option<usize> {
        match self.order {
            VarOrder::Lexicographic => (0..self.csp.num_vars).find(|&v| self.count(v) > 1),
            VarOrder::MinDomain => {
                let mut best: Option<(u32, usize)> = None;
                for v in 0..self.csp.num_vars {
                    let c = self.count(v);
                    if c > 1 && best.is_none_or(|(bc, _)| c < bc) {
                        best = Some((c, v));
                        if c == 2 {
                            break;
                        }
                    }
                }
                best.map(|(_, v)| v)
            }
        }
    }

    fn solution(&self) -> Vec<Elem> {
        (0..self.csp.num_vars).map(|v| self.values(v)[0]).collect()
    }

    /// Restricts the root to `var = value` before the search starts.
    pub(crate) fn fix_root(&mut self, var: usize, value: Elem) {
        debug_assert!(!self.started);
        self.assign(var, value);
    }

    /// Advances to the next solution. `stop` is polled at every node and
    /// ends the search as exhausted when it returns true.
    pub(crate) fn next(&mut self, meter: &Meter, stop: &dyn Fn() -> bool) -> Step {
        if self.done {
            return Step::Exhausted;
        }
        if !self.started {
            self.started = true;
            if self.csp.num_vars > 0 && (0..self.csp.num_vars).any(|v| self.count(v) == 0) {
                self.done = true;
                return Step::Exhausted;
            }
            if !self.propagate(&[], true) {
                self.done = true;
                return Step::Exhausted;
            }
            if !self.descend() {
                return Step::Solution(self.solution());
            }
        }
        loop {
            if stop() {
                self.done = true;
                return Step::Exhausted;
            }
            let Some(top) = self.stack.last_mut() else {
                self.done = true;
                return Step::Exhausted;
            };
            let Some(x) = top.untried.pop() else {
                let mark = top.mark;
                self.stack.pop();
                self.undo(mark);
                continue;
            };
            let (var, mark) = (top.var, top.mark);
            self.undo(mark);
            if !meter.tick() {
                self.done = true;
                return Step::OutOfBudget;
            }
            self.assign(var, x);
            if self.propagate(&[var], false) && !self.descend() {
                return Step::Solution(self.solution());
            }
        }
    }

    /// Pushes a frame for the next branching variable. Returns false when
    /// every variable is already fixed.
    fn descend(&mut self) -> bool {
        match self.pick_var() {
            None => {
                if self.stack.is_empty() {
                    // root solution: nothing left to branch on
                    self.done = true;
                }
                false
            }
            Some(var) => {
                let mut untried = self.values(var);
                untried.reverse();
                self.stack.push(Frame {
                    var,
                    untried,
                    mark: self.trail.len(),
                });
                true
            }
        }
    }
}

/// Finds one solution. With `meter.parallel_width > 1` the root branching
/// variable is split across worker threads; the returned witness is the one
/// from the lowest root branch, so the result does not depend on timing.
pub(crate) fn solve_first(csp: Csp, order: VarOrder, meter: &Meter) -> Decision<Vec<Elem>> {
    let csp = Arc::new(csp);
    let width = meter.parallel_width;
    if width <= 1 {
        return match Solver::new(Arc::clone(&csp), order).next(meter, &|| false) {
            Step::Solution(s) => Decision::Found(s),
            Step::Exhausted => Decision::Absent,
            Step::OutOfBudget => Decision::BudgetExceeded,
        };
    }
    // Determine the root branching variable after initial propagation.
    let mut probe = Solver::new(Arc::clone(&csp), order);
    probe.started = true;
    if (0..csp.num_vars).any(|v| probe.count(v) == 0) || !probe.propagate(&[], true) {
        return Decision::Absent;
    }
    let Some(root) = probe.pick_var() else {
        return Decision::Found(probe.solution());
    };
    let values = probe.values(root);
    let next = AtomicUsize::new(0);
    let best = AtomicUsize::new(usize::MAX);
    let results: Mutex<Vec<(usize, Step)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..width.min(values.len()) {
            scope.spawn(|| loop {
                let branch = next.fetch_add(1, Ordering::SeqCst);
                if branch >= values.len() || branch > best.load(Ordering::SeqCst) {
                    break;
                }
                let mut solver = Solver::new(Arc::clone(&csp), order);
                solver.fix_root(root, values[branch]);
                let stop = || best.load(Ordering::SeqCst) < branch;
                let step = solver.next(meter, &stop);
                if matches!(step, Step::Solution(_)) {
                    best.fetch_min(branch, Ordering::SeqCst);
                }
                results.lock().unwrap().push((branch, step));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(b, _)| *b);
    let mut out_of_budget = false;
    for (_, step) in results {
        match step {
            Step::Solution(s) => return Decision::Found(s),
            Step::OutOfBudget => out_of_budget = true,
            Step::Exhausted => {}
        }
    }
    if out_of_budget || results_incomplete(&next, values.len()) {
        Decision::BudgetExceeded
    } else {
        Decision::Absent
    }
}

fn results_incomplete(next: &AtomicUsize, branches: usize) -> bool {
    // Workers only stop early when a solution exists, which is handled
    // before this point; every branch index must have been claimed.
    next.load(Ordering::SeqCst) < branches
}

/// Lazily enumerates all solutions in search order.
pub(crate) struct SolutionIter {
    solver: Solver,
    meter: Arc<Meter>,
    finished: bool,
}

impl SolutionIter {
    pub(crate) fn new(csp: Csp, order: VarOrder, meter: Arc<Meter>) -> Self {
        SolutionIter {
            solver: Solver::new(Arc::new(csp), order),
            meter,
            finished: false,
        }
    }
}

impl Iterator for SolutionIter {
    type Item = Result<Vec<Elem>, crate::Error>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.solver.next(&self.meter, &|| false) {
            Step::Solution(s) => Some(Ok(s)),
            Step::Exhausted => {
                self.finished = true;
                None
            }
            Step::OutOfBudget => {
                self.finished = true;
                Some(Err(crate::Error::BudgetExceeded))
            }
        }
    }
}
