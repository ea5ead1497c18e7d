//! CDCL SAT solver.
//!
//! Two watched literals with blockers for propagation, first-UIP conflict
//! analysis with local minimisation, non-chronological backjumping, VSIDS
//! decisions with phase saving, Luby restarts and activity-based learnt
//! clause deletion. Assumptions are decided first, one per level, so
//! clauses can be added between calls.

mod external;
mod heap;

pub use external::{external_solve, parse_solver_output};

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{CnfFormula, Lit};
use crate::error::{Error, Result};
use heap::VarHeap;

const LUBY_UNIT: u64 = 64;
const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;
const RANDOM_VAR_FREQ: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Sat,
    Unsat,
    /// The conflict budget ran out. Never to be read as `Unsat`.
    Unknown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learnt_clauses: u64,
}

impl fmt::Display for SolveStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "conflicts={}", self.conflicts)?;
        writeln!(f, "decisions={}", self.decisions)?;
        writeln!(f, "propagations={}", self.propagations)?;
        writeln!(f, "restarts={}", self.restarts)?;
        writeln!(f, "learnt_clauses={}", self.learnt_clauses)
    }
}

impl SolveStats {
    fn since(&self, earlier: &SolveStats) -> SolveStats {
        SolveStats {
            conflicts: self.conflicts - earlier.conflicts,
            decisions: self.decisions - earlier.decisions,
            propagations: self.propagations - earlier.propagations,
            restarts: self.restarts - earlier.restarts,
            learnt_clauses: self.learnt_clauses - earlier.learnt_clauses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Full assignment indexed by 0-based variable; present iff `Sat`.
    pub model: Option<Vec<bool>>,
    /// Work done by this call alone.
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        self.status == SolveStatus::Sat
    }

    pub fn is_unsat(&self) -> bool {
        self.status == SolveStatus::Unsat
    }
}

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Debug, Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: Lit,
}

enum Search {
    Sat,
    Unsat,
    Restart,
    Budget,
}

/// Incremental CDCL solver instance. Not shareable across threads; build one
/// instance per thread from the same formula instead.
#[derive(Debug, Clone)]
pub struct Solver {
    clauses: Vec<Clause>,
    learnts: Vec<u32>,
    // watches[l]: clauses currently watching literal l
    watches: Vec<Vec<Watch>>,
    // per variable: 1 true, -1 false, 0 unassigned
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    heap: VarHeap,
    var_inc: f64,
    cla_inc: f64,
    max_learnts: f64,
    ok: bool,
    randomized: bool,
    rng: ChaCha8Rng,
    conflict_budget: Option<u64>,
    stats: SolveStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            phase: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            heap: VarHeap::default(),
            var_inc: 1.0,
            cla_inc: 1.0,
            max_learnts: 0.0,
            ok: true,
            randomized: false,
            rng: ChaCha8Rng::seed_from_u64(0),
            conflict_budget: None,
            stats: SolveStats::default(),
        }
    }

    /// Loads every clause of `formula`.
    pub fn from_formula(formula: &CnfFormula) -> Solver {
        let mut s = Solver::new();
        s.reserve_vars(formula.num_vars as usize);
        for c in &formula.clauses {
            s.add_clause(c);
        }
        s
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    /// Number of original (non-learnt) clauses kept after simplification.
    pub fn num_clauses(&self) -> usize {
        self.clauses
            .iter()
            .filter(|c| !c.learnt && !c.deleted)
            .count()
    }

    /// Limits each solve call to this many conflicts; `None` removes the limit.
    pub fn set_conflict_budget(&mut self, budget: Option<u64>) {
        self.conflict_budget = budget;
    }

    /// Cumulative statistics over all calls.
    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    pub fn reserve_vars(&mut self, n: usize) {
        if n <= self.assigns.len() {
            return;
        }
        let old = self.assigns.len();
        self.assigns.resize(n, 0);
        self.level.resize(n, 0);
        self.reason.resize(n, None);
        self.phase.resize(n, false);
        self.activity.resize(n, 0.0);
        self.seen.resize(n, false);
        self.watches.resize_with(2 * n, Vec::new);
        self.heap.grow(n);
        for v in old..n {
            self.heap.insert(v, &self.activity);
        }
    }

    #[inline]
    fn value(&self, l: Lit) -> i8 {
        let v = self.assigns[l.var_index()];
        if l.is_negated() {
            -v
        } else {
            v
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// Adds a clause for all later solves. Duplicate literals are merged and
    /// tautologies dropped. An empty clause makes the instance unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) {
        if !self.ok {
            return;
        }
        debug_assert_eq!(self.decision_level(), 0);
        if let Some(max) = lits.iter().map(|l| l.var() as usize).max() {
            self.reserve_vars(max);
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return;
        }
        // Level-0 assignments are permanent.
        if c.iter().any(|&l| self.value(l) == 1) {
            return;
        }
        c.retain(|&l| self.value(l) == 0);
        match c.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(c, false);
            }
        }
    }

    /// Adds a clause given as signed DIMACS integers.
    pub fn add_clause_dimacs(&mut self, lits: &[i64]) -> Result<()> {
        let c = lits
            .iter()
            .map(|&v| Lit::from_dimacs(v))
            .collect::<Result<Vec<_>>>()?;
        self.add_clause(&c);
        Ok(())
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[lits[0].code()].push(Watch {
            cref,
            blocker: lits[1],
        });
        self.watches[lits[1].code()].push(Watch {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.learnts.push(cref);
            self.stats.learnt_clauses += 1;
        }
        cref
    }

    fn detach(&mut self, cref: u32) {
        let (a, b) = {
            let c = &self.clauses[cref as usize];
            (c.lits[0], c.lits[1])
        };
        self.watches[a.code()].retain(|w| w.cref != cref);
        self.watches[b.code()].retain(|w| w.cref != cref);
        let c = &mut self.clauses[cref as usize];
        c.deleted = true;
        c.lits = Vec::new();
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = l.var_index();
        debug_assert_eq!(self.assigns[v], 0);
        self.assigns[v] = if l.is_negated() { -1 } else { 1 };
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() && conflict.is_none() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut kept = 0;
            let mut i = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == 1 {
                    ws[kept] = w;
                    kept += 1;
                    continue;
                }
                let cref = w.cref as usize;
                let lits = &mut self.clauses[cref].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let first_value = {
                    let v = self.assigns[first.var_index()];
                    if first.is_negated() {
                        -v
                    } else {
                        v
                    }
                };
                if first != w.blocker && first_value == 1 {
                    ws[kept] = Watch {
                        cref: w.cref,
                        blocker: first,
                    };
                    kept += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    let l = lits[k];
                    let val = {
                        let v = self.assigns[l.var_index()];
                        if l.is_negated() {
                            -v
                        } else {
                            v
                        }
                    };
                    if val != -1 {
                        lits.swap(1, k);
                        self.watches[l.code()].push(Watch {
                            cref: w.cref,
                            blocker: first,
                        });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[kept] = w;
                kept += 1;
                if first_value == -1 {
                    conflict = Some(w.cref);
                    while i < ws.len() {
                        ws[kept] = ws[i];
                        kept += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(kept);
            self.watches[false_lit.code()] = ws;
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. Returns the learnt clause (asserting literal
    /// first, highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize) {
        let current = self.decision_level() as u32;
        let mut learnt: Vec<Lit> = vec![Lit::pos(1)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();

        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var_index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var_index()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            self.seen[lit.var_index()] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[lit.var_index()].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();

        // Drop literals implied by others already in the clause.
        let original = learnt.clone();
        let mut keep = 1;
        for k in 1..learnt.len() {
            let q = learnt[k];
            let redundant = match self.reason[q.var_index()] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|l| {
                    let v = l.var_index();
                    self.seen[v] || self.level[v] == 0
                }),
            };
            if !redundant {
                learnt[keep] = q;
                keep += 1;
            }
        }
        learnt.truncate(keep);
        for l in &original {
            self.seen[l.var_index()] = false;
        }

        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var_index()] > self.level[learnt[max_i].var_index()] {
                    max_i = k;
                }
            }
            learnt.swap(1, max_i);
            bt = self.level[learnt[1].var_index()] as usize;
        }
        (learnt, bt)
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for k in (lim..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var_index();
            self.assigns[v] = 0;
            self.reason[v] = None;
            self.phase[v] = !l.is_negated();
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        let mut next = None;
        if self.randomized && !self.heap.is_empty() && self.rng.random_bool(RANDOM_VAR_FREQ) {
            let v = self.rng.random_range(0..self.num_vars());
            if self.assigns[v] == 0 {
                next = Some(v);
            }
        }
        while next.is_none() {
            let v = self.heap.pop(&self.activity)?;
            if self.assigns[v] == 0 {
                next = Some(v);
            }
        }
        let v = next.unwrap();
        let value = if self.randomized {
            self.rng.random_bool(0.5)
        } else {
            self.phase[v]
        };
        Some(Lit::with_value(v as u32 + 1, value))
    }

    fn locked(&self, cref: u32) -> bool {
        let c = &self.clauses[cref as usize];
        let l = c.lits[0];
        self.value(l) == 1 && self.reason[l.var_index()] == Some(cref)
    }

    fn reduce_db(&mut self) {
        let mut learnts = std::mem::take(&mut self.learnts);
        learnts.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            let big_a = ca.lits.len() > 2;
            let big_b = cb.lits.len() > 2;
            big_b
                .cmp(&big_a)
                .then(ca.activity.total_cmp(&cb.activity))
                .then(a.cmp(&b))
        });
        let half = learnts.len() / 2;
        let limit = self.cla_inc / learnts.len().max(1) as f64;
        let mut kept = Vec::with_capacity(learnts.len());
        for (k, cref) in learnts.into_iter().enumerate() {
            let c = &self.clauses[cref as usize];
            let removable =
                c.lits.len() > 2 && !self.locked(cref) && (k < half || c.activity < limit);
            if removable {
                self.detach(cref);
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
    }

    fn search(
        &mut self,
        conflict_limit: u64,
        assumptions: &[Lit],
        budget_end: Option<u64>,
    ) -> Search {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Search::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let asserting = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(asserting, Some(cref));
                }
                self.var_inc /= VAR_DECAY;
                self.cla_inc /= CLAUSE_DECAY;
                if budget_end.is_some_and(|end| self.stats.conflicts >= end) {
                    return Search::Budget;
                }
            } else {
                if conflicts >= conflict_limit {
                    self.cancel_until(0);
                    return Search::Restart;
                }
                if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                }
                let mut next = None;
                while self.decision_level() < assumptions.len() {
                    let a = assumptions[self.decision_level()];
                    match self.value(a) {
                        1 => self.trail_lim.push(self.trail.len()),
                        -1 => return Search::Unsat,
                        _ => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(a) => a,
                    None => {
                        self.stats.decisions += 1;
                        match self.pick_branch() {
                            Some(l) => l,
                            None => return Search::Sat,
                        }
                    }
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, None);
            }
        }
    }

    fn run(&mut self, assumptions: &[Lit]) -> SolveOutcome {
        let before = self.stats;
        if let Some(max) = assumptions.iter().map(|l| l.var() as usize).max() {
            self.reserve_vars(max);
        }
        let finish = |s: &mut Solver, status: SolveStatus, model: Option<Vec<bool>>| {
            s.cancel_until(0);
            SolveOutcome {
                status,
                model,
                stats: s.stats.since(&before),
            }
        };
        if !self.ok {
            return finish(self, SolveStatus::Unsat, None);
        }
        if self.propagate().is_some() {
            self.ok = false;
            return finish(self, SolveStatus::Unsat, None);
        }
        self.max_learnts = (self.num_clauses() as f64 / 3.0).max(2000.0);
        let budget_end = self.conflict_budget.map(|b| self.stats.conflicts + b);
        let mut restart = 0u32;
        loop {
            let limit = luby(restart) * LUBY_UNIT;
            match self.search(limit, assumptions, budget_end) {
                Search::Sat => {
                    let model = self.assigns.iter().map(|&v| v == 1).collect();
                    return finish(self, SolveStatus::Sat, Some(model));
                }
                Search::Unsat => return finish(self, SolveStatus::Unsat, None),
                Search::Budget => return finish(self, SolveStatus::Unknown, None),
                Search::Restart => {
                    self.stats.restarts += 1;
                    self.max_learnts *= 1.05;
                    restart += 1;
                }
            }
        }
    }

    /// Decides the clause set under `assumptions`. `Unsat` is definitive for
    /// these assumptions.
    pub fn solve(&mut self, assumptions: &[Lit]) -> SolveOutcome {
        self.randomized = false;
        self.run(assumptions)
    }

    /// Like [`Solver::solve`], but decision order and polarity are drawn
    /// from a generator seeded with `seed`.
    pub fn solve_randomized(&mut self, assumptions: &[Lit], seed: u64) -> SolveOutcome {
        self.randomized = true;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        for a in &mut self.activity {
            *a = self.rng.random::<f64>();
        }
        self.var_inc = 1.0;
        let free: Vec<usize> = (0..self.num_vars())
            .filter(|&v| self.assigns[v] == 0)
            .collect();
        self.heap.rebuild(free.into_iter(), &self.activity);
        let out = self.run(assumptions);
        self.randomized = false;
        out
    }
}

/// `luby(i)`: 1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8, ...
pub fn luby(i: u32) -> u64 {
    let mut x = i as u64;
    let (mut size, mut seq) = (1u64, 0u32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1 << seq
}

/// Solves `formula` under `assumptions` with a fresh instance.
pub fn solve(formula: &CnfFormula, assumptions: &[Lit]) -> SolveOutcome {
    Solver::from_formula(formula).solve(assumptions)
}

/// Randomised solve with a fresh instance.
pub fn solve_randomized(formula: &CnfFormula, assumptions: &[Lit], seed: u64) -> SolveOutcome {
    Solver::from_formula(formula).solve_randomized(assumptions, seed)
}

/// Checks a solver answer against the formula with the independent clause
/// evaluator.
pub fn audit(formula: &CnfFormula, assumptions: &[Lit], outcome: &SolveOutcome) -> Result<()> {
    match (&outcome.status, &outcome.model) {
        (SolveStatus::Sat, Some(m)) => {
            if let Some(k) = formula.first_falsified(m) {
                return Err(Error::Internal(format!("model falsifies clause {k}")));
            }
            if let Some(a) = assumptions.iter().find(|a| !a.eval(m)) {
                return Err(Error::Internal(format!("model violates assumption {a}")));
            }
            Ok(())
        }
        (SolveStatus::Sat, None) => Err(Error::Internal("Sat without a model".into())),
        (_, Some(_)) => Err(Error::Internal(
            "model attached to a non-Sat outcome".into(),
        )),
        _ => Ok(()),
    }
}
