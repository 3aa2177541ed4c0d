//! θ-subsumption between conjunctions of atoms, with search budgets.
//!
//! `A` θ-subsumes `B` iff there is a substitution θ over the non-frozen
//! variables of `A` with `Aθ ⊆ B`, where the non-frozen variables of `B` are
//! read as fresh (skolem) constants, frozen variables only match themselves
//! and constants only match identical constants.  The check is NP-complete,
//! so the matcher backtracks with a most-constrained-first atom order over a
//! per-predicate index of `B` and gives up once a budget is spent.  A blown
//! budget degrades conservatively: callers treat it as "no subsumption", so
//! a redundancy can be missed but never invented.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, PredicateGroup, Term};

/// Limits for a single subsumption call.
#[derive(Debug, Clone)]
pub struct SearchBudget {
    max_backtracks: u64,
    per_call: Duration,
}

impl SearchBudget {
    pub fn new(max_backtracks: u64, per_call: Duration) -> Result<SearchBudget> {
        if max_backtracks == 0 || per_call.is_zero() {
            return Err(Error::Invariant(
                "search budget limits must be strictly positive".to_string(),
            ));
        }
        Ok(SearchBudget {
            max_backtracks,
            per_call,
        })
    }

    pub fn max_backtracks(&self) -> u64 {
        self.max_backtracks
    }

    pub fn per_call(&self) -> Duration {
        self.per_call
    }
}

impl Default for SearchBudget {
    fn default() -> SearchBudget {
        SearchBudget {
            max_backtracks: 1_000_000,
            per_call: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsumeResult {
    Subsumes,
    NotSubsumes,
    /// The search gave up; the truth is unknown.
    BudgetExceeded,
}

impl SubsumeResult {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubsumeResult::Subsumes => "true",
            SubsumeResult::NotSubsumes => "false",
            SubsumeResult::BudgetExceeded => "budget_exceeded",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SubsumeOutcome {
    pub result: SubsumeResult,
    pub backtracks: u64,
}

struct Matcher<'a> {
    a: &'a [Atom],
    b: &'a [Atom],
    frozen: &'a HashSet<String>,
    by_pred: HashMap<(&'a str, usize), Vec<usize>>,
    budget: &'a SearchBudget,
    started: Instant,
    backtracks: u64,
    ticks: u32,
}

enum Verdict {
    Found,
    Exhausted,
    GaveUp,
}

impl<'a> Matcher<'a> {
    fn new(a: &'a [Atom], b: &'a [Atom], frozen: &'a HashSet<String>, budget: &'a SearchBudget) -> Matcher<'a> {
        let mut by_pred: HashMap<(&str, usize), Vec<usize>> = HashMap::new();
        for (i, atom) in b.iter().enumerate() {
            by_pred
                .entry((atom.predicate(), atom.arity()))
                .or_default()
                .push(i);
        }
        Matcher {
            a,
            b,
            frozen,
            by_pred,
            budget,
            started: Instant::now(),
            backtracks: 0,
            ticks: 0,
        }
    }

    /// Extension of `theta` that maps `a` onto `b`, or None.  θ values are
    /// terms of the B side, where a variable stands for its skolem constant
    /// (or for itself if frozen).
    fn try_match(
        &self,
        a: &Atom,
        b: &Atom,
        theta: &HashMap<String, Term>,
    ) -> Option<Vec<(String, Term)>> {
        let mut extension: Vec<(String, Term)> = Vec::new();
        for (ta, tb) in a.args().iter().zip(b.args()) {
            match ta {
                Term::Constant(_) => {
                    if ta != tb {
                        return None;
                    }
                }
                Term::Variable(v) if self.frozen.contains(v) => {
                    if ta != tb {
                        return None;
                    }
                }
                Term::Variable(v) => {
                    let bound = theta
                        .get(v)
                        .or_else(|| extension.iter().find(|(n, _)| n == v).map(|(_, t)| t));
                    match bound {
                        Some(t) => {
                            if t != tb {
                                return None;
                            }
                        }
                        None => extension.push((v.clone(), tb.clone())),
                    }
                }
            }
        }
        Some(extension)
    }

    fn candidates(&self, a: &Atom, theta: &HashMap<String, Term>) -> Vec<(usize, Vec<(String, Term)>)> {
        match self.by_pred.get(&(a.predicate(), a.arity())) {
            None => Vec::new(),
            Some(ids) => ids
                .iter()
                .filter_map(|&j| self.try_match(a, &self.b[j], theta).map(|ext| (j, ext)))
                .collect(),
        }
    }

    fn out_of_time(&mut self) -> bool {
        self.ticks += 1;
        if self.ticks & 0x3f == 0 && self.started.elapsed() > self.budget.per_call() {
            return true;
        }
        false
    }

    fn solve(&mut self, unmatched: &mut Vec<usize>, theta: &mut HashMap<String, Term>) -> Verdict {
        if unmatched.is_empty() {
            return Verdict::Found;
        }

        // Most-constrained-first: expand the atom with the fewest candidates.
        let mut best: Option<(usize, Vec<(usize, Vec<(String, Term)>)>)> = None;
        for (slot, &i) in unmatched.iter().enumerate() {
            let cands = self.candidates(&self.a[i], theta);
            let better = match &best {
                None => true,
                Some((_, b)) => cands.len() < b.len(),
            };
            if better {
                let empty = cands.is_empty();
                best = Some((slot, cands));
                if empty {
                    break;
                }
            }
        }
        let (slot, cands) = best.unwrap();
        if cands.is_empty() {
            return Verdict::Exhausted;
        }

        let picked = unmatched.swap_remove(slot);
        for (_, extension) in cands {
            if self.out_of_time() {
                unmatched.push(picked);
                return Verdict::GaveUp;
            }
            for (v, t) in &extension {
                theta.insert(v.clone(), t.clone());
            }
            match self.solve(unmatched, theta) {
                Verdict::Found => return Verdict::Found,
                Verdict::GaveUp => {
                    for (v, _) in &extension {
                        theta.remove(v);
                    }
                    unmatched.push(picked);
                    return Verdict::GaveUp;
                }
                Verdict::Exhausted => {
                    for (v, _) in &extension {
                        theta.remove(v);
                    }
                    self.backtracks += 1;
                    if self.backtracks > self.budget.max_backtracks() {
                        unmatched.push(picked);
                        return Verdict::GaveUp;
                    }
                }
            }
        }
        unmatched.push(picked);
        Verdict::Exhausted
    }
}

/// Decide whether `a` θ-subsumes `b` with `frozen` variables pinned.
pub fn theta_subsumes(
    a: &[Atom],
    b: &[Atom],
    frozen: &HashSet<String>,
    budget: &SearchBudget,
) -> SubsumeOutcome {
    let mut matcher = Matcher::new(a, b, frozen, budget);
    let mut unmatched: Vec<usize> = (0..a.len()).collect();
    let mut theta = HashMap::new();
    let result = match matcher.solve(&mut unmatched, &mut theta) {
        Verdict::Found => SubsumeResult::Subsumes,
        Verdict::Exhausted => SubsumeResult::NotSubsumes,
        Verdict::GaveUp => SubsumeResult::BudgetExceeded,
    };
    SubsumeOutcome {
        result,
        backtracks: matcher.backtracks,
    }
}

#[derive(Debug, Clone)]
pub struct ReducedClause {
    pub clause: Clause,
    /// Removals skipped because the subsumption check blew its budget.
    pub budget_skips: u64,
}

/// Remove redundant atoms from a clause body: an atom may go when the full
/// body still θ-subsumes the shortened one (head variables frozen), which
/// keeps the clause logically equivalent.  Greedy, in body order, repeated
/// to a fixpoint.  A blown budget keeps the atom.
pub fn clause_reduction(c: &Clause, budget: &SearchBudget) -> ReducedClause {
    let frozen = c.head_vars();
    let mut body = c.body().to_vec();
    let mut budget_skips = 0u64;
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < body.len() {
            let mut shorter = body.clone();
            shorter.remove(i);
            match theta_subsumes(&body, &shorter, &frozen, budget).result {
                SubsumeResult::Subsumes => {
                    body = shorter;
                    changed = true;
                }
                SubsumeResult::NotSubsumes => i += 1,
                SubsumeResult::BudgetExceeded => {
                    budget_skips += 1;
                    i += 1;
                }
            }
        }
        if !changed {
            break;
        }
    }
    ReducedClause {
        clause: c.with_body(body),
        budget_skips,
    }
}

/// One cell of the subsumption matrix.
#[derive(Debug, Clone, Copy)]
pub struct SmCell {
    pub subsumes: bool,
    pub exceeded: bool,
    pub backtracks: u64,
}

/// Dense boolean matrix over canonical group keys: `cell(i, j)` answers
/// "does group i θ-subsume group j?".  Cells whose search gave up are
/// recorded as `false` with `exceeded` set.
#[derive(Debug, Clone)]
pub struct SubsumptionMatrix {
    keys: Vec<String>,
    index: HashMap<String, usize>,
    cells: Vec<SmCell>,
}

impl SubsumptionMatrix {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn cell(&self, i: usize, j: usize) -> SmCell {
        self.cells[i * self.keys.len() + j]
    }

    pub fn subsumes(&self, i: usize, j: usize) -> bool {
        self.cell(i, j).subsumes
    }

    /// Number of cells whose search blew its budget.
    pub fn exceeded_count(&self) -> u64 {
        self.cells.iter().filter(|c| c.exceeded).count() as u64
    }

    /// Dump every cell as CSV (`key_i,key_j,result,backtracks`), keys quoted.
    pub fn write_diagnostics_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        fn quote(s: &str) -> String {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        writeln!(out, "key_i,key_j,result,backtracks")?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let cell = self.cell(i, j);
                let result = if cell.exceeded {
                    SubsumeResult::BudgetExceeded
                } else if cell.subsumes {
                    SubsumeResult::Subsumes
                } else {
                    SubsumeResult::NotSubsumes
                };
                writeln!(
                    out,
                    "{},{},{},{}",
                    quote(&self.keys[i]),
                    quote(&self.keys[j]),
                    result.as_str(),
                    cell.backtracks
                )?;
            }
        }
        Ok(())
    }
}

/// A deadline for a whole run, as opposed to the per-call `SearchBudget`.
#[derive(Debug, Clone, Copy)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Deadline {
        Deadline(None)
    }

    pub fn after(d: Duration) -> Deadline {
        Deadline(Some(Instant::now() + d))
    }

    pub fn exceeded(&self) -> bool {
        matches!(self.0, Some(t) if Instant::now() > t)
    }
}

/// Build the full pairwise subsumption matrix over deduplicated groups.
/// `groups` must carry distinct canonical keys (one entry per key).
pub fn build_sm(
    groups: &[PredicateGroup],
    frozen: &HashSet<String>,
    budget: &SearchBudget,
    deadline: Deadline,
) -> Result<SubsumptionMatrix> {
    let started = Instant::now();
    let n = groups.len();
    let mut index = HashMap::with_capacity(n);
    for (i, g) in groups.iter().enumerate() {
        if index.insert(g.canonical_key().to_string(), i).is_some() {
            return Err(Error::Invariant(format!(
                "duplicate canonical key in group list: {}",
                g.canonical_key()
            )));
        }
    }

    let mut cells = Vec::with_capacity(n * n);
    for gi in groups {
        for gj in groups {
            if deadline.exceeded() {
                return Err(Error::BudgetExhausted {
                    phase: crate::error::Phase::SubsumptionMatrix,
                    elapsed: started.elapsed(),
                    progress: crate::error::PartialProgress::default(),
                });
            }
            let outcome = theta_subsumes(gi.atoms(), gj.atoms(), frozen, budget);
            cells.push(SmCell {
                subsumes: outcome.result == SubsumeResult::Subsumes,
                exceeded: outcome.result == SubsumeResult::BudgetExceeded,
                backtracks: outcome.backtracks,
            });
        }
    }

    Ok(SubsumptionMatrix {
        keys: groups.iter().map(|g| g.canonical_key().to_string()).collect(),
        index,
        cells,
    })
}
