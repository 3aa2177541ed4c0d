//! Ground fact storage and coverage of example sets by clause bodies.
//!
//! `satisfies` answers existential conjunctive queries against an indexed
//! fact base; coverage sets are fixed-width bitsets over example ids.  A
//! predicate absent from the fact base denotes an empty relation, so bodies
//! mentioning it are simply unsatisfiable (callers may warn, it is not an
//! error).

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::logic::{Atom, PredicateGroup, Term};

/// Fixed-width bitset over example ids.
#[derive(Clone, PartialEq, Eq)]
pub struct CoverageSet {
    width: usize,
    words: Vec<u64>,
}

impl CoverageSet {
    pub fn empty(width: usize) -> CoverageSet {
        CoverageSet {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn full(width: usize) -> CoverageSet {
        let mut s = CoverageSet {
            width,
            words: vec![!0u64; width.div_ceil(64)],
        };
        s.mask_tail();
        s
    }

    fn mask_tail(&mut self) {
        let tail = self.width % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.width, "bit {i} out of range for width {}", self.width);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.width, "bit {i} out of range for width {}", self.width);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn check_width(&self, other: &CoverageSet) {
        assert_eq!(
            self.width, other.width,
            "coverage sets have different widths"
        );
    }

    pub fn and(&self, other: &CoverageSet) -> CoverageSet {
        self.check_width(other);
        CoverageSet {
            width: self.width,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn or_with(&mut self, other: &CoverageSet) {
        self.check_width(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Bits set in `self` but not in `other`.
    pub fn minus(&self, other: &CoverageSet) -> CoverageSet {
        self.check_width(other);
        CoverageSet {
            width: self.width,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&i| self.get(i))
    }
}

impl fmt::Debug for CoverageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoverageSet[{}; ", self.width)?;
        f.debug_set().entries(self.ones()).finish()?;
        f.write_str("]")
    }
}

/// An immutable, indexed set of ground atoms.
#[derive(Debug, Clone)]
pub struct FactBase {
    facts: Vec<Atom>,
    membership: HashSet<Atom>,
    by_pred: HashMap<(String, usize), Vec<usize>>,
    /// (predicate, arity, arg position, constant) -> fact ids
    by_arg: HashMap<(String, usize, usize, String), Vec<usize>>,
}

impl FactBase {
    /// Build from ground atoms; duplicates are silently dropped.
    pub fn new(atoms: Vec<Atom>) -> Result<FactBase> {
        let mut fb = FactBase {
            facts: Vec::new(),
            membership: HashSet::new(),
            by_pred: HashMap::new(),
            by_arg: HashMap::new(),
        };
        for atom in atoms {
            if !atom.is_ground() {
                return Err(Error::Invariant(format!(
                    "fact base requires ground atoms, found {atom}"
                )));
            }
            if fb.membership.contains(&atom) {
                continue;
            }
            let id = fb.facts.len();
            fb.by_pred
                .entry((atom.predicate().to_string(), atom.arity()))
                .or_default()
                .push(id);
            for (pos, arg) in atom.args().iter().enumerate() {
                fb.by_arg
                    .entry((
                        atom.predicate().to_string(),
                        atom.arity(),
                        pos,
                        arg.name().to_string(),
                    ))
                    .or_default()
                    .push(id);
            }
            fb.membership.insert(atom.clone());
            fb.facts.push(atom);
        }
        Ok(fb)
    }

    pub fn facts(&self) -> &[Atom] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.membership.contains(atom)
    }

    pub fn has_predicate(&self, predicate: &str, arity: usize) -> bool {
        self.by_pred
            .contains_key(&(predicate.to_string(), arity))
    }

    /// Distinct constants appearing anywhere in the fact base, sorted.
    pub fn constants(&self) -> Vec<String> {
        let mut set: HashSet<&str> = HashSet::new();
        for fact in &self.facts {
            for arg in fact.args() {
                set.insert(arg.name());
            }
        }
        let mut out: Vec<String> = set.into_iter().map(String::from).collect();
        out.sort();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Pos,
    Neg,
}

/// Ordered labeled ground instances of the target predicate; an example's id
/// is its position.
#[derive(Debug, Clone)]
pub struct ExampleSet {
    items: Vec<(Atom, Label)>,
}

impl ExampleSet {
    /// Build from already-deduplicated atom lists (the parser dedups within
    /// each file and warns).  An atom in both lists is a labeling conflict.
    pub fn new(pos: Vec<Atom>, neg: Vec<Atom>) -> Result<ExampleSet> {
        let mut seen: HashMap<Atom, Label> = HashMap::new();
        let mut items = Vec::with_capacity(pos.len() + neg.len());
        for (atoms, label) in [(pos, Label::Pos), (neg, Label::Neg)] {
            for atom in atoms {
                if !atom.is_ground() {
                    return Err(Error::Invariant(format!(
                        "examples must be ground, found {atom}"
                    )));
                }
                match seen.get(&atom) {
                    Some(&prev) if prev != label => {
                        return Err(Error::ConflictingExample {
                            atom: atom.to_string(),
                        })
                    }
                    Some(_) => continue,
                    None => {
                        seen.insert(atom.clone(), label);
                        items.push((atom, label));
                    }
                }
            }
        }
        if let Some(((first, _), conflict)) = items.split_first().and_then(|(first, rest)| {
            rest.iter()
                .find(|(a, _)| {
                    a.predicate() != first.0.predicate() || a.arity() != first.0.arity()
                })
                .map(|c| (first, c))
        }) {
            return Err(Error::Invariant(format!(
                "examples mix predicates: {} vs {}",
                first, conflict.0
            )));
        }
        Ok(ExampleSet { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.items[i].0
    }

    pub fn label(&self, i: usize) -> Label {
        self.items[i].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Atom, Label)> {
        self.items.iter()
    }

    pub fn pos_count(&self) -> usize {
        self.items.iter().filter(|(_, l)| *l == Label::Pos).count()
    }

    pub fn neg_count(&self) -> usize {
        self.len() - self.pos_count()
    }
}

/// Bind the head pattern's variables to a ground instance's constants.
pub fn head_binding(head: &Atom, instance: &Atom) -> Result<HashMap<String, String>> {
    if head.predicate() != instance.predicate() || head.arity() != instance.arity() {
        return Err(Error::Invariant(format!(
            "instance {instance} does not match head {head}"
        )));
    }
    if !instance.is_ground() {
        return Err(Error::Invariant(format!(
            "head instance must be ground, found {instance}"
        )));
    }
    let mut binding = HashMap::with_capacity(head.arity());
    for (h, t) in head.args().iter().zip(instance.args()) {
        match h {
            Term::Variable(v) => {
                binding.insert(v.clone(), t.name().to_string());
            }
            Term::Constant(_) => {
                return Err(Error::Invariant(format!(
                    "head pattern {head} must consist of variables"
                )))
            }
        }
    }
    Ok(binding)
}

/// Argument of a body atom after applying the current variable bindings.
enum Slot {
    Fixed(String),
    Open(String),
}

fn resolve(atom: &Atom, bound: &HashMap<String, String>) -> Vec<Slot> {
    atom.args()
        .iter()
        .map(|t| match t {
            Term::Constant(n) => Slot::Fixed(n.clone()),
            Term::Variable(v) => match bound.get(v) {
                Some(c) => Slot::Fixed(c.clone()),
                None => Slot::Open(v.clone()),
            },
        })
        .collect()
}

/// Fact ids worth scanning for `atom` under the current bindings: the
/// shortest per-argument index list if any argument is fixed, otherwise all
/// facts of the predicate.  `None` means the predicate is absent entirely.
fn candidate_ids<'a>(fb: &'a FactBase, atom: &Atom, slots: &[Slot]) -> Option<&'a [usize]> {
    let pred_key = (atom.predicate().to_string(), atom.arity());
    let all = fb.by_pred.get(&pred_key)?;
    let mut best: Option<&[usize]> = None;
    for (pos, slot) in slots.iter().enumerate() {
        if let Slot::Fixed(c) = slot {
            let key = (
                atom.predicate().to_string(),
                atom.arity(),
                pos,
                c.to_string(),
            );
            let ids = fb.by_arg.get(&key).map(|v| v.as_slice()).unwrap_or(&[]);
            if best.map_or(true, |b| ids.len() < b.len()) {
                best = Some(ids);
            }
        }
    }
    Some(best.unwrap_or(all))
}

/// Does the fact base satisfy the existential closure of `body` under the
/// given binding of head variables?  Unbound variables are existential.
pub fn satisfies(fb: &FactBase, binding: &HashMap<String, String>, body: &[Atom]) -> bool {
    let mut bound = binding.clone();
    let mut remaining: Vec<&Atom> = body.iter().collect();
    solve(fb, &mut bound, &mut remaining)
}

fn solve(fb: &FactBase, bound: &mut HashMap<String, String>, remaining: &mut Vec<&Atom>) -> bool {
    if remaining.is_empty() {
        return true;
    }

    // most-constrained-first join order
    let mut best_slot = 0;
    let mut best_count = usize::MAX;
    for (slot, atom) in remaining.iter().enumerate() {
        let slots = resolve(atom, bound);
        let count = match candidate_ids(fb, atom, &slots) {
            None => 0,
            Some(ids) => ids.len(),
        };
        if count < best_count {
            best_count = count;
            best_slot = slot;
            if count == 0 {
                break;
            }
        }
    }
    if best_count == 0 {
        return false;
    }

    let atom = remaining.swap_remove(best_slot);
    let slots = resolve(atom, bound);
    let ids = candidate_ids(fb, atom, &slots).unwrap();
    'facts: for &id in ids {
        let fact = &fb.facts[id];
        let mut extension: Vec<(&str, &str)> = Vec::new();
        for (slot, arg) in slots.iter().zip(fact.args()) {
            match slot {
                Slot::Fixed(c) => {
                    if c.as_str() != arg.name() {
                        continue 'facts;
                    }
                }
                Slot::Open(v) => match extension.iter().find(|(n, _)| *n == v.as_str()) {
                    Some((_, c)) => {
                        if *c != arg.name() {
                            continue 'facts;
                        }
                    }
                    None => extension.push((v.as_str(), arg.name())),
                },
            }
        }
        for (v, c) in &extension {
            bound.insert(v.to_string(), c.to_string());
        }
        if solve(fb, bound, remaining) {
            return true;
        }
        for (v, _) in &extension {
            bound.remove(*v);
        }
    }
    let last = remaining.len();
    remaining.push(atom);
    remaining.swap(best_slot.min(last), last);
    false
}

/// Coverage of one predicate group over an example set: bit `e` is set iff
/// the fact base satisfies the group under example `e`'s head binding.
pub fn group_coverage(
    fb: &FactBase,
    examples: &ExampleSet,
    head: &Atom,
    group_atoms: &[Atom],
) -> Result<CoverageSet> {
    let mut cov = CoverageSet::empty(examples.len());
    for i in 0..examples.len() {
        let binding = head_binding(head, examples.atom(i))?;
        if satisfies(fb, &binding, group_atoms) {
            cov.set(i);
        }
    }
    Ok(cov)
}

/// Intersection of group coverages; with no groups this is the full set
/// (an empty body holds everywhere).
pub fn clause_coverage(width: usize, group_covs: &[&CoverageSet]) -> CoverageSet {
    let mut cov = CoverageSet::full(width);
    for g in group_covs {
        cov = cov.and(g);
    }
    cov
}

/// Per-group coverage cache, keyed by position in a fixed canonical-key
/// order (the deduplicated group list from preparation).  Variant groups
/// share coverage, so each distinct key is evaluated exactly once; derived
/// clause coverages are memoized as well.
#[derive(Debug, Clone)]
pub struct EsCache {
    width: usize,
    by_key: Vec<CoverageSet>,
    clause_memo: HashMap<Vec<usize>, CoverageSet>,
}

impl EsCache {
    /// Evaluate every deduplicated group once.  `deadline` lets long builds
    /// abort between groups.
    pub fn build(
        fb: &FactBase,
        examples: &ExampleSet,
        head: &Atom,
        groups: &[PredicateGroup],
        deadline: crate::subsumption::Deadline,
    ) -> Result<EsCache> {
        let started = std::time::Instant::now();
        let mut by_key = Vec::with_capacity(groups.len());
        for g in groups {
            if deadline.exceeded() {
                return Err(Error::BudgetExhausted {
                    phase: crate::error::Phase::CoverageBuild,
                    elapsed: started.elapsed(),
                    progress: crate::error::PartialProgress::default(),
                });
            }
            by_key.push(group_coverage(fb, examples, head, g.atoms())?);
        }
        Ok(EsCache {
            width: examples.len(),
            by_key,
            clause_memo: HashMap::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn group(&self, key_index: usize) -> &CoverageSet {
        &self.by_key[key_index]
    }

    /// Clause coverage as the intersection of its groups' coverages.
    pub fn clause(&mut self, key_indices: &[usize]) -> CoverageSet {
        let mut memo_key: Vec<usize> = key_indices.to_vec();
        memo_key.sort_unstable();
        memo_key.dedup();
        if let Some(hit) = self.clause_memo.get(&memo_key) {
            return hit.clone();
        }
        let covs: Vec<&CoverageSet> = memo_key.iter().map(|&k| &self.by_key[k]).collect();
        let cov = clause_coverage(self.width, &covs);
        self.clause_memo.insert(memo_key, cov.clone());
        cov
    }
}
