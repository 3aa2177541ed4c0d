//! Incremental compression of a tree ensemble into one decision list.
//!
//! Both variants fold the per-tree lists together pairwise, in the
//! lexicographic order that refines each component list's own order.  The
//! subsumption-based variant discards redundancy that holds in every model
//! (the output is logically equivalent to the ensemble); the example-based
//! variant discards redundancy relative to a training set (the output
//! agrees with the ensemble on exactly those examples).

use std::collections::HashSet;
use std::time::Instant;

use crate::coverage::{head_binding, satisfies, CoverageSet, EsCache, ExampleSet, FactBase};
use crate::error::{Error, Phase, PartialProgress, Result};
use crate::logic::{
    canonical_key, group_atom_indices, literal_groups, standardize_apart, validate_head, Atom,
    Clause, CombineMode, DecisionList, PredicateGroup,
};
use crate::subsumption::{
    build_sm, clause_reduction, theta_subsumes, Deadline, SearchBudget, SubsumeResult,
    SubsumptionMatrix,
};
use crate::tree::{tree_to_list, TildeTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionMode {
    Scote,
    Ecote,
}

impl CompressionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CompressionMode::Scote => "scote",
            CompressionMode::Ecote => "ecote",
        }
    }

    pub fn from_str(s: &str) -> Option<CompressionMode> {
        match s {
            "scote" => Some(CompressionMode::Scote),
            "ecote" => Some(CompressionMode::Ecote),
            _ => None,
        }
    }
}

/// Deduplicated predicate groups in order of first appearance, addressable
/// by canonical key.  Subsumption matrices and coverage caches are aligned
/// with this indexing.
#[derive(Debug, Clone, Default)]
pub struct GroupKeySpace {
    groups: Vec<PredicateGroup>,
    index: std::collections::HashMap<String, usize>,
}

impl GroupKeySpace {
    fn insert(&mut self, group: PredicateGroup) -> usize {
        match self.index.get(group.canonical_key()) {
            Some(&i) => i,
            None => {
                let i = self.groups.len();
                self.index.insert(group.canonical_key().to_string(), i);
                self.groups.push(group);
                i
            }
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[PredicateGroup] {
        &self.groups
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }
}

/// Output of the preparation pass: per-tree decision lists, standardized
/// apart by tree index and clause-reduced, plus the deduplicated groups.
#[derive(Debug, Clone)]
pub struct Prepared {
    head: Atom,
    combine: CombineMode,
    lists: Vec<DecisionList>,
    groups: GroupKeySpace,
    budget_skips: u64,
}

impl Prepared {
    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn combine(&self) -> CombineMode {
        self.combine
    }

    pub fn lists(&self) -> &[DecisionList] {
        &self.lists
    }

    pub fn groups(&self) -> &GroupKeySpace {
        &self.groups
    }

    /// Clause-reduction removals skipped because a subsumption budget blew.
    pub fn budget_skips(&self) -> u64 {
        self.budget_skips
    }
}

/// Transform every tree to its list, reduce each rule, standardize lists
/// apart by tree index and collect the deduplicated predicate groups.
pub fn prep(
    head: &Atom,
    trees: &[TildeTree],
    combine: CombineMode,
    budget: &SearchBudget,
    deadline: Deadline,
) -> Result<Prepared> {
    validate_head(head)?;
    if trees.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let started = Instant::now();
    let mut lists = Vec::with_capacity(trees.len());
    let mut groups = GroupKeySpace::default();
    let mut budget_skips = 0;
    for (i, tree) in trees.iter().enumerate() {
        if deadline.exceeded() {
            return Err(Error::BudgetExhausted {
                phase: Phase::Prep,
                elapsed: started.elapsed(),
                progress: PartialProgress {
                    iterations_done: 0,
                    rules_so_far: 0,
                },
            });
        }
        let raw = tree_to_list(tree, i, head, combine)?;
        let tag = format!("t{i}");
        let mut rules = Vec::with_capacity(raw.rules().len());
        for rule in raw.rules() {
            let reduced = clause_reduction(rule, budget);
            budget_skips += reduced.budget_skips;
            let rule = standardize_apart(&reduced.clause, &tag);
            for g in literal_groups(&rule) {
                groups.insert(g);
            }
            rules.push(rule);
        }
        lists.push(DecisionList::new(head.clone(), rules, combine, 1)?);
    }
    Ok(Prepared {
        head: head.clone(),
        combine,
        lists,
        groups,
        budget_skips,
    })
}

/// Combine two rules: bodies concatenated, values summed (in `Average` mode
/// the stored value stays a running sum), provenance concatenated.  The two
/// must be standardized apart; a shared non-head variable is a fatal
/// internal error.
pub fn add_clauses(cj: &Clause, ck: &Clause) -> Result<Clause> {
    if cj.head() != ck.head() {
        return Err(Error::Invariant(format!(
            "cannot combine rules with different heads: {} vs {}",
            cj.head(),
            ck.head()
        )));
    }
    let head_vars = cj.head_vars();
    let left: HashSet<&str> = cj
        .body()
        .iter()
        .flat_map(|a| a.variables())
        .filter(|v| !head_vars.contains(*v))
        .collect();
    if let Some(shared) = ck
        .body()
        .iter()
        .flat_map(|a| a.variables())
        .find(|v| left.contains(v) && !head_vars.contains(*v))
    {
        return Err(Error::Invariant(format!(
            "rules share non-head variable {shared}; standardize apart first"
        )));
    }

    let mut body = cj.body().to_vec();
    body.extend(ck.body().iter().cloned());
    let mut provenance = cj.provenance().to_vec();
    provenance.extend(ck.provenance().iter().copied());
    Clause::new(cj.head().clone(), body, cj.value() + ck.value(), provenance)
}

/// The lexicographic merge order: all pairs (j, k), j over the accumulated
/// list (outer) and k over the incoming list (inner).  Any order refining
/// both component orders yields the same predictions; this is the one used.
pub fn merge_order(l: &DecisionList, li: &DecisionList) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(l.rules().len() * li.rules().len());
    for j in 0..l.rules().len() {
        for k in 0..li.rules().len() {
            order.push((j, k));
        }
    }
    order
}

fn validate_order(order: &[(usize, usize)], rows: usize, cols: usize) -> Result<()> {
    if order.len() != rows * cols {
        return Err(Error::Invariant(format!(
            "combination order has {} pairs, expected {}",
            order.len(),
            rows * cols
        )));
    }
    let mut seen = vec![false; rows * cols];
    for &(j, k) in order {
        if j >= rows || k >= cols || seen[j * cols + k] {
            return Err(Error::Invariant(
                "combination order is not a permutation of all rule pairs".to_string(),
            ));
        }
        seen[j * cols + k] = true;
    }
    Ok(())
}

/// Which groups survive redundancy elimination: group `p` is dropped when
/// some other retained group `q` is at least as strong (p θ-subsumes q, so
/// q implies p); on mutual subsumption the later-positioned group goes.
/// Repeated to a fixpoint.
fn reduce_group_mask(keys: &[usize], sm: &SubsumptionMatrix) -> Vec<bool> {
    let n = keys.len();
    let mut retained = vec![true; n];
    loop {
        let mut changed = false;
        for p in 0..n {
            if !retained[p] {
                continue;
            }
            let redundant = (0..n).any(|q| {
                q != p
                    && retained[q]
                    && sm.subsumes(keys[p], keys[q])
                    && (!sm.subsumes(keys[q], keys[p]) || q < p)
            });
            if redundant {
                retained[p] = false;
                changed = true;
            }
        }
        if !changed {
            return retained;
        }
    }
}

fn key_indices_for(c: &Clause, sm_index: impl Fn(&str) -> Option<usize>) -> Result<Vec<(Vec<usize>, usize)>> {
    let head_vars = c.head_vars();
    let partition = group_atom_indices(c.body(), &head_vars);
    let mut out = Vec::with_capacity(partition.len());
    for positions in partition {
        let atoms: Vec<Atom> = positions.iter().map(|&i| c.body()[i].clone()).collect();
        let key = canonical_key(&atoms, &head_vars);
        let idx = sm_index(&key).ok_or_else(|| {
            Error::Invariant(format!("group key not present in key space: {key}"))
        })?;
        out.push((positions, idx));
    }
    Ok(out)
}

/// Drop groups of `c` that are implied by other retained groups, keeping
/// the remaining atoms in their original body order.  Logically equivalent
/// because a group only goes when a retained one θ-subsumes it backwards.
pub fn reduce_clause(c: &Clause, sm: &SubsumptionMatrix) -> Result<Clause> {
    let groups = key_indices_for(c, |k| sm.index_of(k))?;
    let keys: Vec<usize> = groups.iter().map(|(_, k)| *k).collect();
    let mask = reduce_group_mask(&keys, sm);
    let mut keep = vec![false; c.body().len()];
    for (gi, (positions, _)) in groups.iter().enumerate() {
        if mask[gi] {
            for &p in positions {
                keep[p] = true;
            }
        }
    }
    let body: Vec<Atom> = c
        .body()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, a)| a.clone())
        .collect();
    Ok(c.with_body(body))
}

/// Sufficient clause-level subsumption criterion: every group of the
/// earlier clause θ-subsumes some group of the later one.  Sound because
/// groups only share frozen head variables, so the per-group substitutions
/// union into one whole-clause substitution.
fn sm_clause_subsumes(cj_keys: &[usize], ck_keys: &[usize], sm: &SubsumptionMatrix) -> bool {
    cj_keys
        .iter()
        .all(|&g| ck_keys.iter().any(|&h| sm.subsumes(g, h)))
}

#[derive(Debug, Clone)]
pub struct ListReduction {
    pub rules: Vec<Clause>,
    /// Exact-fallback checks that blew their budget (treated as "keep").
    pub budget_aborts: u64,
}

/// Remove rules that an earlier retained rule θ-subsumes: a matching head
/// instance would already have fired the earlier, stronger rule.  The final
/// catch-all is always retained.  The group-wise criterion is incomplete;
/// `exact_fallback` adds a budgeted whole-clause check for pairs it misses.
pub fn reduce_list(
    rules: &[Clause],
    sm: &SubsumptionMatrix,
    exact_fallback: Option<&SearchBudget>,
) -> Result<ListReduction> {
    let per_clause_keys: Vec<Vec<usize>> = rules
        .iter()
        .map(|c| {
            key_indices_for(c, |k| sm.index_of(k))
                .map(|gs| gs.into_iter().map(|(_, k)| k).collect())
        })
        .collect::<Result<_>>()?;

    let mut budget_aborts = 0;
    let mut retained = vec![true; rules.len()];
    for k in 1..rules.len() {
        if k == rules.len() - 1 {
            continue; // the catch-all stays
        }
        let frozen = rules[k].head_vars();
        for j in 0..k {
            if !retained[j] {
                continue;
            }
            let mut subsumed = sm_clause_subsumes(&per_clause_keys[j], &per_clause_keys[k], sm);
            if !subsumed {
                if let Some(budget) = exact_fallback {
                    match theta_subsumes(rules[j].body(), rules[k].body(), &frozen, budget).result
                    {
                        SubsumeResult::Subsumes => subsumed = true,
                        SubsumeResult::NotSubsumes => {}
                        SubsumeResult::BudgetExceeded => budget_aborts += 1,
                    }
                }
            }
            if subsumed {
                retained[k] = false;
                break;
            }
        }
    }
    Ok(ListReduction {
        rules: rules
            .iter()
            .zip(&retained)
            .filter(|(_, &r)| r)
            .map(|(c, _)| c.clone())
            .collect(),
        budget_aborts,
    })
}

/// Working form of a clause during merging: group partition precomputed,
/// each group pointing at its canonical key's index.
#[derive(Debug, Clone)]
struct WorkGroup {
    positions: Vec<usize>,
    key: usize,
}

#[derive(Debug, Clone)]
struct WorkClause {
    body: Vec<Atom>,
    value: f64,
    provenance: Vec<crate::logic::LeafRef>,
    groups: Vec<WorkGroup>,
}

impl WorkClause {
    fn from_clause(c: &Clause, ks: &GroupKeySpace) -> Result<WorkClause> {
        let groups = key_indices_for(c, |k| ks.index_of(k))?
            .into_iter()
            .map(|(positions, key)| WorkGroup { positions, key })
            .collect();
        Ok(WorkClause {
            body: c.body().to_vec(),
            value: c.value(),
            provenance: c.provenance().to_vec(),
            groups,
        })
    }

    fn to_clause(&self, head: &Atom) -> Result<Clause> {
        Clause::new(
            head.clone(),
            self.body.clone(),
            self.value,
            self.provenance.clone(),
        )
    }

    fn key_list(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.key).collect()
    }

    /// Keep only the masked groups, preserving original body order.
    fn retain_groups(&self, mask: &[bool]) -> WorkClause {
        let mut keep = vec![false; self.body.len()];
        for (gi, group) in self.groups.iter().enumerate() {
            if mask[gi] {
                for &p in &group.positions {
                    keep[p] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; self.body.len()];
        let mut body = Vec::new();
        for (i, atom) in self.body.iter().enumerate() {
            if keep[i] {
                remap[i] = body.len();
                body.push(atom.clone());
            }
        }
        let groups = self
            .groups
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(g, _)| WorkGroup {
                positions: g.positions.iter().map(|&p| remap[p]).collect(),
                key: g.key,
            })
            .collect();
        WorkClause {
            body,
            value: self.value,
            provenance: self.provenance.clone(),
            groups,
        }
    }
}

fn add_work(cj: &WorkClause, ck: &WorkClause) -> WorkClause {
    let offset = cj.body.len();
    let mut body = cj.body.clone();
    body.extend(ck.body.iter().cloned());
    let mut provenance = cj.provenance.clone();
    provenance.extend(ck.provenance.iter().copied());
    let mut groups = cj.groups.clone();
    groups.extend(ck.groups.iter().map(|g| WorkGroup {
        positions: g.positions.iter().map(|&p| p + offset).collect(),
        key: g.key,
    }));
    WorkClause {
        body,
        value: cj.value + ck.value,
        provenance,
        groups,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterationStats {
    /// Combined clauses formed in this iteration before any removal.
    pub combined: usize,
    /// Rules retained once the iteration's removals ran.
    pub retained: usize,
    /// Retained rules not counting the final catch-all.
    pub nonfinal_retained: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MergeStats {
    pub iterations: Vec<IterationStats>,
}

#[derive(Debug, Clone)]
pub struct Compressed {
    pub list: DecisionList,
    pub stats: MergeStats,
    /// Present for the subsumption-based variant (diagnostics dumps).
    pub sm: Option<SubsumptionMatrix>,
    /// Budgeted checks that gave up along the way (matrix cells, clause
    /// reductions, exact fallbacks).  Zero means every check was decisive.
    pub budget_aborts: u64,
}

#[derive(Debug, Clone)]
pub struct ScoteOptions {
    pub budget: SearchBudget,
    pub deadline: Deadline,
    /// Escalate missed list-reduction pairs to an exact whole-clause check.
    pub exact_clause_fallback: bool,
}

impl Default for ScoteOptions {
    fn default() -> ScoteOptions {
        ScoteOptions {
            budget: SearchBudget::default(),
            deadline: Deadline::none(),
            exact_clause_fallback: false,
        }
    }
}

/// Subsumption-based compression: merge the per-tree lists pairwise in
/// lexicographic order, reducing every combined clause and then the list.
/// The result is logically equivalent to the ensemble.
pub fn scote(prepared: &Prepared, opts: &ScoteOptions) -> Result<Compressed> {
    scote_ordered(prepared, opts, |rows, cols| {
        let mut order = Vec::with_capacity(rows * cols);
        for j in 0..rows {
            for k in 0..cols {
                order.push((j, k));
            }
        }
        order
    })
}

/// Like [`scote`], but the caller chooses each iteration's combination
/// order.  The order must be a linear extension of the product of the two
/// lists' rule orders; any such order gives a list with the same
/// first-match behaviour, which is what makes the lexicographic default an
/// arbitrary choice rather than a semantic one.
pub fn scote_ordered(
    prepared: &Prepared,
    opts: &ScoteOptions,
    mut order_fn: impl FnMut(usize, usize) -> Vec<(usize, usize)>,
) -> Result<Compressed> {
    let started = Instant::now();
    let head_vars: HashSet<String> = prepared.head.variables().map(String::from).collect();
    let sm = build_sm(
        prepared.groups.groups(),
        &head_vars,
        &opts.budget,
        opts.deadline,
    )?;

    let mut work_lists = Vec::with_capacity(prepared.lists.len());
    for list in &prepared.lists {
        let rules: Result<Vec<WorkClause>> = list
            .rules()
            .iter()
            .map(|c| WorkClause::from_clause(c, &prepared.groups))
            .collect();
        work_lists.push(rules?);
    }

    let mut budget_aborts = prepared.budget_skips + sm.exceeded_count();
    let mut stats = MergeStats::default();
    let mut l = work_lists[0].clone();
    for li in &work_lists[1..] {
        let iteration = stats.iterations.len();
        let order = order_fn(l.len(), li.len());
        validate_order(&order, l.len(), li.len())?;
        let mut lstar = Vec::with_capacity(order.len());
        for (j, k) in order {
            if opts.deadline.exceeded() {
                return Err(Error::BudgetExhausted {
                    phase: Phase::Merge,
                    elapsed: started.elapsed(),
                    progress: PartialProgress {
                        iterations_done: iteration,
                        rules_so_far: lstar.len(),
                    },
                });
            }
            let combined = add_work(&l[j], &li[k]);
            let mask = reduce_group_mask(&combined.key_list(), &sm);
            lstar.push(combined.retain_groups(&mask));
        }
        let combined_count = lstar.len();
        l = reduce_work_list(
            lstar,
            &sm,
            &head_vars,
            opts,
            started,
            iteration,
            &mut budget_aborts,
        )?;
        stats.iterations.push(IterationStats {
            combined: combined_count,
            retained: l.len(),
            nonfinal_retained: l.len().saturating_sub(1),
        });
    }

    let rules: Result<Vec<Clause>> = l.iter().map(|w| w.to_clause(&prepared.head)).collect();
    let list = DecisionList::new(
        prepared.head.clone(),
        rules?,
        prepared.combine,
        prepared.lists.len(),
    )?;
    Ok(Compressed {
        list,
        stats,
        sm: Some(sm),
        budget_aborts,
    })
}

fn reduce_work_list(
    rules: Vec<WorkClause>,
    sm: &SubsumptionMatrix,
    head_vars: &HashSet<String>,
    opts: &ScoteOptions,
    started: Instant,
    iteration: usize,
    budget_aborts: &mut u64,
) -> Result<Vec<WorkClause>> {
    let keys: Vec<Vec<usize>> = rules.iter().map(|c| c.key_list()).collect();
    let mut retained = vec![true; rules.len()];
    for k in 1..rules.len() {
        if k == rules.len() - 1 {
            continue; // the catch-all stays
        }
        if opts.deadline.exceeded() {
            return Err(Error::BudgetExhausted {
                phase: Phase::Merge,
                elapsed: started.elapsed(),
                progress: PartialProgress {
                    iterations_done: iteration,
                    rules_so_far: rules.len(),
                },
            });
        }
        for j in 0..k {
            if !retained[j] {
                continue;
            }
            let mut subsumed = sm_clause_subsumes(&keys[j], &keys[k], sm);
            if !subsumed && opts.exact_clause_fallback {
                match theta_subsumes(&rules[j].body, &rules[k].body, head_vars, &opts.budget)
                    .result
                {
                    SubsumeResult::Subsumes => subsumed = true,
                    SubsumeResult::NotSubsumes => {}
                    SubsumeResult::BudgetExceeded => *budget_aborts += 1,
                }
            }
            if subsumed {
                retained[k] = false;
                break;
            }
        }
    }
    Ok(rules
        .into_iter()
        .zip(retained)
        .filter(|(_, r)| *r)
        .map(|(c, _)| c)
        .collect())
}

/// A combined clause's *active* coverage: the examples it covers that no
/// earlier retained rule in this iteration has already claimed.  The caller
/// drops the clause if this is empty and otherwise adds the clause's raw
/// coverage to the claimed set.
pub fn check_coverage(
    c: &Clause,
    ks: &GroupKeySpace,
    es: &mut EsCache,
    claimed: &CoverageSet,
) -> Result<CoverageSet> {
    let keys: Vec<usize> = key_indices_for(c, |k| ks.index_of(k))?
        .into_iter()
        .map(|(_, k)| k)
        .collect();
    Ok(es.clause(&keys).minus(claimed))
}

fn prune_group_mask(keys: &[usize], es: &mut EsCache) -> Vec<bool> {
    let target = es.clause(keys);
    let n = keys.len();
    let mut retained = vec![true; n];
    loop {
        let mut changed = false;
        for p in 0..n {
            if !retained[p] {
                continue;
            }
            let rest: Vec<usize> = (0..n)
                .filter(|&q| q != p && retained[q])
                .map(|q| keys[q])
                .collect();
            if es.clause(&rest) == target {
                retained[p] = false;
                changed = true;
            }
        }
        if !changed {
            return retained;
        }
    }
}

/// Drop groups whose removal leaves the clause's raw training coverage
/// unchanged: the remaining groups' coverage intersection must still equal
/// the whole clause's coverage.  Atoms keep their original body order.
pub fn prune_clause(c: &Clause, ks: &GroupKeySpace, es: &mut EsCache) -> Result<Clause> {
    let groups = key_indices_for(c, |k| ks.index_of(k))?;
    let keys: Vec<usize> = groups.iter().map(|(_, k)| *k).collect();
    let mask = prune_group_mask(&keys, es);
    let mut keep = vec![false; c.body().len()];
    for (gi, (positions, _)) in groups.iter().enumerate() {
        if mask[gi] {
            for &p in positions {
                keep[p] = true;
            }
        }
    }
    let body: Vec<Atom> = c
        .body()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, a)| a.clone())
        .collect();
    Ok(c.with_body(body))
}

/// Example-based compression: a combined rule survives only if it claims at
/// least one training example no earlier rule claimed, and its body keeps
/// only groups that matter for its raw coverage.  The result predicts
/// exactly like the ensemble on the training examples; non-final rules have
/// pairwise-disjoint active coverage, so at most `examples.len()` of them
/// survive any iteration.
pub fn ecote(
    prepared: &Prepared,
    fb: &FactBase,
    examples: &ExampleSet,
    deadline: Deadline,
) -> Result<Compressed> {
    let started = Instant::now();
    let mut es = EsCache::build(fb, examples, &prepared.head, prepared.groups.groups(), deadline)?;

    let mut work_lists = Vec::with_capacity(prepared.lists.len());
    for list in &prepared.lists {
        let rules: Result<Vec<WorkClause>> = list
            .rules()
            .iter()
            .map(|c| WorkClause::from_clause(c, &prepared.groups))
            .collect();
        work_lists.push(rules?);
    }

    let mut stats = MergeStats::default();
    let mut l = work_lists[0].clone();
    for li in &work_lists[1..] {
        let iteration = stats.iterations.len();
        let combined_count = l.len() * li.len();
        let mut claimed = CoverageSet::empty(examples.len());
        let mut lstar = Vec::new();
        for (j, cj) in l.iter().enumerate() {
            for (k, ck) in li.iter().enumerate() {
                if deadline.exceeded() {
                    return Err(Error::BudgetExhausted {
                        phase: Phase::Merge,
                        elapsed: started.elapsed(),
                        progress: PartialProgress {
                            iterations_done: iteration,
                            rules_so_far: lstar.len(),
                        },
                    });
                }
                let combined = add_work(cj, ck);
                let raw = es.clause(&combined.key_list());
                let active = raw.minus(&claimed);
                let is_final_pair = j == l.len() - 1 && k == li.len() - 1;
                if !active.is_empty() {
                    let mask = prune_group_mask(&combined.key_list(), &mut es);
                    lstar.push(combined.retain_groups(&mask));
                    claimed.or_with(&raw);
                } else if is_final_pair {
                    // the catch-all keeps the list total even when inactive
                    lstar.push(combined);
                }
            }
        }
        stats.iterations.push(IterationStats {
            combined: combined_count,
            retained: lstar.len(),
            nonfinal_retained: lstar.len().saturating_sub(1),
        });
        l = lstar;
    }

    let rules: Result<Vec<Clause>> = l.iter().map(|w| w.to_clause(&prepared.head)).collect();
    let list = DecisionList::new(
        prepared.head.clone(),
        rules?,
        prepared.combine,
        prepared.lists.len(),
    )?;
    Ok(Compressed {
        list,
        stats,
        sm: None,
        budget_aborts: prepared.budget_skips,
    })
}

/// First-match prediction: the value of the first rule whose body the fact
/// base satisfies under the instance's head binding (divided by the tree
/// count in `Average` mode).  The final empty-body rule makes this total.
pub fn predict(list: &DecisionList, fb: &FactBase, instance: &Atom) -> Result<f64> {
    let binding = head_binding(list.head(), instance)?;
    for rule in list.rules() {
        if satisfies(fb, &binding, rule.body()) {
            let v = rule.value();
            return Ok(match list.combine() {
                CombineMode::Sum => v,
                CombineMode::Average => v / list.tree_count() as f64,
            });
        }
    }
    Err(Error::Invariant(
        "decision list is not total: no rule matched".to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{LeafRef, Term};

    fn atom(pred: &str, args: &[&str]) -> Atom {
        let args = args
            .iter()
            .map(|s| {
                if s.starts_with(|c: char| c.is_ascii_lowercase() || c == '_') {
                    Term::var(*s)
                } else {
                    Term::constant(*s)
                }
            })
            .collect();
        Atom::new(pred, args)
    }

    fn head() -> Atom {
        atom("AdvisedBy", &["a", "b"])
    }

    fn clause(body: Vec<Atom>, value: f64, tree: usize, leaf: usize) -> Clause {
        Clause::new(head(), body, value, vec![LeafRef { tree, leaf }]).unwrap()
    }

    #[test]
    fn add_clauses_concatenates_and_sums() {
        let cj = clause(vec![atom("Professor", &["b"])], 2.0, 0, 3);
        let ck = clause(vec![atom("Publication", &["e_t1", "b"])], 40.0, 1, 3);
        let c = add_clauses(&cj, &ck).unwrap();
        assert_eq!(c.value(), 42.0);
        assert_eq!(c.body().len(), 2);
        assert_eq!(
            c.provenance(),
            &[LeafRef { tree: 0, leaf: 3 }, LeafRef { tree: 1, leaf: 3 }]
        );
    }

    #[test]
    fn add_clauses_rejects_shared_body_variables() {
        let cj = clause(vec![atom("P", &["x"])], 1.0, 0, 0);
        let ck = clause(vec![atom("Q", &["x"])], 1.0, 1, 0);
        assert!(add_clauses(&cj, &ck).is_err());
    }

    #[test]
    fn merge_order_is_lexicographic() {
        let l = DecisionList::new(
            head(),
            vec![clause(vec![atom("P", &["a"])], 1.0, 0, 0), clause(vec![], 2.0, 0, 1)],
            CombineMode::Sum,
            1,
        )
        .unwrap();
        let li = DecisionList::new(
            head(),
            vec![clause(vec![atom("Q", &["b"])], 3.0, 1, 0), clause(vec![], 4.0, 1, 1)],
            CombineMode::Sum,
            1,
        )
        .unwrap();
        assert_eq!(merge_order(&l, &li), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn predict_uses_first_matching_rule_and_average_divides() {
        let fb = FactBase::new(vec![atom("Professor", &["P1"])]).unwrap();
        let rules = vec![
            clause(vec![atom("Professor", &["b"])], 6.0, 0, 0),
            clause(vec![], 2.0, 0, 1),
        ];
        let sum_list = DecisionList::new(head(), rules.clone(), CombineMode::Sum, 2).unwrap();
        let avg_list = DecisionList::new(head(), rules, CombineMode::Average, 2).unwrap();
        let inst = atom("AdvisedBy", &["S1", "P1"]);
        assert_eq!(predict(&sum_list, &fb, &inst).unwrap(), 6.0);
        assert_eq!(predict(&avg_list, &fb, &inst).unwrap(), 3.0);
        let other = atom("AdvisedBy", &["S1", "S2"]);
        assert_eq!(predict(&sum_list, &fb, &other).unwrap(), 2.0);
    }

    #[test]
    fn scote_on_a_single_tree_returns_its_list() {
        let tree = crate::tree::TildeTree::from_unindexed(crate::tree::TreeNode::Inner {
            tests: vec![atom("Professor", &["b"])],
            yes: Box::new(crate::tree::TreeNode::Leaf {
                value: 1.0,
                leaf_index: 0,
            }),
            no: Box::new(crate::tree::TreeNode::Leaf {
                value: 2.0,
                leaf_index: 0,
            }),
        })
        .unwrap();
        let prepared = prep(
            &head(),
            &[tree],
            CombineMode::Sum,
            &SearchBudget::default(),
            Deadline::none(),
        )
        .unwrap();
        let out = scote(&prepared, &ScoteOptions::default()).unwrap();
        assert_eq!(out.list.rules().len(), 2);
        assert_eq!(out.list.rules()[0].body(), prepared.lists()[0].rules()[0].body());
        assert!(out.stats.iterations.is_empty());
    }

    #[test]
    fn ecote_with_zero_examples_keeps_only_the_catch_all() {
        let mk_tree = || {
            crate::tree::TildeTree::from_unindexed(crate::tree::TreeNode::Inner {
                tests: vec![atom("Professor", &["b"])],
                yes: Box::new(crate::tree::TreeNode::Leaf {
                    value: 1.0,
                    leaf_index: 0,
                }),
                no: Box::new(crate::tree::TreeNode::Leaf {
                    value: 2.0,
                    leaf_index: 0,
                }),
            })
            .unwrap()
        };
        let prepared = prep(
            &head(),
            &[mk_tree(), mk_tree()],
            CombineMode::Sum,
            &SearchBudget::default(),
            Deadline::none(),
        )
        .unwrap();
        let fb = FactBase::new(vec![atom("Professor", &["P1"])]).unwrap();
        let examples = ExampleSet::new(vec![], vec![]).unwrap();
        let out = ecote(&prepared, &fb, &examples, Deadline::none()).unwrap();
        assert_eq!(out.list.rules().len(), 1);
        assert!(out.list.rules()[0].body().is_empty());
        assert_eq!(out.list.rules()[0].value(), 4.0);
    }
}
