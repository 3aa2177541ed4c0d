//! First-order syntax: terms, atoms, weighted clauses, predicate groups and
//! decision lists, plus the variable-hygiene operations on them.
//!
//! Variables and constants live in disjoint namespaces decided by surface
//! syntax (leading lower-case or `_` is a variable, anything else a
//! constant).  Head variables of a clause act as globally frozen symbols:
//! renaming operations never touch them and matching operations treat them
//! like constants that only match themselves.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// A term is either a variable or a constant.  No function symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Variable(String),
    Constant(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Variable(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Term {
        Term::Constant(name.into())
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Variable(n) | Term::Constant(n) => n,
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(n) => f.write_str(n),
            Term::Constant(n) => {
                if constant_is_bare(n) {
                    f.write_str(n)
                } else {
                    write!(f, "\"{}\"", escape_quoted(n))
                }
            }
        }
    }
}

/// A bare (unquoted) constant must re-lex as a constant: it has to start
/// with an upper-case letter or a digit and stick to identifier characters.
fn constant_is_bare(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() || c.is_ascii_digit() => {}
        _ => return false,
    }
    name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn escape_quoted(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            _ => out.push(ch),
        }
    }
    out
}

/// A predicate applied to terms: `Publication(c, a)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    predicate: String,
    args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// Variable names appearing in the atom, in argument order (with repeats).
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Variable(n) => Some(n.as_str()),
            Term::Constant(_) => None,
        })
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_variable())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        f.write_str("(")?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

/// Where a clause came from: leaf `leaf` of tree `tree` in the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LeafRef {
    pub tree: usize,
    pub leaf: usize,
}

impl fmt::Display for LeafRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}l{}", self.tree, self.leaf)
    }
}

/// A weighted Horn clause with a positive conjunctive body.
///
/// The head's arguments are distinct variables; body atoms may use head
/// variables, local (existential) variables and constants.  `provenance`
/// records which tree leaves were folded into the clause.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    head: Atom,
    body: Vec<Atom>,
    value: f64,
    provenance: Vec<LeafRef>,
}

impl Clause {
    pub fn new(head: Atom, body: Vec<Atom>, value: f64, provenance: Vec<LeafRef>) -> Result<Clause> {
        validate_head(&head)?;
        if !value.is_finite() {
            return Err(Error::Invariant(format!(
                "clause value must be finite, got {value}"
            )));
        }
        Ok(Clause {
            head,
            body,
            value,
            provenance,
        })
    }

    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn provenance(&self) -> &[LeafRef] {
        &self.provenance
    }

    pub fn head_vars(&self) -> HashSet<String> {
        self.head
            .args()
            .iter()
            .filter_map(|t| match t {
                Term::Variable(n) => Some(n.clone()),
                Term::Constant(_) => None,
            })
            .collect()
    }

    /// Same head and value, different body (used by the reduction passes).
    pub fn with_body(&self, body: Vec<Atom>) -> Clause {
        Clause {
            head: self.head.clone(),
            body,
            value: self.value,
            provenance: self.provenance.clone(),
        }
    }
}

pub(crate) fn validate_head(head: &Atom) -> Result<()> {
    let mut seen = HashSet::new();
    for arg in head.args() {
        match arg {
            Term::Variable(n) => {
                if !seen.insert(n.clone()) {
                    return Err(Error::Invariant(format!(
                        "head {head} repeats variable {n}"
                    )));
                }
            }
            Term::Constant(_) => {
                return Err(Error::Invariant(format!(
                    "head {head} must use distinct variables, found a constant"
                )));
            }
        }
    }
    Ok(())
}

/// Reference to the clause a predicate group was first extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClauseRef {
    pub tree: usize,
    pub rule: usize,
}

/// A maximal set of body atoms connected through shared non-head variables.
///
/// Head variables are fixed once the head is bound, so two atoms that only
/// share a head variable (or a constant) are *not* connected; each group can
/// therefore be evaluated independently of the others.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateGroup {
    atoms: Vec<Atom>,
    owner: Option<ClauseRef>,
    key: String,
}

impl PredicateGroup {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Variant-invariant identity: two groups share a key iff they are equal
    /// up to a bijective renaming of their non-head variables.
    pub fn canonical_key(&self) -> &str {
        &self.key
    }

    pub fn owner(&self) -> Option<ClauseRef> {
        self.owner
    }
}

/// How per-tree values are combined into an ensemble prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    Sum,
    Average,
}

impl CombineMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CombineMode::Sum => "sum",
            CombineMode::Average => "average",
        }
    }

    pub fn from_str(s: &str) -> Option<CombineMode> {
        match s {
            "sum" => Some(CombineMode::Sum),
            "average" => Some(CombineMode::Average),
            _ => None,
        }
    }
}

/// An ordered decision list with first-match semantics.
///
/// All rules share the same head; the final rule has an empty body so that
/// every ground head instance matches some rule.  In `Average` mode rule
/// values are stored as running sums over `tree_count` trees and divided
/// only when a prediction is produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionList {
    head: Atom,
    rules: Vec<Clause>,
    combine: CombineMode,
    tree_count: usize,
}

impl DecisionList {
    pub fn new(
        head: Atom,
        rules: Vec<Clause>,
        combine: CombineMode,
        tree_count: usize,
    ) -> Result<DecisionList> {
        validate_head(&head)?;
        if rules.is_empty() {
            return Err(Error::Invariant("decision list has no rules".to_string()));
        }
        if tree_count == 0 {
            return Err(Error::Invariant(
                "decision list must combine at least one tree".to_string(),
            ));
        }
        for rule in &rules {
            if rule.head() != &head {
                return Err(Error::Invariant(format!(
                    "rule head {} does not match list head {}",
                    rule.head(),
                    head
                )));
            }
        }
        if !rules.last().unwrap().body().is_empty() {
            return Err(Error::Invariant(
                "decision list is not total: final rule must have an empty body".to_string(),
            ));
        }
        Ok(DecisionList {
            head,
            rules,
            combine,
            tree_count,
        })
    }

    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn rules(&self) -> &[Clause] {
        &self.rules
    }

    pub fn combine(&self) -> CombineMode {
        self.combine
    }

    pub fn tree_count(&self) -> usize {
        self.tree_count
    }

    pub fn head_vars(&self) -> HashSet<String> {
        self.rules[0].head_vars()
    }

    pub fn avg_body_len(&self) -> f64 {
        let total: usize = self.rules.iter().map(|r| r.body().len()).sum();
        total as f64 / self.rules.len() as f64
    }
}

/// Predicate name -> arity, built up while parsing and checked on every use.
#[derive(Debug, Clone, Default)]
pub struct SignatureTable {
    arities: HashMap<String, usize>,
}

impl SignatureTable {
    pub fn new() -> SignatureTable {
        SignatureTable::default()
    }

    /// Record a predicate's arity; returns the previously registered arity
    /// on a conflict so the caller can point at the offending location.
    pub fn register(&mut self, predicate: &str, arity: usize) -> std::result::Result<(), usize> {
        match self.arities.get(predicate) {
            Some(&known) if known != arity => Err(known),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(predicate.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn get(&self, predicate: &str) -> Option<usize> {
        self.arities.get(predicate).copied()
    }
}

/// Rename every non-head variable of `c` by appending `_<tag>`, leaving head
/// variables untouched.  The suffix is lengthened in the unlikely case that
/// a renamed variable would collide with a head variable.
pub fn standardize_apart(c: &Clause, tag: &str) -> Clause {
    let head_vars = c.head_vars();
    let body_vars: HashSet<&str> = c
        .body()
        .iter()
        .flat_map(|a| a.variables())
        .filter(|v| !head_vars.contains(*v))
        .collect();

    let mut suffix = format!("_{tag}");
    while body_vars
        .iter()
        .any(|v| head_vars.contains(&format!("{v}{suffix}")))
    {
        suffix.push('x');
    }

    let theta: HashMap<String, Term> = body_vars
        .iter()
        .map(|v| (v.to_string(), Term::var(format!("{v}{suffix}"))))
        .collect();
    c.with_body(apply_substitution(c.body(), &theta))
}

/// Apply a substitution simultaneously: replacement terms are not themselves
/// substituted into.  Variables not in `theta` are left alone.
pub fn apply_substitution(atoms: &[Atom], theta: &HashMap<String, Term>) -> Vec<Atom> {
    atoms
        .iter()
        .map(|atom| {
            let args = atom
                .args()
                .iter()
                .map(|t| match t {
                    Term::Variable(v) => theta.get(v).cloned().unwrap_or_else(|| t.clone()),
                    Term::Constant(_) => t.clone(),
                })
                .collect();
            Atom::new(atom.predicate(), args)
        })
        .collect()
}

/// Partition a clause body into predicate groups: maximal components of the
/// "shares a non-head variable" relation, ordered by first atom occurrence,
/// atoms in body order within each group.
pub fn literal_groups(c: &Clause) -> Vec<PredicateGroup> {
    let head_vars = c.head_vars();
    group_atom_indices(c.body(), &head_vars)
        .into_iter()
        .map(|indices| {
            let atoms: Vec<Atom> = indices.iter().map(|&i| c.body()[i].clone()).collect();
            let key = canonical_key(&atoms, &head_vars);
            PredicateGroup {
                atoms,
                owner: c.provenance().first().map(|l| ClauseRef {
                    tree: l.tree,
                    rule: l.leaf,
                }),
                key,
            }
        })
        .collect()
}

/// The index-level group partition used by both `literal_groups` and the
/// merge pipeline: each inner vector is sorted ascending; groups are ordered
/// by their smallest member.
pub fn group_atom_indices(body: &[Atom], head_vars: &HashSet<String>) -> Vec<Vec<usize>> {
    let mut var_to_atoms: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, atom) in body.iter().enumerate() {
        for v in atom.variables() {
            if !head_vars.contains(v) {
                var_to_atoms.entry(v).or_default().push(i);
            }
        }
    }

    let mut assigned = vec![false; body.len()];
    let mut groups = Vec::new();
    for seed in 0..body.len() {
        if assigned[seed] {
            continue;
        }
        let mut members = Vec::new();
        let mut stack = vec![seed];
        assigned[seed] = true;
        while let Some(i) = stack.pop() {
            members.push(i);
            for v in body[i].variables() {
                if head_vars.contains(v) {
                    continue;
                }
                for &j in &var_to_atoms[v] {
                    if !assigned[j] {
                        assigned[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    groups
}

/// Compute the variant-invariant key of a group of atoms.
///
/// The key is the lexicographically smallest rendering over all orderings of
/// the atoms, where non-head variables are numbered sequentially by first
/// occurrence in the chosen ordering.  Two groups get equal keys iff one can
/// be mapped onto the other by bijectively renaming non-head variables.
/// Head variables and constants render as themselves (tagged so the three
/// namespaces cannot collide) and structural characters are escaped out of
/// names, which makes the rendering injective.
pub fn canonical_key(atoms: &[Atom], head_vars: &HashSet<String>) -> String {
    fn esc(s: &str, out: &mut String) {
        for ch in s.chars() {
            match ch {
                '\\' | '(' | ')' | ',' | ';' => {
                    out.push('\\');
                    out.push(ch);
                }
                _ => out.push(ch),
            }
        }
    }

    /// Render one atom under the current numbering; fresh variables get the
    /// next ids in argument order and are reported through `fresh`.
    fn render(
        atom: &Atom,
        head_vars: &HashSet<String>,
        numbering: &HashMap<String, usize>,
        fresh: &mut Vec<String>,
    ) -> String {
        let mut out = String::new();
        esc(atom.predicate(), &mut out);
        out.push('(');
        for (i, arg) in atom.args().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match arg {
                Term::Constant(n) => {
                    out.push_str("c:");
                    esc(n, &mut out);
                }
                Term::Variable(v) if head_vars.contains(v) => {
                    out.push_str("h:");
                    esc(v, &mut out);
                }
                Term::Variable(v) => {
                    let id = match numbering.get(v) {
                        Some(&id) => id,
                        None => match fresh.iter().position(|f| f == v) {
                            Some(pos) => numbering.len() + pos,
                            None => {
                                fresh.push(v.clone());
                                numbering.len() + fresh.len() - 1
                            }
                        },
                    };
                    out.push('v');
                    out.push_str(&id.to_string());
                }
            }
        }
        out.push(')');
        out
    }

    fn search(
        atoms: &[Atom],
        head_vars: &HashSet<String>,
        remaining: &mut Vec<usize>,
        numbering: &mut HashMap<String, usize>,
        prefix: &mut String,
        best: &mut Option<String>,
    ) {
        if remaining.is_empty() {
            match best {
                Some(b) if b.as_str() <= prefix.as_str() => {}
                _ => *best = Some(prefix.clone()),
            }
            return;
        }

        let mut min_render: Option<String> = None;
        let mut picks: Vec<(usize, Vec<String>)> = Vec::new();
        for &i in remaining.iter() {
            let mut fresh = Vec::new();
            let r = render(&atoms[i], head_vars, numbering, &mut fresh);
            match &min_render {
                Some(m) if r > *m => {}
                Some(m) if r == *m => picks.push((i, fresh)),
                _ => {
                    min_render = Some(r);
                    picks = vec![(i, fresh)];
                }
            }
        }
        let min_render = min_render.unwrap();

        for (i, fresh) in picks {
            let base = numbering.len();
            for (k, v) in fresh.iter().enumerate() {
                numbering.insert(v.clone(), base + k);
            }
            let prefix_len = prefix.len();
            prefix.push_str(&min_render);
            prefix.push(';');
            let pos = remaining.iter().position(|&x| x == i).unwrap();
            remaining.swap_remove(pos);

            search(atoms, head_vars, remaining, numbering, prefix, best);

            remaining.push(i);
            let last = remaining.len() - 1;
            remaining.swap(pos, last);
            prefix.truncate(prefix_len);
            for v in &fresh {
                numbering.remove(v);
            }
        }
    }

    let mut remaining: Vec<usize> = (0..atoms.len()).collect();
    let mut best = None;
    search(
        atoms,
        head_vars,
        &mut remaining,
        &mut HashMap::new(),
        &mut String::new(),
        &mut best,
    );
    best.unwrap_or_default()
}
