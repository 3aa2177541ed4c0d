#![allow(dead_code)]

//! Brute-force reference implementations the integration tests check the
//! real algorithms against.  Everything here trades speed for obviousness:
//! exhaustive enumeration instead of search, O(n^2) pair counting instead
//! of rank statistics.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cote_core::coverage::{FactBase, Label};
use cote_core::logic::{Atom, Term};
use cote_core::tree::{TildeTree, TreeNode};

/// θ-subsumption decided by enumerating every substitution from the left
/// side's non-frozen variables into the right side's term universe.
/// Returns `None` when the enumeration would be too large to run.
pub fn brute_subsumes(a: &[Atom], b: &[Atom], frozen: &HashSet<String>) -> Option<bool> {
    let b_set: HashSet<&Atom> = b.iter().collect();
    let mut universe: Vec<Term> = Vec::new();
    let mut seen = HashSet::new();
    for atom in b {
        for t in atom.args() {
            if seen.insert(t.clone()) {
                universe.push(t.clone());
            }
        }
    }
    let mut vars: Vec<String> = Vec::new();
    let mut var_seen = HashSet::new();
    for atom in a {
        for v in atom.variables() {
            if !frozen.contains(v) && var_seen.insert(v.to_string()) {
                vars.push(v.to_string());
            }
        }
    }

    if vars.is_empty() {
        let ok = a.iter().all(|atom| b_set.contains(atom));
        return Some(ok);
    }
    if universe.is_empty() {
        return Some(false); // a non-frozen variable has nowhere to go
    }
    let combos = (universe.len() as u64).checked_pow(vars.len() as u32)?;
    if combos > 2_000_000 {
        return None;
    }

    let mut idx = vec![0usize; vars.len()];
    loop {
        let theta: HashMap<&str, &Term> = vars
            .iter()
            .map(|v| v.as_str())
            .zip(idx.iter().map(|&i| &universe[i]))
            .collect();
        let ok = a.iter().all(|atom| {
            let image = Atom::new(
                atom.predicate(),
                atom.args()
                    .iter()
                    .map(|t| match t {
                        Term::Variable(v) if !frozen.contains(v) => (*theta[v.as_str()]).clone(),
                        other => other.clone(),
                    })
                    .collect(),
            );
            b_set.contains(&image)
        });
        if ok {
            return Some(true);
        }
        let mut k = vars.len();
        loop {
            if k == 0 {
                return Some(false);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < universe.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Existential satisfaction decided by grounding: every assignment of the
/// body's unbound variables to the fact base's constants is tried.
pub fn ground_satisfies(fb: &FactBase, binding: &HashMap<String, String>, body: &[Atom]) -> bool {
    let mut vars: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for atom in body {
        for v in atom.variables() {
            if !binding.contains_key(v) && seen.insert(v.to_string()) {
                vars.push(v.to_string());
            }
        }
    }
    let constants = fb.constants();
    if vars.is_empty() {
        return body.iter().all(|a| fb.contains(&ground(a, binding, &[], &[])));
    }
    if constants.is_empty() {
        return false;
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let assignment: Vec<&str> = idx.iter().map(|&i| constants[i].as_str()).collect();
        if body
            .iter()
            .all(|a| fb.contains(&ground(a, binding, &vars, &assignment)))
        {
            return true;
        }
        let mut k = vars.len();
        loop {
            if k == 0 {
                return false;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < constants.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn ground(atom: &Atom, binding: &HashMap<String, String>, vars: &[String], assignment: &[&str]) -> Atom {
    Atom::new(
        atom.predicate(),
        atom.args()
            .iter()
            .map(|t| match t {
                Term::Constant(_) => t.clone(),
                Term::Variable(v) => {
                    if let Some(c) = binding.get(v) {
                        Term::constant(c.clone())
                    } else {
                        let i = vars.iter().position(|w| w == v).expect("assigned var");
                        Term::constant(assignment[i])
                    }
                }
            })
            .collect(),
    )
}

/// Tree evaluation by materializing each leaf's path formula: the positive
/// path conjunction must hold and, for every no-turn on the way down, the
/// conjunction that would have sent the walk left must fail.  Asserts that
/// exactly one leaf's formula holds.
pub fn eval_tree_by_path_formulas(
    tree: &TildeTree,
    fb: &FactBase,
    binding: &HashMap<String, String>,
) -> f64 {
    let mut formulas = Vec::new();
    collect_formulas(tree.root(), &mut Vec::new(), &mut Vec::new(), &mut formulas);
    let mut hit = None;
    for (value, pos, negs) in &formulas {
        let holds = ground_satisfies(fb, binding, pos)
            && negs.iter().all(|n| !ground_satisfies(fb, binding, n));
        if holds {
            assert!(hit.is_none(), "two leaf formulas hold at once");
            hit = Some(*value);
        }
    }
    hit.expect("no leaf formula holds")
}

type Formula = (f64, Vec<Atom>, Vec<Vec<Atom>>);

fn collect_formulas(
    node: &TreeNode,
    pos: &mut Vec<Atom>,
    negs: &mut Vec<Vec<Atom>>,
    out: &mut Vec<Formula>,
) {
    match node {
        TreeNode::Leaf { value, .. } => out.push((*value, pos.clone(), negs.clone())),
        TreeNode::Inner { tests, yes, no } => {
            let before = pos.len();
            pos.extend(tests.iter().cloned());
            collect_formulas(yes, pos, negs, out);
            pos.truncate(before);

            let mut refused = pos.clone();
            refused.extend(tests.iter().cloned());
            negs.push(refused);
            collect_formulas(no, pos, negs, out);
            negs.pop();
        }
    }
}

/// AUC-ROC by counting every positive/negative pair: a win scores 1, a tie
/// scores a half.
pub fn pairwise_auc(scored: &[(f64, Label)]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (sp, lp) in scored {
        if *lp != Label::Pos {
            continue;
        }
        for (sn, ln) in scored {
            if *ln != Label::Neg {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// A small random conjunction for subsumption tests: predicates R0/R1,
/// arity 1-2, variables drawn from a frozen head variable plus a small
/// existential pool, constants from a two-element pool.
pub fn random_body(rng: &mut ChaCha8Rng, max_atoms: usize) -> Vec<Atom> {
    let n = rng.gen_range(1..=max_atoms);
    (0..n)
        .map(|_| {
            let arity = rng.gen_range(1..=2);
            let args = (0..arity)
                .map(|_| match rng.gen_range(0..6) {
                    0 => Term::var("a"),
                    1 => Term::var("x"),
                    2 => Term::var("y"),
                    3 => Term::var("z"),
                    4 => Term::constant("C0"),
                    _ => Term::constant("C1"),
                })
                .collect();
            Atom::new(format!("R{}", rng.gen_range(0..2)), args)
        })
        .collect()
}
