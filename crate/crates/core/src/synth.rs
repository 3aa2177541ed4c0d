//! Seeded generators for ensembles, fact bases and example sets.
//!
//! Everything here is deterministic in the seed, so tests and benchmarks
//! can reproduce any run from its seed alone.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::Model;
use crate::logic::{Atom, CombineMode, Term};
use crate::tree::{TildeTree, TreeNode};

/// Shape of a generated ensemble.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub trees: usize,
    pub max_depth: usize,
    pub predicates: usize,
    pub constants: usize,
    pub target_arity: usize,
    pub combine: CombineMode,
}

/// The constant pool `C0 .. C{n-1}`.
pub fn constant_pool(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("C{i}")).collect()
}

/// Every ground instance of `head` over the constant pool, in
/// lexicographic argument order.
pub fn all_ground_instances(head: &Atom, constants: &[String]) -> Vec<Atom> {
    let arity = head.arity();
    let mut out = Vec::new();
    let mut idx = vec![0usize; arity];
    loop {
        let args = idx
            .iter()
            .map(|&i| Term::constant(constants[i].clone()))
            .collect();
        out.push(Atom::new(head.predicate(), args));
        let mut k = arity;
        loop {
            if k == 0 {
                return out;
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

/// A deterministic sample of `n` distinct ground instances of `head` over
/// the given constants (all of them when fewer exist).
pub fn fuzz_instances(head: &Atom, constants: &[String], n: usize, seed: u64) -> Vec<Atom> {
    if constants.is_empty() || head.arity() == 0 {
        return vec![Atom::new(head.predicate(), vec![])];
    }
    let total = (constants.len() as u128).checked_pow(head.arity() as u32);
    match total {
        Some(total) if total <= n as u128 * 4 => {
            let mut all = all_ground_instances(head, constants);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            all.shuffle(&mut rng);
            all.truncate(n);
            all
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            while out.len() < n {
                let args: Vec<Term> = (0..head.arity())
                    .map(|_| {
                        Term::constant(constants[rng.gen_range(0..constants.len())].clone())
                    })
                    .collect();
                let atom = Atom::new(head.predicate(), args);
                if seen.insert(atom.clone()) {
                    out.push(atom);
                }
            }
            out
        }
    }
}

/// The background predicate signatures a model's trees test, sorted.
pub fn background_signatures(model: &Model) -> Vec<(String, usize)> {
    let mut set = HashSet::new();
    for tree in &model.trees {
        collect_signatures(tree.root(), &mut set);
    }
    set.remove(&(model.target.predicate().to_string(), model.target.arity()));
    let mut out: Vec<(String, usize)> = set.into_iter().collect();
    out.sort();
    out
}

fn collect_signatures(node: &TreeNode, set: &mut HashSet<(String, usize)>) {
    if let TreeNode::Inner { tests, yes, no } = node {
        for a in tests {
            set.insert((a.predicate().to_string(), a.arity()));
        }
        collect_signatures(yes, set);
        collect_signatures(no, set);
    }
}

/// A random linear extension of the product order on `rows x cols`: a
/// visit order of all pairs in which (j,k) never precedes (j',k') when
/// j' <= j and k' <= k.  Used to probe merge-order independence.
pub fn random_linear_extension(seed: u64, rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed = vec![vec![false; cols]; rows];
    let mut available = vec![(0usize, 0usize)];
    let mut out = Vec::with_capacity(rows * cols);
    while !available.is_empty() {
        let pick = rng.gen_range(0..available.len());
        let (j, k) = available.swap_remove(pick);
        placed[j][k] = true;
        out.push((j, k));
        // a pair enters the pool exactly when its last predecessor lands
        if j + 1 < rows && (k == 0 || placed[j + 1][k - 1]) {
            available.push((j + 1, k));
        }
        if k + 1 < cols && (j == 0 || placed[j - 1][k + 1]) {
            available.push((j, k + 1));
        }
    }
    out
}

/// Deterministic generator of ensembles, fact bases and example splits.
pub struct Synth {
    rng: ChaCha8Rng,
}

impl Synth {
    pub fn new(seed: u64) -> Synth {
        Synth {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A small random shape: 2-4 trees of depth <= 3 over <= 3 background
    /// predicates and <= 5 constants.
    pub fn random_spec(&mut self) -> SynthSpec {
        SynthSpec {
            trees: self.rng.gen_range(2..=4),
            max_depth: self.rng.gen_range(1..=3),
            predicates: self.rng.gen_range(1..=3),
            constants: self.rng.gen_range(2..=5),
            target_arity: self.rng.gen_range(1..=2),
            combine: if self.rng.gen_bool(0.5) {
                CombineMode::Sum
            } else {
                CombineMode::Average
            },
        }
    }

    /// A random ensemble of the given shape.
    pub fn model(&mut self, spec: &SynthSpec) -> Model {
        let head_vars = ["a", "b", "c"];
        let target = Atom::new(
            "Goal",
            head_vars[..spec.target_arity]
                .iter()
                .map(|v| Term::var(*v))
                .collect(),
        );
        let arities: Vec<usize> = (0..spec.predicates)
            .map(|_| self.rng.gen_range(1..=2))
            .collect();
        let mut trees = Vec::with_capacity(spec.trees);
        for _ in 0..spec.trees {
            let mut fresh = 0;
            let scope: Vec<String> = target.variables().map(String::from).collect();
            let root = self.node(spec, &arities, scope, 0, &mut fresh);
            trees.push(TildeTree::from_unindexed(root).expect("generated tree is valid"));
        }
        Model {
            target,
            combine: spec.combine,
            trees,
        }
    }

    fn node(
        &mut self,
        spec: &SynthSpec,
        arities: &[usize],
        scope: Vec<String>,
        depth: usize,
        fresh: &mut usize,
    ) -> TreeNode {
        let split = depth < spec.max_depth && (depth == 0 || self.rng.gen_bool(0.7));
        if !split {
            return TreeNode::Leaf {
                value: self.rng.gen_range(-5.0..5.0),
                leaf_index: 0,
            };
        }
        let mut tests = Vec::new();
        let mut yes_scope = scope.clone();
        for _ in 0..self.rng.gen_range(1..=2) {
            let p = self.rng.gen_range(0..arities.len());
            let args = (0..arities[p])
                .map(|_| {
                    let roll = self.rng.gen_range(0..4);
                    if roll < 2 && !yes_scope.is_empty() {
                        let v = &yes_scope[self.rng.gen_range(0..yes_scope.len())];
                        Term::var(v.clone())
                    } else if roll == 2 {
                        let v = format!("v{fresh}");
                        *fresh += 1;
                        yes_scope.push(v.clone());
                        Term::var(v)
                    } else {
                        Term::constant(format!("C{}", self.rng.gen_range(0..spec.constants)))
                    }
                })
                .collect();
            tests.push(Atom::new(format!("R{p}"), args));
        }
        let yes = self.node(spec, arities, yes_scope, depth + 1, fresh);
        let no = self.node(spec, arities, scope, depth + 1, fresh);
        TreeNode::Inner {
            tests,
            yes: Box::new(yes),
            no: Box::new(no),
        }
    }

    /// A random fact base over the model's background signatures: every
    /// ground tuple is included independently with probability `density`.
    pub fn facts(&mut self, model: &Model, constants: &[String], density: f64) -> Vec<Atom> {
        let mut facts = Vec::new();
        for (pred, arity) in background_signatures(model) {
            let template = Atom::new(
                pred,
                (0..arity).map(|i| Term::var(format!("x{i}"))).collect(),
            );
            for inst in all_ground_instances(&template, constants) {
                if self.rng.gen_bool(density) {
                    facts.push(inst);
                }
            }
        }
        facts
    }

    /// Sample `count` distinct instances and split them into positives and
    /// negatives (at least one of each when `count >= 2`).
    pub fn split_examples(&mut self, instances: &[Atom], count: usize) -> (Vec<Atom>, Vec<Atom>) {
        let mut picked: Vec<Atom> = instances.to_vec();
        picked.shuffle(&mut self.rng);
        picked.truncate(count);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, atom) in picked.into_iter().enumerate() {
            let label_pos = if count >= 2 && i == 0 {
                true
            } else if count >= 2 && i == 1 {
                false
            } else {
                self.rng.gen_bool(0.5)
            };
            if label_pos {
                pos.push(atom);
            } else {
                neg.push(atom);
            }
        }
        (pos, neg)
    }
}

/// An ensemble built to resist compression: each tree is a chain of five
/// leaves whose tests use tree-unique predicates, so no group ever
/// subsumes another and the merged list grows as the full cross-product
/// (5^n rules for n trees).  Useful for exercising deadline handling.
pub fn stress_model(trees: usize) -> Model {
    let target = Atom::new("Goal", vec![Term::var("a")]);
    let mut out = Vec::with_capacity(trees);
    for t in 0..trees {
        let mut node = TreeNode::Inner {
            tests: vec![Atom::new(
                format!("S{t}x3"),
                vec![Term::var("a"), Term::var("u3")],
            )],
            yes: Box::new(TreeNode::Leaf {
                value: (t * 10) as f64,
                leaf_index: 0,
            }),
            no: Box::new(TreeNode::Leaf {
                value: (t * 10 + 1) as f64,
                leaf_index: 0,
            }),
        };
        for level in (0..3).rev() {
            node = TreeNode::Inner {
                tests: vec![Atom::new(
                    format!("S{t}x{level}"),
                    vec![Term::var("a"), Term::var(format!("u{level}"))],
                )],
                yes: Box::new(node),
                no: Box::new(TreeNode::Leaf {
                    value: (t * 10 + 5 + level) as f64,
                    leaf_index: 0,
                }),
            };
        }
        out.push(TildeTree::from_unindexed(node).expect("stress tree is valid"));
    }
    Model {
        target,
        combine: CombineMode::Sum,
        trees: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{parse_model, write_model};

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let mk = |seed| {
            let mut s = Synth::new(seed);
            let spec = s.random_spec();
            let model = s.model(&spec);
            let consts = constant_pool(spec.constants);
            let facts = s.facts(&model, &consts, 0.4);
            (write_model(&model), facts)
        };
        assert_eq!(mk(7), mk(7));
        assert_ne!(mk(7).0, mk(8).0);
    }

    #[test]
    fn generated_models_round_trip_through_the_text_format() {
        let mut s = Synth::new(42);
        for _ in 0..20 {
            let spec = s.random_spec();
            let model = s.model(&spec);
            let text = write_model(&model);
            let parsed = parse_model(&text).unwrap();
            assert_eq!(write_model(&parsed), text);
        }
    }

    #[test]
    fn ground_instances_cover_the_full_product() {
        let head = Atom::new("Goal", vec![Term::var("a"), Term::var("b")]);
        let consts = constant_pool(3);
        let all = all_ground_instances(&head, &consts);
        assert_eq!(all.len(), 9);
        let distinct: HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 9);
    }

    #[test]
    fn fuzz_instances_are_distinct_and_seeded() {
        let head = Atom::new("Goal", vec![Term::var("a"), Term::var("b")]);
        let consts = constant_pool(20);
        let a = fuzz_instances(&head, &consts, 50, 3);
        let b = fuzz_instances(&head, &consts, 50, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        let distinct: HashSet<_> = a.iter().collect();
        assert_eq!(distinct.len(), 50);
    }

    #[test]
    fn linear_extensions_respect_the_product_order() {
        for seed in 0..20 {
            let order = random_linear_extension(seed, 4, 3);
            assert_eq!(order.len(), 12);
            let pos = |p: (usize, usize)| order.iter().position(|&q| q == p).unwrap();
            for j in 0..4 {
                for k in 0..3 {
                    if j + 1 < 4 {
                        assert!(pos((j, k)) < pos((j + 1, k)));
                    }
                    if k + 1 < 3 {
                        assert!(pos((j, k)) < pos((j, k + 1)));
                    }
                }
            }
            assert_eq!(order[0], (0, 0));
            assert_eq!(*order.last().unwrap(), (3, 2));
        }
    }

    #[test]
    fn stress_trees_have_five_paths_each() {
        let model = stress_model(3);
        assert_eq!(model.trees.len(), 3);
        for tree in &model.trees {
            assert_eq!(tree.path_count(), 5);
        }
    }

    #[test]
    fn example_splits_have_both_labels() {
        let mut s = Synth::new(9);
        let head = Atom::new("Goal", vec![Term::var("a"), Term::var("b")]);
        let all = all_ground_instances(&head, &constant_pool(5));
        let (pos, neg) = s.split_examples(&all, 10);
        assert_eq!(pos.len() + neg.len(), 10);
        assert!(!pos.is_empty());
        assert!(!neg.is_empty());
    }
}
