//! Property-based invariants for the logical data structures.

mod common;

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use common::pairwise_auc;
use cote_core::coverage::Label;
use cote_core::io::{parse_list, write_list};
use cote_core::logic::{
    canonical_key, group_atom_indices, standardize_apart, Atom, Clause, CombineMode,
    DecisionList, Term,
};
use cote_core::metrics::auc_roc;

fn arb_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        Just(Term::var("a")),
        Just(Term::var("x")),
        Just(Term::var("y")),
        Just(Term::var("z")),
        Just(Term::constant("C0")),
        Just(Term::constant("C1")),
    ]
}

fn arb_atom() -> impl Strategy<Value = Atom> {
    (0..3u8, proptest::collection::vec(arb_term(), 1..=2))
        .prop_map(|(p, args)| Atom::new(format!("R{p}"), args))
}

fn arb_body() -> impl Strategy<Value = Vec<Atom>> {
    proptest::collection::vec(arb_atom(), 1..=5)
}

fn head_vars() -> HashSet<String> {
    ["a".to_string()].into_iter().collect()
}

fn clause(body: Vec<Atom>) -> Clause {
    Clause::new(Atom::new("Goal", vec![Term::var("a")]), body, 1.0, vec![]).unwrap()
}

proptest! {
    /// Renaming existential variables injectively never changes a
    /// conjunction's canonical key.
    #[test]
    fn canonical_key_ignores_variable_names(body in arb_body(), perm in Just(vec!["x", "y", "z"]).prop_shuffle()) {
        let mut theta = HashMap::new();
        for (old, fresh) in ["x", "y", "z"].iter().zip(["q0", "q1", "q2"]) {
            theta.insert(old.to_string(), Term::var(fresh));
        }
        // then permute which fresh name goes where, keeping it injective
        let mut theta2 = HashMap::new();
        for (old, target) in ["q0", "q1", "q2"].iter().zip(perm.iter()) {
            theta2.insert(old.to_string(), Term::var(format!("w_{target}")));
        }
        let renamed = cote_core::logic::apply_substitution(&body, &theta);
        let renamed = cote_core::logic::apply_substitution(&renamed, &theta2);
        prop_assert_eq!(
            canonical_key(&body, &head_vars()),
            canonical_key(&renamed, &head_vars())
        );
    }

    /// The canonical key must not depend on the order atoms are listed in.
    #[test]
    fn canonical_key_ignores_atom_order((body, perm) in arb_body().prop_flat_map(|b| {
        let n = b.len();
        (Just(b), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    })) {
        let shuffled: Vec<Atom> = perm.iter().map(|&i| body[i].clone()).collect();
        prop_assert_eq!(
            canonical_key(&body, &head_vars()),
            canonical_key(&shuffled, &head_vars())
        );
    }

    /// Two clauses standardized apart with different tags share no
    /// existential variable, and their head variables stay untouched.
    #[test]
    fn standardizing_apart_separates_existentials(b0 in arb_body(), b1 in arb_body()) {
        let c0 = standardize_apart(&clause(b0), "t0");
        let c1 = standardize_apart(&clause(b1), "t1");
        let hv = head_vars();
        let vars = |c: &Clause| -> HashSet<String> {
            c.body().iter().flat_map(|a| a.variables()).map(String::from)
                .filter(|v| !hv.contains(v)).collect()
        };
        prop_assert!(vars(&c0).is_disjoint(&vars(&c1)));
        prop_assert_eq!(c0.head().to_string(), "Goal(a)");
    }

    /// The group partition equals connected components under "shares an
    /// existential variable", computed here by union-find.
    #[test]
    fn groups_are_connected_components(body in arb_body()) {
        let hv = head_vars();
        let n = body.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        for i in 0..n {
            for j in i + 1..n {
                let vi: HashSet<&str> = body[i].variables().filter(|v| !hv.contains(*v)).collect();
                let shares = body[j].variables().any(|v| !hv.contains(v) && vi.contains(v));
                if shares {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
            }
        }
        let mut expect: HashMap<usize, HashSet<usize>> = HashMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            expect.entry(r).or_default().insert(i);
        }
        let expect: HashSet<Vec<usize>> = expect.into_values().map(|s| {
            let mut v: Vec<usize> = s.into_iter().collect();
            v.sort();
            v
        }).collect();
        let got: HashSet<Vec<usize>> =
            group_atom_indices(&body, &hv).into_iter().collect();
        prop_assert_eq!(got, expect);
    }

    /// Every finite value written into a list file reads back bit-exact.
    #[test]
    fn list_values_round_trip_bit_exactly(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let head = Atom::new("Goal", vec![Term::var("a")]);
        let rules = vec![
            Clause::new(head.clone(), vec![Atom::new("R0", vec![Term::var("a")])], v, vec![]).unwrap(),
            Clause::new(head.clone(), vec![], 0.25, vec![]).unwrap(),
        ];
        let list = DecisionList::new(head, rules, CombineMode::Sum, 3).unwrap();
        let text = write_list(&list, None);
        let (again, _) = parse_list(&text).unwrap();
        prop_assert_eq!(again.rules()[0].value().to_bits(), v.to_bits());
        prop_assert_eq!(again.tree_count(), 3);
    }

    /// The rank-statistic AUC equals O(n^2) pair counting.
    #[test]
    fn auc_matches_pair_counting(raw in proptest::collection::vec((-8i8..8, any::<bool>()), 2..60)) {
        let scored: Vec<(f64, Label)> = raw.iter()
            .map(|(s, p)| (*s as f64 / 4.0, if *p { Label::Pos } else { Label::Neg }))
            .collect();
        let pos = scored.iter().filter(|(_, l)| *l == Label::Pos).count();
        prop_assume!(pos > 0 && pos < scored.len());
        let fast = auc_roc(&scored).unwrap();
        let slow = pairwise_auc(&scored);
        prop_assert!((fast - slow).abs() < 1e-12, "fast {fast} vs slow {slow}");
    }
}
