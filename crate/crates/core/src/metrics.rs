//! Ranking quality measures, compression statistics and the run report.

use std::time::Duration;

use num_bigint::BigUint;

use crate::compress::CompressionMode;
use crate::coverage::Label;
use crate::error::{Error, Phase, Result};
use crate::logic::DecisionList;
use crate::tree::TildeTree;

/// Area under the ROC curve by tie-averaged rank statistics: sort by
/// score, give tied scores their average rank, and normalize the positive
/// ranks' sum.  Exactly the probability that a random positive outranks a
/// random negative, counting ties as half.
pub fn auc_roc(scored: &[(f64, Label)]) -> Result<f64> {
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidScore);
    }
    let pos = scored.iter().filter(|(_, l)| *l == Label::Pos).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.partial_cmp(&scored[b].0).unwrap());

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scored[order[j]].0 == scored[order[i]].0 {
            j += 1;
        }
        // ranks are 1-based; everything in [i, j) shares the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if scored[idx].1 == Label::Pos {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }

    let p = pos as f64;
    let n = neg as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

/// Area under the precision-recall curve with step interpolation: walk the
/// examples by descending score, treating tied scores as one block, and
/// accumulate (recall gain) x (precision at the block).
pub fn auc_pr(scored: &[(f64, Label)]) -> Result<f64> {
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidScore);
    }
    let pos = scored.iter().filter(|(_, l)| *l == Label::Pos).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.partial_cmp(&scored[a].0).unwrap());

    let mut auc = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scored[order[j]].0 == scored[order[i]].0 {
            if scored[order[j]].1 == Label::Pos {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(auc)
}

/// How many rules the plain cross-product of the per-tree lists would
/// hold: the product of the trees' root-to-leaf path counts.  Grows
/// exponentially with the ensemble, hence the big integer.
pub fn naive_max_clauses(trees: &[TildeTree]) -> BigUint {
    let mut product = BigUint::from(1u32);
    for tree in trees {
        product *= BigUint::from(tree.path_count());
    }
    product
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionStats {
    /// Rules the uncompressed cross-product would have.
    pub rules_before: BigUint,
    /// Rules in the compressed list.
    pub rules_after: usize,
    pub avg_body_len: f64,
    /// Root-to-leaf paths summed over the ensemble.
    pub paths_total: usize,
    /// Deepest tree, in edges.
    pub max_depth: usize,
}

pub fn compression_stats(trees: &[TildeTree], list: &DecisionList) -> CompressionStats {
    CompressionStats {
        rules_before: naive_max_clauses(trees),
        rules_after: list.rules().len(),
        avg_body_len: list.avg_body_len(),
        paths_total: trees.iter().map(|t| t.path_count()).sum(),
        max_depth: trees.iter().map(|t| t.max_depth()).max().unwrap_or(0),
    }
}

/// Outcome of the post-compression self-check against the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Faithfulness {
    /// Agreed on every probed instance (training examples and fresh ones).
    Exact,
    /// Agreed on every training example (the example-based guarantee).
    TrainExact,
    /// Disagreed on this many probed instances.
    Violated(usize),
    /// Not checked (the run was cut short).
    Unchecked,
}

impl std::fmt::Display for Faithfulness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Faithfulness::Exact => write!(f, "exact"),
            Faithfulness::TrainExact => write!(f, "trainExact"),
            Faithfulness::Violated(n) => write!(f, "violated({n})"),
            Faithfulness::Unchecked => write!(f, "unchecked"),
        }
    }
}

/// Flat key=value summary of one compression run.  Deterministic except
/// for `wall_time_ms`.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: CompressionMode,
    pub stats: CompressionStats,
    pub wall_time: Duration,
    pub budget_aborts: u64,
    pub faithfulness: Faithfulness,
    /// Set when the run hit its deadline and produced only a partial result.
    pub aborted_phase: Option<Phase>,
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("mode={}\n", self.mode.as_str()));
        out.push_str(&format!("rules_before={}\n", self.stats.rules_before));
        out.push_str(&format!("rules_after={}\n", self.stats.rules_after));
        out.push_str(&format!("avg_body_len={:?}\n", self.stats.avg_body_len));
        out.push_str(&format!("paths_total={}\n", self.stats.paths_total));
        out.push_str(&format!("max_depth={}\n", self.stats.max_depth));
        out.push_str(&format!("wall_time_ms={}\n", self.wall_time.as_millis()));
        out.push_str(&format!("budget_aborts={}\n", self.budget_aborts));
        out.push_str(&format!("faithfulness={}\n", self.faithfulness));
        if let Some(phase) = &self.aborted_phase {
            out.push_str(&format!("aborted_phase={phase}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Neg, Pos};

    #[test]
    fn roc_perfect_reversed_and_tied() {
        let perfect = vec![(0.9, Pos), (0.8, Pos), (0.2, Neg), (0.1, Neg)];
        assert_eq!(auc_roc(&perfect).unwrap(), 1.0);
        let reversed = vec![(0.1, Pos), (0.2, Pos), (0.8, Neg), (0.9, Neg)];
        assert_eq!(auc_roc(&reversed).unwrap(), 0.0);
        let tied = vec![(0.5, Pos), (0.5, Neg), (0.5, Pos), (0.5, Neg)];
        assert_eq!(auc_roc(&tied).unwrap(), 0.5);
    }

    #[test]
    fn roc_matches_a_hand_computed_case() {
        // pairs: (0.9,+) beats both negatives; (0.5,+) ties one negative
        let scored = vec![(0.9, Pos), (0.5, Pos), (0.5, Neg), (0.1, Neg)];
        // pairwise: 2 wins + (1 win + 1 tie) = 3.5 of 4
        assert!((auc_roc(&scored).unwrap() - 0.875).abs() < 1e-15);
    }

    #[test]
    fn roc_rejects_degenerate_and_nan() {
        assert!(matches!(
            auc_roc(&[(0.5, Pos), (0.4, Pos)]),
            Err(Error::DegenerateLabels)
        ));
        assert!(matches!(
            auc_roc(&[(f64::NAN, Pos), (0.4, Neg)]),
            Err(Error::InvalidScore)
        ));
    }

    #[test]
    fn pr_perfect_and_uniform() {
        let perfect = vec![(0.9, Pos), (0.8, Pos), (0.2, Neg), (0.1, Neg)];
        assert_eq!(auc_pr(&perfect).unwrap(), 1.0);
        // one tied block: recall jumps to 1 at precision = prevalence
        let uniform = vec![(0.5, Pos), (0.5, Neg), (0.5, Neg), (0.5, Neg)];
        assert_eq!(auc_pr(&uniform).unwrap(), 0.25);
    }

    #[test]
    fn pr_matches_a_hand_computed_case() {
        let scored = vec![(0.9, Pos), (0.8, Neg), (0.7, Pos)];
        // blocks: R 0->1/2 at P=1, then R flat, then R 1/2->1 at P=2/3
        let expect = 0.5 + 0.5 * (2.0 / 3.0);
        assert!((auc_pr(&scored).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn naive_count_is_the_product_of_path_counts() {
        use crate::logic::{Atom, Term};
        use crate::tree::TreeNode;
        let leaf = |v: f64| TreeNode::Leaf {
            value: v,
            leaf_index: 0,
        };
        let a = TildeTree::from_unindexed(TreeNode::Inner {
            tests: vec![Atom::new("P", vec![Term::var("x")])],
            yes: Box::new(TreeNode::Inner {
                tests: vec![Atom::new("Q", vec![Term::var("x")])],
                yes: Box::new(leaf(1.0)),
                no: Box::new(leaf(2.0)),
            }),
            no: Box::new(leaf(3.0)),
        })
        .unwrap();
        let b = TildeTree::from_unindexed(TreeNode::Inner {
            tests: vec![Atom::new("R", vec![Term::var("x")])],
            yes: Box::new(leaf(1.0)),
            no: Box::new(leaf(2.0)),
        })
        .unwrap();
        assert_eq!(naive_max_clauses(&[a.clone(), b.clone()]), BigUint::from(6u32));
        let stats_list = crate::tree::tree_to_list(
            &b,
            0,
            &Atom::new("H", vec![Term::var("x")]),
            crate::logic::CombineMode::Sum,
        )
        .unwrap();
        let stats = compression_stats(&[a, b], &stats_list);
        assert_eq!(stats.paths_total, 5);
        assert_eq!(stats.max_depth, 2);
        assert_eq!(stats.rules_after, 2);
    }

    #[test]
    fn report_renders_flat_keys() {
        let report = RunReport {
            mode: CompressionMode::Scote,
            stats: CompressionStats {
                rules_before: BigUint::from(25u32),
                rules_after: 18,
                avg_body_len: 3.5,
                paths_total: 10,
                max_depth: 3,
            },
            wall_time: Duration::from_millis(12),
            budget_aborts: 0,
            faithfulness: Faithfulness::Exact,
            aborted_phase: None,
        };
        let text = report.render();
        assert!(text.contains("mode=scote\n"));
        assert!(text.contains("rules_before=25\n"));
        assert!(text.contains("avg_body_len=3.5\n"));
        assert!(text.contains("faithfulness=exact\n"));
        assert!(!text.contains("aborted_phase"));
    }
}
