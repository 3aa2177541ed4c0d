//! First-order regression trees and their decision-list reading.
//!
//! An inner node tests the conjunction of every atom collected along the
//! yes-branches so far *plus* its own atoms, existentially and from scratch;
//! success goes left (yes), failure right (no).  Reading the leaves off in
//! yes-before-no depth-first order and keeping only the positive branch
//! atoms yields an ordered decision list equivalent to the tree: whenever a
//! no-branch was taken, some earlier rule carrying the refused conjunction
//! already failed to match, so the negative half of the path formula is
//! implied by falling through.

use std::collections::HashMap;

use crate::coverage::{head_binding, satisfies, FactBase};
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, CombineMode, DecisionList, LeafRef};

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
        /// Position of the leaf in yes-first depth-first order.
        leaf_index: usize,
    },
    Inner {
        /// Atoms added to the path conjunction at this node (nonempty).
        tests: Vec<Atom>,
        yes: Box<TreeNode>,
        no: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TildeTree {
    root: TreeNode,
}

impl TildeTree {
    /// Wrap a root node, checking leaf values are finite, inner tests are
    /// nonempty, and leaf indices follow yes-first depth-first order.
    pub fn new(root: TreeNode) -> Result<TildeTree> {
        fn check(node: &TreeNode, next_leaf: &mut usize) -> Result<()> {
            match node {
                TreeNode::Leaf { value, leaf_index } => {
                    if !value.is_finite() {
                        return Err(Error::Invariant(format!(
                            "leaf value must be finite, got {value}"
                        )));
                    }
                    if *leaf_index != *next_leaf {
                        return Err(Error::Invariant(format!(
                            "leaf index {leaf_index} out of depth-first order (expected {next_leaf})"
                        )));
                    }
                    *next_leaf += 1;
                    Ok(())
                }
                TreeNode::Inner { tests, yes, no } => {
                    if tests.is_empty() {
                        return Err(Error::Invariant(
                            "inner node must test at least one atom".to_string(),
                        ));
                    }
                    check(yes, next_leaf)?;
                    check(no, next_leaf)
                }
            }
        }
        let mut next = 0;
        check(&root, &mut next)?;
        Ok(TildeTree { root })
    }

    /// Build a tree assigning leaf indices in depth-first order, so callers
    /// constructing nodes by hand don't have to count leaves themselves.
    pub fn from_unindexed(root: TreeNode) -> Result<TildeTree> {
        fn renumber(node: TreeNode, next: &mut usize) -> TreeNode {
            match node {
                TreeNode::Leaf { value, .. } => {
                    let leaf = TreeNode::Leaf {
                        value,
                        leaf_index: *next,
                    };
                    *next += 1;
                    leaf
                }
                TreeNode::Inner { tests, yes, no } => {
                    let yes = Box::new(renumber(*yes, next));
                    let no = Box::new(renumber(*no, next));
                    TreeNode::Inner { tests, yes, no }
                }
            }
        }
        let mut next = 0;
        TildeTree::new(renumber(root, &mut next))
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    /// Number of leaves = number of root-to-leaf paths.
    pub fn path_count(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Inner { yes, no, .. } => walk(yes) + walk(no),
            }
        }
        walk(&self.root)
    }

    /// Maximum number of edges from the root to any leaf.
    pub fn max_depth(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Inner { yes, no, .. } => 1 + walk(yes).max(walk(no)),
            }
        }
        walk(&self.root)
    }
}

/// Read a tree as an ordered decision list: one rule per leaf in yes-first
/// depth-first order, each rule's body being the atoms of the yes-branches
/// on its path.  The all-no path contributes the final empty-body rule.
pub fn tree_to_list(
    tree: &TildeTree,
    tree_index: usize,
    head: &Atom,
    combine: CombineMode,
) -> Result<DecisionList> {
    fn walk(node: &TreeNode, path: &mut Vec<Atom>, head: &Atom, tree_index: usize, rules: &mut Vec<Clause>) -> Result<()> {
        match node {
            TreeNode::Leaf { value, leaf_index } => {
                rules.push(Clause::new(
                    head.clone(),
                    path.clone(),
                    *value,
                    vec![LeafRef {
                        tree: tree_index,
                        leaf: *leaf_index,
                    }],
                )?);
                Ok(())
            }
            TreeNode::Inner { tests, yes, no } => {
                let depth = path.len();
                path.extend(tests.iter().cloned());
                walk(yes, path, head, tree_index, rules)?;
                path.truncate(depth);
                walk(no, path, head, tree_index, rules)
            }
        }
    }

    let mut rules = Vec::with_capacity(tree.path_count());
    walk(&tree.root, &mut Vec::new(), head, tree_index, &mut rules)?;
    DecisionList::new(head.clone(), rules, combine, 1)
}

/// Route a bound head instance down one tree.  At each inner node the whole
/// accumulated conjunction (yes-branch atoms so far plus this node's tests)
/// is evaluated existentially against the fact base.
pub fn eval_tree(tree: &TildeTree, fb: &FactBase, binding: &HashMap<String, String>) -> f64 {
    let mut path: Vec<Atom> = Vec::new();
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Leaf { value, .. } => return *value,
            TreeNode::Inner { tests, yes, no } => {
                let mut candidate = path.clone();
                candidate.extend(tests.iter().cloned());
                if satisfies(fb, binding, &candidate) {
                    path = candidate;
                    node = yes;
                } else {
                    node = no;
                }
            }
        }
    }
}

/// Ensemble prediction for one ground head instance: per-tree values summed
/// in tree order, divided by the tree count only in `Average` mode.
pub fn eval_ensemble(
    head: &Atom,
    trees: &[TildeTree],
    combine: CombineMode,
    fb: &FactBase,
    instance: &Atom,
) -> Result<f64> {
    if trees.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let binding = head_binding(head, instance)?;
    let mut total = 0.0;
    for tree in trees {
        total += eval_tree(tree, fb, &binding);
    }
    Ok(match combine {
        CombineMode::Sum => total,
        CombineMode::Average => total / trees.len() as f64,
    })
}
