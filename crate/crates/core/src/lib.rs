//! Compression of first-order regression-tree ensembles into ordered
//! decision lists.
//!
//! An ensemble of relational regression trees scores a ground query atom
//! by running it down every tree and combining the leaf values.  This
//! crate folds such an ensemble into a single first-match decision list
//! that scores queries the same way — either everywhere (the
//! subsumption-based variant, [`compress::scote`]) or on a given training
//! set (the example-based variant, [`compress::ecote`]) — and measures
//! how much smaller the list is than the naive cross-product of the
//! trees.
//!
//! The pieces compose bottom-up:
//!
//! * [`logic`] — terms, atoms, clauses, decision lists, variable-connected
//!   predicate groups and their canonical keys;
//! * [`subsumption`] — budgeted θ-subsumption between atom sets and the
//!   group-by-group subsumption matrix;
//! * [`coverage`] — fact bases, existential body satisfaction and example
//!   coverage bitsets;
//! * [`tree`] — the trees themselves, their list form and direct ensemble
//!   evaluation;
//! * [`compress`] — the merge pipeline;
//! * [`io`] — the text formats;
//! * [`metrics`] — ranking quality and compression statistics;
//! * [`synth`] — seeded generators for tests and benchmarks.

pub mod compress;
pub mod coverage;
pub mod error;
pub mod io;
pub mod logic;
pub mod metrics;
pub mod subsumption;
pub mod synth;
pub mod tree;

pub use compress::{
    add_clauses, check_coverage, ecote, merge_order, predict, prep, prune_clause, reduce_clause,
    reduce_list, scote, scote_ordered, Compressed, CompressionMode, GroupKeySpace, MergeStats,
    Prepared, ScoteOptions,
};
pub use coverage::{CoverageSet, EsCache, ExampleSet, FactBase, Label};
pub use error::{Error, Phase, Result};
pub use io::{parse_facts, parse_list, parse_model, write_facts, write_list, write_model, Model};
pub use logic::{Atom, Clause, CombineMode, DecisionList, LeafRef, PredicateGroup, Term};
pub use metrics::{
    auc_pr, auc_roc, compression_stats, naive_max_clauses, CompressionStats, Faithfulness,
    RunReport,
};
pub use subsumption::{
    build_sm, clause_reduction, theta_subsumes, Deadline, SearchBudget, SubsumeResult,
    SubsumptionMatrix,
};
pub use tree::{eval_ensemble, eval_tree, tree_to_list, TildeTree, TreeNode};
