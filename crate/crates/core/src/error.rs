use std::time::Duration;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline phase in which a global time budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Per-tree transformation and clause reduction.
    Prep,
    /// Pairwise subsumption matrix construction.
    SubsumptionMatrix,
    /// Per-group coverage computation.
    CoverageBuild,
    /// Incremental list merging.
    Merge,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Prep => "prep",
            Phase::SubsumptionMatrix => "subsumption_matrix",
            Phase::CoverageBuild => "coverage_build",
            Phase::Merge => "merge",
        };
        f.write_str(s)
    }
}

/// What had been accomplished when a run was aborted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PartialProgress {
    /// Merge iterations fully completed (trees folded in beyond the first).
    pub iterations_done: usize,
    /// Rules in the working list when the abort fired.
    pub rules_so_far: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{file}:{line}:{col}: {msg}")]
    Parse {
        file: String,
        line: u32,
        col: u32,
        msg: String,
    },

    #[error("example {atom} appears in both the positive and the negative set")]
    ConflictingExample { atom: String },

    #[error("ensemble contains no trees")]
    EmptyEnsemble,

    #[error("need at least one positive and one negative example")]
    DegenerateLabels,

    #[error("scores must be finite (found NaN or infinity)")]
    InvalidScore,

    #[error("global time budget exhausted during {phase} after {elapsed:?}")]
    BudgetExhausted {
        phase: Phase,
        elapsed: Duration,
        progress: PartialProgress,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Build a parse error with a location; the file name is stamped later by
    /// the caller that knows which path the text came from.
    pub fn parse(line: u32, col: u32, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: "<input>".to_string(),
            line,
            col,
            msg: msg.into(),
        }
    }

    /// Attach a file name to a parse error, leaving other errors untouched.
    pub fn in_file(self, name: &str) -> Error {
        match self {
            Error::Parse {
                line, col, msg, ..
            } => Error::Parse {
                file: name.to_string(),
                line,
                col,
                msg,
            },
            other => other,
        }
    }
}
