use thiserror::Error;

#[derive(Error, Debug)]
pub enum DiscError {
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: element index {index} out of range for ground set of size {n}")]
    IndexOutOfRange { line: usize, index: usize, n: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("entropy condition violated: sum {sum:.6} exceeds limit {limit:.6}")]
    EntropyViolated { sum: f64, limit: f64 },

    #[error("random walk failed to freeze half the coordinates after {restarts} restarts (best frozen {best_frozen}/{needed})")]
    WalkFailed { restarts: usize, best_frozen: usize, needed: usize },

    #[error("degree bound violated: element {element} has degree {degree} > {bound}")]
    DegreeExceeded { element: usize, degree: usize, bound: usize },

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("coloring did not converge within {rounds} rounds")]
    TooManyRounds { rounds: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("internal invariant broken: {0}")]
    Internal(String),
}

impl DiscError {
    /// Process exit code category: 2 parse/config, 3 precondition, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            DiscError::Parse { .. } | DiscError::IndexOutOfRange { .. } => 2,
            DiscError::Precondition(_)
            | DiscError::EntropyViolated { .. }
            | DiscError::DegreeExceeded { .. }
            | DiscError::WidthMismatch { .. } => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, DiscError>;
