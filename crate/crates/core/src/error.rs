use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("rank-one downdate leaves the positive-definite cone at column {column}")]
    DowndateBreaksPD { column: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {0:e} is outside the domain z > 0")]
    DomainError(f64),

    #[error("potential `{name}` is not admissible for dimension {n}")]
    InadmissiblePotential { name: String, n: usize },

    #[error("root of the scalar equation could not be bracketed")]
    RootNotBracketed,

    #[error("scalar solve did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("curvature condition violated: s'y = {0:e}")]
    CurvatureViolation(f64),

    #[error("sparsity pattern is not chordal; chordless cycle {cycle:?}")]
    NotChordal { cycle: Vec<usize> },

    #[error("clique {clique} principal block is not positive definite")]
    CliqueBlockNotPD { clique: usize },

    #[error("variational oracle did not converge (gradient norm {0:e})")]
    OracleNoConvergence(f64),

    #[error("line search failed after {trials} trials")]
    LineSearchFail { trials: usize },

    #[error("search direction is not a descent direction (slope {0:e})")]
    NotDescent(f64),

    #[error("transform is singular or too ill-conditioned (condition {0:e})")]
    SingularTransform(f64),
}
