use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} outside the supported range {min}..={max}")]
    Dimension { dim: usize, min: usize, max: usize },

    #[error("coefficient matrix is not skew-symmetric at ({row}, {col})")]
    NotSkew { row: usize, col: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("vector has norm {norm}, expected a unit vector")]
    NonUnitVector { norm: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("degree {degree} is invalid for {op} in dimension {dim}")]
    Degree {
        op: &'static str,
        degree: usize,
        dim: usize,
    },

    #[error("expected odd dimension, got {0}")]
    EvenDimension(usize),

    #[error("eigensolver did not converge: {0}")]
    EigenSolver(String),

    #[error("singular constraint: c1*c2 - 1 = {0:e}")]
    SingularConstraint(f64),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grids do not match")]
    GridMismatch,

    #[error("point outside the domain: {0}")]
    OutOfDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a pointwise dDT solution: residual {residual:e}")]
    NotDdt { residual: f64 },

    #[error("quadrature budget exhausted after {evaluations} evaluations")]
    QuadratureBudget { evaluations: usize },

    #[error("snapshot parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
