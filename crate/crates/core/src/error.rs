use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("matrix is not Hermitian: ‖M − M*‖ = {residual:.3e}")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrices do not commute: residual {residual:.3e} between entries {i} and {j}")]
    NotCommuting { i: usize, j: usize, residual: f64 },
    #[error("simultaneous triangularization failed after {attempts} attempts (residual {residual:.3e})")]
    TriangularizationFailed { attempts: usize, residual: f64 },
    #[error("root finding on the companion matrix did not converge")]
    RootFindingFailed,
    #[error("grid of {requested} points exceeds the cap of {cap}")]
    GridTooLarge { requested: u128, cap: usize },
    #[error("operator is not a contraction: ‖P‖ = {norm:.6}")]
    NotContraction { norm: f64 },
    #[error("defect solve is ill-conditioned: condition number {condition:.3e}")]
    DefectSolveIllConditioned { condition: f64 },
    #[error("fundamental equation leaks outside the defect space: {leakage:.3e}")]
    LeakageDetected { leakage: f64 },
    #[error("unitary subspace does not reduce S_{index}: residual {residual:.3e}")]
    NotReducing { index: usize, residual: f64 },
    #[error("truncation depth {depth} is too shallow (need at least {required})")]
    TruncationTooShallow { depth: usize, required: usize },
    #[error("representation split residual {residual:.3e} is too large")]
    SplitResidualLarge { residual: f64 },
    #[error("power iteration did not converge after {iterations} steps (last increment {increment:.3e})")]
    NoConvergence { iterations: usize, increment: f64 },
    #[error("operator has a unitary part of dimension {dim}")]
    NotCnu { dim: usize },
    #[error("S_{index}*P and PS_{index}* differ by {residual:.3e}")]
    CommutationViolated { index: usize, residual: f64 },
    #[error("Q is ill-conditioned on its range: condition number {condition:.3e}")]
    QInverseIllConditioned { condition: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("function is not inner: boundary isometry residual {residual:.3e}")]
    NotInner { residual: f64 },
    #[error("compressed operator is not block Toeplitz: structure residual {residual:.3e}")]
    NotToeplitz { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
