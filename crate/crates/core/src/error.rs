use thiserror::Error;

/// Errors raised while building grids and fields.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("unsupported dimension {0}, expected 1, 2 or 3")]
    Dimension(usize),
    #[error("point count {0} must be even and at least 8")]
    PointCount(usize),
    #[error("half-width must be positive and finite, got {0}")]
    HalfWidth(f64),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("malformed profile: {0}")]
    Profile(String),
}

/// Errors raised by kernel construction and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel descriptor: {0}")]
    Descriptor(String),
    #[error("frequency {requested} exceeds the gridded kernel's resolved band {max}")]
    UnderResolved { requested: f64, max: f64 },
    #[error("symmetry group fixes a nontrivial subspace of dimension {0}")]
    NontrivialFixedSpace(usize),
    #[error("invalid symmetry generator: {0}")]
    Generator(String),
    #[error("operation requires a one-dimensional kernel, got n = {0}")]
    NotOneDimensional(usize),
}

/// Failures of the linear and transcritical hypothesis checks. `code` gives a
/// stable identifier used in reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypothesisError {
    #[error("I + K(0) is invertible (smallest singular value {smallest:.3e})")]
    NoNullspace { smallest: f64 },
    #[error("I + K(0) has a nullspace of dimension > 1 (second singular value {second:.3e})")]
    ExcessNullspace { second: f64 },
    #[error("left/right null vectors are nearly orthogonal (pairing {pairing:.3e})")]
    DegeneratePairing { pairing: f64 },
    #[error("Fourier determinant nearly vanishes at |xi| = {radius:.6} (|D| = {value:.3e})")]
    InvertibilityViolation { radius: f64, value: f64 },
    #[error("projected second-moment matrix is indefinite or singular (eigenvalues {eigenvalues:?})")]
    IndefiniteHessian { eigenvalues: Vec<f64> },
    #[error("N(0; mu) does not vanish (max |N(0; mu)| = {deviation:.3e})")]
    TrivialSolution { deviation: f64 },
    #[error("D_U N(0; 0) does not vanish (norm {norm:.3e})")]
    CriticalityViolation { norm: f64 },
    #[error("linear unfolding coefficient alpha = {alpha:.3e} is degenerate")]
    DegenerateUnfolding { alpha: f64 },
    #[error("quadratic coefficient beta = {beta:.3e} is degenerate")]
    DegenerateQuadratic { beta: f64 },
    #[error("cubic coefficient gamma = {gamma:.3e} is not negative, so no focusing ground state exists")]
    DefocusingCubic { gamma: f64 },
    #[error("no fold of the constant states was found: {0}")]
    FoldNotFound(String),
    #[error("component count mismatch: kernel has k = {kernel}, nonlinearity has k = {nonlinearity}")]
    ComponentMismatch { kernel: usize, nonlinearity: usize },
    #[error("constant branch root-finding diverged at mu = {mu} (last iterate {last:?})")]
    BranchDivergence { mu: f64, last: Vec<f64> },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl HypothesisError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoNullspace { .. } => "NoNullspace",
            Self::ExcessNullspace { .. } => "ExcessNullspace",
            Self::DegeneratePairing { .. } => "DegeneratePairing",
            Self::InvertibilityViolation { .. } => "InvertibilityViolation",
            Self::IndefiniteHessian { .. } => "IndefiniteHessian",
            Self::TrivialSolution { .. } => "TrivialSolution",
            Self::CriticalityViolation { .. } => "CriticalityViolation",
            Self::DegenerateUnfolding { .. } => "DegenerateUnfolding",
            Self::DegenerateQuadratic { .. } => "DegenerateQuadratic",
            Self::DefocusingCubic { .. } => "DefocusingCubic",
            Self::FoldNotFound(_) => "FoldNotFound",
            Self::ComponentMismatch { .. } => "ComponentMismatch",
            Self::BranchDivergence { .. } => "BranchDivergence",
            Self::Kernel(_) => "KernelError",
        }
    }
}

/// Errors from the normal-form construction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalFormError {
    #[error("matrix is not symmetric positive definite (eigenvalues {0:?})")]
    NotPositiveDefinite(Vec<f64>),
    #[error("complement block is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("multiplier inversion failed at dual node {node} (xi = {xi:?})")]
    Inversion { node: usize, xi: Vec<f64> },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Errors from the radial ground-state solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundStateError {
    #[error("unsupported ground-state parameters: {0}")]
    Parameters(String),
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },
    #[error("converged profile is not positive (min {min:.3e})")]
    NotPositive { min: f64 },
    #[error("linearization is degenerate on the symmetric subspace (smallest |Ritz value| {value:.3e})")]
    NondegeneracyFailure { value: f64 },
    #[error("linear solve stagnated (relative residual {0:.3e})")]
    Krylov(f64),
}

/// Errors from the rescaled Newton solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("alpha * mu must be positive (alpha = {alpha}, mu = {mu})")]
    Precondition { alpha: f64, mu: f64 },
    #[error("iterate left the trust ball (norm {norm:.3e} > radius {radius:.3e}) in {stage}")]
    NoContraction { stage: &'static str, norm: f64, radius: f64 },
    #[error("{stage} reached the iteration cap {iterations} (residual {residual:.3e})")]
    MaxIterations { stage: &'static str, iterations: usize, residual: f64 },
    #[error("Krylov solve stagnated at relative residual {0:.3e}")]
    KrylovStagnation(f64),
    #[error("symmetry projection corrected the iterate by {0:.3e}")]
    SymmetryDrift(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("cubic scaling requires vanishing quadratic coefficients (a200 = {0:.3e})")]
    CubicQuadratic(f64),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
    #[error(transparent)]
    GroundState(#[from] GroundStateError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Errors from sweeps and tail diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error("no parameter value converged")]
    AllFailed,
    #[error("tail window is below the noise floor ({0:.3e})")]
    WindowUnderResolved(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
