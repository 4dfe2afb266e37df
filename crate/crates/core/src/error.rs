use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (zero pivot at column {pivot})")]
    Singular { pivot: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("structured mesh needs nx, ny >= 2 (got nx={nx}, ny={ny})")]
    TooFewCells { nx: usize, ny: usize },
    #[error("degenerate rectangle: width and height must be positive and finite")]
    DegenerateRectangle,
    #[error("invalid mesh: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("file truncated: {0}")]
    Truncated(String),
    #[error("fingerprint mismatch: file has {found:#018x}, space has {expected:#018x}")]
    FingerprintMismatch { expected: u64, found: u64 },
    #[error("inconsistent file: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("time step must be positive and finite")]
    InvalidTimeStep,
    #[error("viscosity must be positive")]
    InvalidViscosity,
    #[error("end time {t_end} is not a positive integer multiple of dt {dt}")]
    IncompatibleEndTime { t_end: f64, dt: f64 },
    #[error("Newton iteration did not converge at step {step} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("singular Jacobian at step {step}: {source}")]
    Singular { step: usize, source: LinalgError },
    #[error("non-finite values at step {step}")]
    NonFinite { step: usize },
    #[error("pressure gauge: expected one constant-pressure null mode")]
    Gauge,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PodError {
    #[error("snapshot ensemble is empty")]
    EmptyEnsemble,
    #[error("space fingerprint mismatch: snapshots {found:#018x}, operators {expected:#018x}")]
    FingerprintMismatch { expected: u64, found: u64 },
    #[error("requested r={requested} modes but the numerical rank of the correlation matrix is {rank}")]
    RankExceeded { requested: usize, rank: usize },
    #[error("eigenvalue lambda_{index}={value:e} is below the drop tolerance")]
    EigenvalueBelowTolerance { index: usize, value: f64 },
    #[error("cutoff {cutoff} exceeds the {retained} retained modes")]
    CutoffOutOfRange { cutoff: usize, retained: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RomError {
    #[error("time step must be positive and finite")]
    InvalidTimeStep,
    #[error("reduced Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("non-finite reduced state at step {step}")]
    NonFinite { step: usize },
    #[error("space fingerprint mismatch: basis {found:#018x}, operators {expected:#018x}")]
    FingerprintMismatch { expected: u64, found: u64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("mean-centered bases need a lifting the reduced system does not carry; build the basis without centering")]
    CenteredBasis,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VmsError {
    #[error("VMS cutoff R={cutoff} must satisfy 0 <= R <= r={r}")]
    InvalidCutoff { cutoff: usize, r: usize },
    #[error("leading stiffness block S_R is singular (pivot {pivot:e} <= tolerance {tolerance:e}); the gradients of the first R modes are linearly dependent, choose a smaller R")]
    SingularLeadingBlock { pivot: f64, tolerance: f64 },
    #[error("eddy viscosity must be non-negative (got {0})")]
    NegativeEddyViscosity(f64),
    #[error("time step must be positive and finite")]
    InvalidTimeStep,
    #[error("dissipation identity violated at step {step}: relative gap {gap:e}")]
    DissipationDefect { step: usize, gap: f64 },
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("empty field sequence")]
    EmptySequence,
    #[error("time grids share no common subdivision")]
    GridMismatch,
    #[error("convergence rate needs positive errors and parameters")]
    NonPositive,
    #[error("trajectory lacks the step-2 ledger needed by the audit")]
    MissingLedger,
    #[error("stability audit failed: {0}")]
    AuditFailed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Crate-wide error for pipeline-level operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Vms(#[from] VmsError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Validation failures (bad inputs) as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Mesh(_)
                | Error::Config(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Pod(PodError::FingerprintMismatch { .. })
                | Error::Pod(PodError::RankExceeded { .. })
                | Error::Pod(PodError::CutoffOutOfRange { .. })
                | Error::Pod(PodError::EmptyEnsemble)
                | Error::Pod(PodError::Dimension(_))
                | Error::Vms(VmsError::InvalidCutoff { .. })
                | Error::Vms(VmsError::NegativeEddyViscosity(_))
                | Error::Vms(VmsError::InvalidTimeStep)
                | Error::Rom(RomError::InvalidTimeStep)
                | Error::Rom(RomError::FingerprintMismatch { .. })
                | Error::Rom(RomError::CenteredBasis)
                | Error::Rom(RomError::Dimension(_))
                | Error::Vms(VmsError::Rom(RomError::InvalidTimeStep))
                | Error::Solver(SolverError::InvalidTimeStep)
                | Error::Solver(SolverError::InvalidViscosity)
                | Error::Solver(SolverError::IncompatibleEndTime { .. })
                | Error::Diagnostics(
                    DiagnosticsError::GridMismatch
                        | DiagnosticsError::MissingLedger
                        | DiagnosticsError::Dimension(_)
                        | DiagnosticsError::EmptySequence
                )
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
