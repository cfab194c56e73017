use thiserror::Error;

/// Failures reported by the numerical routines.
///
/// Variants split into two families: invalid input (the caller asked for
/// something outside the domain of the computation) and numerical failure
/// (the input was fine but the algorithm did not reach its target).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {d} out of range: {reason}")]
    DimensionOutOfRange { d: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("det A below threshold: |det A| = {det:e} <= 1e-12")]
    SingularCone { det: f64 },

    #[error("gapless symbol: |h(k)| = {norm:e} < 1e-12")]
    GaplessSymbol { norm: f64 },

    #[error("zero mass: m = 0 leaves no spectral gap, index undefined")]
    ZeroMass,

    #[error("quadrature not converged: estimated error {achieved:e} > tol {requested:e} after {evaluations} evaluations")]
    QuadratureNotConverged {
        achieved: f64,
        requested: f64,
        evaluations: usize,
    },

    #[error("ambiguous kernel: singular value {sigma:e} too close to threshold {threshold:e}; refine the grid")]
    AmbiguousKernel { sigma: f64, threshold: f64 },

    #[error("branch lost at zeta = {zeta}: best overlap {overlap:.4} < 0.9")]
    BranchLost { zeta: f64, overlap: f64 },

    #[error("incomplete coverage: branch energies span [{lo}, {hi}], switch support needs [{need_lo}, {need_hi}]")]
    IncompleteCoverage {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("tracking lost between theta = {theta_from} and {theta_to}: best overlap {overlap:.4}")]
    TrackingLost {
        theta_from: f64,
        theta_to: f64,
        overlap: f64,
    },

    #[error("gap closed at theta = {theta}: {detail}")]
    GapClosed { theta: f64, detail: String },

    #[error("eigensolver did not converge: {0}")]
    EigenNotConverged(String),

    #[error("singular matrix in {0}")]
    SingularMatrix(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNotConverged { .. }
                | Error::AmbiguousKernel { .. }
                | Error::BranchLost { .. }
                | Error::TrackingLost { .. }
                | Error::GapClosed { .. }
                | Error::EigenNotConverged(_)
                | Error::SingularMatrix(_)
        )
    }

    /// Short machine-readable tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionOutOfRange { .. } => "DimensionOutOfRange",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SingularCone { .. } => "SingularCone",
            Error::GaplessSymbol { .. } => "GaplessSymbol",
            Error::ZeroMass => "ZeroMass",
            Error::QuadratureNotConverged { .. } => "QuadratureNotConverged",
            Error::AmbiguousKernel { .. } => "AmbiguousKernel",
            Error::BranchLost { .. } => "BranchLost",
            Error::IncompleteCoverage { .. } => "IncompleteCoverage",
            Error::SupportViolation(_) => "SupportViolation",
            Error::TrackingLost { .. } => "TrackingLost",
            Error::GapClosed { .. } => "GapClosed",
            Error::EigenNotConverged(_) => "EigenNotConverged",
            Error::SingularMatrix(_) => "SingularMatrix",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
