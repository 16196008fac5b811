//! Error type shared by every module in the crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes reported by the library.
///
/// Variants are grouped by the layer that produces them: document handling,
/// grid and density construction, density evolution, chart construction and
/// rate allocation. The CLI maps these onto process exit codes, so keep the
/// classification stable.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The ensemble document is not syntactically valid JSON.
    #[error("ensemble document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),

    /// The ensemble document parsed but violates a structural rule.
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    /// An edge type has no sockets on the named side, so the edge-perspective
    /// polynomials are undefined for it.
    #[error("edge type {edge} has zero sockets on the {side} side")]
    ZeroSockets { edge: usize, side: &'static str },

    /// Grid construction parameters are unusable.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two densities that must share a grid do not.
    #[error("operands live on different grids")]
    GridMismatch,

    /// A mass vector does not match the number of grid bins.
    #[error("mass vector has {got} entries, grid has {want} bins")]
    MassLength { got: usize, want: usize },

    /// A noise parameter that must be positive is not.
    #[error("noise parameter must be positive and finite, got {0}")]
    NonpositiveSigma(f64),

    /// A code rate outside the supported open interval.
    #[error("rate must lie in (0, 1), got {0}")]
    RateOutOfRange(f64),

    /// A logarithmic unit conversion was asked of a nonpositive value.
    #[error("cannot take a logarithm of nonpositive value {0}")]
    NonpositiveInLog(f64),

    /// A threshold bracket did not separate convergence from failure.
    #[error("threshold bracket is invalid: {0}")]
    InvalidBracket(String),

    /// A finite-difference step that must be positive is not.
    #[error("family derivative step must be positive, got {0}")]
    DegenerateStep(f64),

    /// The G-EXIT denominator vanished, so the functional is undefined here.
    #[error("G-EXIT denominator vanished (|den| = {0:.3e})")]
    VanishingDenominator(f64),

    /// A curve operation needs more points than it was given.
    #[error("curve needs at least two points, got {0}")]
    TooFewPoints(usize),

    /// Curve points are not sorted by their abscissa.
    #[error("curve points are not ordered by their abscissa")]
    UnorderedCurve,

    /// A chart was requested from a trace that recorded no snapshots.
    #[error("trace holds no snapshots; rerun with snapshot recording enabled")]
    EmptyTrace,

    /// A message density projected to a negative mean, which no physical
    /// message on a symmetric channel can have.
    #[error("projected mean is negative ({0:.6e})")]
    NegativeMean(f64),

    /// Quantizer construction parameters are unusable.
    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    /// Source model parameters are unusable.
    #[error("invalid source model: {0}")]
    InvalidSource(String),

    /// A numerical integration produced a non-finite value.
    #[error("numerical integration failed: {0}")]
    IntegrationFailure(String),

    /// An efficiency was requested against a nonpositive information total.
    #[error("mutual information must be positive to define an efficiency, got {0}")]
    NonpositiveInformation(f64),
}
