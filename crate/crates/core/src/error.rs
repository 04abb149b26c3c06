//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tableau construction, partitioning and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Basis indices are 1-based; `j = 0` is not a polynomial of the family.
    #[error("invalid basis index {0}: indices start at 1")]
    InvalidIndex(usize),

    /// A parameter is outside the range the operation supports.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Interpolatory weights require pairwise distinct abscissae.
    #[error("duplicate abscissae: nodes {0} and {1} coincide")]
    DuplicateNodes(usize, usize),

    /// The rule-of-thumb stage selection needs an even number of silent stages.
    #[error("k - s must be even for the symmetric stage selection (k = {k}, s = {s})")]
    Parity { k: usize, s: usize },

    /// Stage selection produced a degenerate index set.
    #[error("stage selection failed: {0}")]
    Selection(String),

    /// A matrix that must be inverted (I_s1, C, Phi) is numerically singular.
    #[error("singular matrix: {0}")]
    SingularMatrix(&'static str),

    /// Block shapes do not agree with the partition dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The blending parameter is derived from min |mu|, undefined on spectra with 0.
    #[error("spectrum contains a zero eigenvalue; gamma is undefined")]
    ZeroEigenvalue,

    /// Evaluation of Z(q) at the pole q = 1/gamma.
    #[error("q = 1/gamma is a pole of the iteration matrix")]
    Pole,

    /// Fixed-point or Newton iteration hit its cap.
    #[error("iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// An internal numeric procedure (root finding, QR) failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Convergence-order measurement with errors at rounding level.
    #[error("order not measurable: coarsest error {0:.3e} is below the noise floor")]
    UnmeasurableOrder(f64),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
