use thiserror::Error;

/// Failure modes of the numerical constructions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpsError {
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A rank cutoff fell inside a near-degenerate cluster of eigenvalues.
    #[error("ambiguous rank: eigenvalue {eigenvalue:e} lies too close to the cutoff {cutoff:e}")]
    AmbiguousRank { eigenvalue: f64, cutoff: f64 },

    /// The tensor is not of the block form `X [[K, 0], [M, 0]] X*` with an
    /// injective right-normalized core.
    #[error("tensor is not in E: {0}")]
    NotInE(String),

    #[error("leading eigenvalue is not simple: |lambda_2 / lambda_1| = {ratio}")]
    DegenerateLeadingEigenvalue { ratio: f64 },

    #[error("fixed point is not positive: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("core is not right-normalized: residual {residual:e}")]
    NotRightNormalized { residual: f64 },

    #[error("gauge move is incompatible with the range projection: residual {residual:e}")]
    IncompatibleGaugeMove { residual: f64 },

    #[error("window density matrix would have {rows} rows, cap is {cap}")]
    WindowTooLarge { rows: usize, cap: usize },

    /// The retraction is only defined on `E(<= chi - 1)` union `N(chi)`.
    #[error("tensor is outside the retraction domain: {0}")]
    NotInO(String),

    #[error("parameter point is not normalized: |K|^2 = {norm_sq}")]
    NotNormalizedPoint { norm_sq: f64 },

    #[error("point is outside chart {chart}: {reason}")]
    OutOfChart { chart: String, reason: String },

    #[error("essential ranks differ along an edge: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },

    #[error("neighbouring states are nearly orthogonal: overlap modulus {modulus:e}")]
    VanishingOverlap { modulus: f64 },

    #[error("total curvature {total} is not an integer: residual {residual:e}")]
    NonIntegerTotal { total: f64, residual: f64 },
}

pub type Result<T> = std::result::Result<T, MpsError>;
