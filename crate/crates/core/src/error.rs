use thiserror::Error;

/// Failures raised anywhere in the Floquet pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloquetError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("non-diagonalizable monodromy: eigenvector condition number {condition:.3e} exceeds {threshold:.1e}")]
    NonDiagonalizable { condition: f64, threshold: f64 },

    #[error("system is not asymptotically stable: max Re(mu) = {max_growth_rate:.6e}")]
    Unstable { max_growth_rate: f64 },

    #[error("resonant denominator: |1 - exp(x T)| = {magnitude:.3e} for x = {re} + {im}i")]
    ResonantDenominator { re: f64, im: f64, magnitude: f64 },

    #[error("singular matrix encountered: {0}")]
    Singular(String),

    #[error("quadrature did not converge: error estimate {estimate:.3e} above requested {requested:.3e}")]
    QuadratureNonConvergence { estimate: f64, requested: f64 },

    #[error("oracle did not settle: {0}")]
    NotSettled(String),

    #[error("no sign change of max Re(mu) in [{lower}, {upper}]")]
    NoSignChange { lower: f64, upper: f64 },

    #[error("sigma = {sigma} is at or beyond the rotating-wave threshold sigma = 1")]
    BeyondRwaThreshold { sigma: f64 },

    #[error("parameters unstable: sigma = {sigma} is not below the instability sigma_ins = {sigma_ins:.6}")]
    UnstableParameters { sigma: f64, sigma_ins: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),
}

pub type Result<T> = std::result::Result<T, FloquetError>;
