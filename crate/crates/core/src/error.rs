use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigenvalues are not distinct: minimum pairwise gap {min_gap:e} below {threshold:e}")]
    RepeatedEigenvalues { min_gap: f64, threshold: f64 },

    #[error("matrix exponential has imaginary residue {0:e} (relative)")]
    ImaginaryResidue(f64),

    #[error(
        "negative volatility {value:e} at t = {time}; the parameters violate the \
         non-negativity conditions a'e^(Bt)e >= 0 and a'e^(Bt)Y0 >= gamma >= -alpha0"
    )]
    NegativeVolatility { time: f64, value: f64 },

    #[error("quadrature did not converge: {coarse} ({coarse_nodes} nodes) vs {fine} ({fine_nodes} nodes)")]
    Quadrature {
        coarse: f64,
        fine: f64,
        coarse_nodes: usize,
        fine_nodes: usize,
    },

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
