use thiserror::Error;

/// Errors produced by the lattice laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("size mismatch: expected {expected} sites, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// The zero field has no direction on the unit sphere.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no stationary point: {0}")]
    NoStationaryPoint(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(
        "reweighting exponent {0:.3e} overflows double precision; use a smaller source field"
    )]
    ReweightOverflow(f64),

    #[error("power-law fit: {0}")]
    Fit(String),

    #[error("sweep: {0}")]
    Sweep(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("trace file: {0}")]
    Trace(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(what: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(format!("{what} = {x}")))
    }
}
