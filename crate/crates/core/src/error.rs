use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A NaN or infinite value reached an operation that needs finite input.
    #[error("invalid input: {0} is not finite")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("lattice {height}x{width} is too small (need at least {min}x{min})")]
    LatticeTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    /// The sampler left the numerically meaningful region.
    #[error("sampler diverged at sweep {sweep}, site {site}: value {value}")]
    SamplerDivergence { sweep: usize, site: usize, value: f64 },

    #[error("regularized metric is singular (determinant {determinant:e})")]
    SingularMetric { determinant: f64 },

    #[error("integration diverged: {0}")]
    Integration(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
