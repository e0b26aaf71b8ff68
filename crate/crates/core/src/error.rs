use thiserror::Error;

/// Errors produced by the special-function, quadrature and series routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A gamma or digamma pole was hit (argument within 1e-12 of a non-positive integer).
    #[error("pole of the gamma family at {location}")]
    Pole { location: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error(
        "quadrature tolerance not met after {subdivisions} subdivisions \
         (estimate {estimate:e}, error {abs_error:e})"
    )]
    ToleranceNotMet {
        estimate: f64,
        abs_error: f64,
        subdivisions: usize,
    },

    /// Term magnitudes kept growing and the series never met its stopping test.
    #[error("series diverged after {terms} terms (last |term| = {last_term_abs:e})")]
    SeriesDiverged { terms: usize, last_term_abs: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
