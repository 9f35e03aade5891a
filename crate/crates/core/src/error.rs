use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters r={r}, d={d}: need r > d > 0 (for r <= d extinction is almost sure)")]
    InvalidParams { r: f64, d: f64 },

    #[error("absorbed state ({i}, {j}) has no transitions")]
    AbsorbedState { i: u32, j: u32 },

    #[error("index ({i}, {j}) outside the grid 1..={n}")]
    OutOfRange { i: usize, j: usize, n: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("{method} did not converge in {iterations} iterations (last residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("denominator vanishes at s={s} (near critical time {which})")]
    Singular { s: f64, which: &'static str },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
