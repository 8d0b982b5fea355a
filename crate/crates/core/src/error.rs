use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// A point `(θ, Λ(θ))` of a curve, used in convexity diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

impl fmt::Display for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("curve is not convex near {}, {}, {}", .triple[0], .triple[1], .triple[2])]
    NonConvex { triple: [CurvePoint; 3] },

    #[error("{what} did not converge (last residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },

    #[error("budget exceeded: {message} (largest feasible n is {max_feasible_n})")]
    Budget {
        message: String,
        max_feasible_n: usize,
    },

    #[error("gap condition not certified: {0}")]
    Uncertified(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
