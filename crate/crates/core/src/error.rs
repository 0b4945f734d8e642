use alloc::string::String;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point outside the smoothness domain: {0}")]
    Domain(String),
    #[error("derivative order {requested} exceeds the maximum {max}")]
    OrderExceeded { requested: usize, max: usize },
    #[error("Gamma pole at factor j = {factor} (argument {arg})")]
    Pole { factor: usize, arg: f64 },
    #[error("operator normal form exceeds {bound} terms")]
    TermBound { bound: usize },
    #[error("singular denominator: {0}")]
    Singular(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("ODE integration failure: {0}")]
    Ode(String),
}

pub type Result<T> = core::result::Result<T, Error>;
