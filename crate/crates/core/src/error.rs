use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("singular geometry: zero horizontal distance at zero height difference")]
    SingularGeometry,

    #[error("invalid geometry: UAV height {z} m must exceed GBS height {h_b} m")]
    InvalidGeometry { z: f64, h_b: f64 },

    #[error("horizontal distance {r} m is outside the receiving radius {r_m} m")]
    OutOfBeam { r: f64, r_m: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    NumericalFailure { estimate: f64, error_bound: f64 },

    #[error("conditional serving-distance density is undefined: association probability is zero")]
    UndefinedConditional,

    #[error("conditioning infeasible: rejection acceptance rate {rate:.3e} is below 1e-4")]
    ConditioningInfeasible { rate: f64 },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
