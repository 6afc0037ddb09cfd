use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{field} must be finite, got {value}")]
    NonFinite { field: String, value: f64 },

    #[error("{field} = {value} outside [0, 1]")]
    OutOfRange { field: String, value: f64 },

    #[error("outcome must be +1 or -1, got {0}")]
    InvalidOutcome(i8),

    #[error("setting must be 1 or 2, got {0}")]
    InvalidSetting(u8),

    #[error("box fails validation (max residual {max_residual:e})")]
    InvalidBox { max_residual: f64 },

    #[error("payoff table is not symmetric (max residual {max_residual:e}); ESS analysis needs a symmetric game")]
    AsymmetricTable { max_residual: f64 },

    #[error("embedding undefined: omega1 = 0")]
    UndefinedKappa,

    #[error("kappa = {0} outside [0, 1]")]
    KappaOutOfRange(f64),

    #[error("parameters violate the embedding constraints (residual {residual:e})")]
    ConstraintViolation { residual: f64 },

    #[error("infeasible: {}", .violations.join(", "))]
    Infeasible { violations: Vec<String> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("epsilon = {0} outside (0, 1)")]
    InvalidEpsilon(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            field: field.to_string(),
            value,
        })
    }
}

pub(crate) fn check_probability(field: &str, value: f64) -> Result<f64> {
    check_finite(field, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            field: field.to_string(),
            value,
        })
    }
}
