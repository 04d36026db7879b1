use thiserror::Error;

/// Errors raised by the simulation and design engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("linearized susceptibility invalid: chi_tilde = {chi_tilde} >= 1")]
    LinearizationInvalid { chi_tilde: f64 },

    #[error("singular response at omega = {omega}: denominator modulus {modulus:e}")]
    SingularResponse { omega: f64, modulus: f64 },

    #[error("form factor F1 is singular at omega = {omega} (band edge with zero linewidth)")]
    SingularFormFactor { omega: f64 },

    #[error("comb variant {0} has no closed-form form factor")]
    NoClosedForm(&'static str),

    #[error("system dimension {dim} exceeds the limit of {limit} states")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ill-conditioned ratio at omega = {omega}: input spectrum below the support mask")]
    IllConditioned { omega: f64 },
}

impl Error {
    /// Stable snake_case identifier, used in tabular outputs.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::LinearizationInvalid { .. } => "linearization_invalid",
            Error::SingularResponse { .. } => "singular_response",
            Error::SingularFormFactor { .. } => "singular_form_factor",
            Error::NoClosedForm(_) => "no_closed_form",
            Error::DimensionOverflow { .. } => "dimension_overflow",
            Error::StepUnderflow { .. } => "step_underflow",
            Error::Precondition(_) => "precondition",
            Error::IllConditioned { .. } => "ill_conditioned",
        }
    }

    /// Coarse classification used by front ends to pick an exit status.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParams(_)
            | Error::NoClosedForm(_)
            | Error::LinearizationInvalid { .. } => ErrorCategory::Config,
            Error::Precondition(_) => ErrorCategory::Precondition,
            Error::SingularResponse { .. }
            | Error::SingularFormFactor { .. }
            | Error::DimensionOverflow { .. }
            | Error::StepUnderflow { .. }
            | Error::IllConditioned { .. } => ErrorCategory::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
    Precondition,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
