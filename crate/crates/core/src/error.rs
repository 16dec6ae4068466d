use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A system constraint (e.g. `M <= M_max`) is violated.
    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("period too short: (B/N)(T_N - T_tr) = {0} < 2, no constellation fits")]
    PeriodTooShort(f64),

    #[error("no finite crossover: {0}")]
    NoFiniteCrossover(String),

    #[error("no crossover in range [{lo}, {hi}] m")]
    NoCrossoverInRange { lo: f64, hi: f64 },

    #[error("empty admissible set: {0}")]
    EmptyAdmissibleSet(String),

    /// A configuration value failed validation; `field` is the dotted path.
    #[error("invalid value for `{field}`: {msg}")]
    Invalid { field: String, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Invalid {
        field: field.into(),
        msg: msg.into(),
    }
}
