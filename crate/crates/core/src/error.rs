use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid configuration for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(&'static str),

    #[error("vacuum projections a0 = {a0}, a_v0 = {a_v0} map to an infinite effective intensity")]
    InfiniteIntensity { a0: f64, a_v0: f64 },

    #[error("failure budget unachievable: ln(1/eps0) would be {t0}")]
    BudgetUnachievable { t0: f64 },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
