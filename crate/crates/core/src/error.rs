use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("value {value} lies outside the GPD support")]
    OutOfSupport { value: f64 },

    #[error("sample {value} sits on the support boundary; the gradient is singular")]
    SingularGradient { value: f64 },

    #[error("mean excess is unbounded for shape xi = {xi} (requires xi < 1)")]
    UnboundedMean { xi: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("no learner contributed any samples")]
    NoData,

    #[error("degenerate NLOS geometry: zero coordinate difference")]
    DegenerateGeometry,

    #[error("invalid configuration `{field}`: {reason}")]
    Config {
        field: &'static str,
        reason: &'static str,
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

impl Error {
    pub fn config(field: &'static str, reason: &'static str) -> Self {
        Error::Config { field, reason }
    }
}
