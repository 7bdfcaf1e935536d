use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("malformed measurement: {0}")]
    MalformedMeasurement(String),

    #[error("attenuation {0:.3} dB is outside the invertible range")]
    OutOfRange(f64),

    #[error("no isotherm forecast at or before {0}")]
    NoForecast(String),

    #[error("isotherm forecast is {age_hours:.1} h old (limit {limit_hours:.1} h)")]
    StaleForecast {
        value_km: f64,
        age_hours: f64,
        limit_hours: f64,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("series do not overlap in time")]
    DisjointCoverage,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
