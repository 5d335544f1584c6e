use std::path::PathBuf;

/// Errors raised by model evaluation, wave construction and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("no jamiton exists for sonic density {rho_s} (sub-characteristic condition holds or is degenerate)")]
    NoJamiton { rho_s: f64 },

    #[error("no sign change of {what} found up to {limit}")]
    UnboundedRoot { what: &'static str, limit: f64 },

    #[error("root of {what} is not bracketed by [{lo}, {hi}]")]
    NotBracketed { what: &'static str, lo: f64, hi: f64 },

    #[error("r(v) stays below r_max = {r_max} on the left edge of the domain; no v_R exists")]
    NoLeftState { r_max: f64 },

    #[error("shock level {value} outside ({r_min}, {r_max})")]
    ShockLevel { value: f64, r_min: f64, r_max: f64 },

    #[error("jamiton profile is not monotone near v = {v}: integrand r'/w = {value}")]
    NonMonotone { v: f64, value: f64 },

    #[error("upstream shock state {v_minus} is within {gap} of v_M = {v_m}; length diverges")]
    NearMaximal { v_minus: f64, v_m: f64, gap: f64 },

    #[error("time step {dt} violates the CFL bound {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(what: &'static str, value: f64, domain: impl Into<String>) -> Error {
    Error::Domain {
        what,
        value,
        domain: domain.into(),
    }
}
