use std::fmt;

/// One violated structural condition of a nonlinearity, with the first offending point.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: String,
    pub u: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at u={:.6e})", self.condition, self.u)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{name}={value} is outside its admissible range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid nonlinearity: {}", list(.0))]
    InvalidNonlinearity(Vec<Violation>),

    #[error("unknown {kind} '{name}' (registered: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no heteroclinic connection at c={c}: {reason} (u={u_hit:.3e})")]
    ConnectionFailure { c: f64, u_hit: f64, reason: String },

    #[error("minimal speed not bracketed in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("window too short: {0}")]
    WindowTooShort(String),

    #[error("integrand not decayed at the window edge (truncation bound {bound:.3e})")]
    Truncation { bound: f64 },

    #[error("numerical failure at t={t}: {reason}")]
    Numerical { t: f64, reason: String },

    #[error("particle cap {cap} exceeded at t={t}")]
    ParticleCap { cap: usize, t: f64 },
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
