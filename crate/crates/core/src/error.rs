use thiserror::Error;

/// Which half-line a tail computation was working on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => f.write_str("left (y -> -inf)"),
            Side::Right => f.write_str("right (y -> +inf)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("e^(-G) is not integrable on the {side} side: {detail}")]
    NonIntegrable { side: Side, detail: String },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value}, error {abs_err}")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        abs_err: f64,
    },

    #[error("invalid drift function: {0}")]
    InvalidDrift(String),

    #[error("probability {0} is outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measure is not normalized: second cumulant {kappa2} != 1")]
    NotNormalized { kappa2: f64 },

    #[error("no negative leading even cumulant found up to order {max_order}: {detail}")]
    NoLeadingCumulant { max_order: usize, detail: String },

    #[error("measure support is not lattice-valued")]
    NotLattice,

    #[error("state space too large for n = {n}: {states} states (limit {limit})")]
    StateSpaceOverflow { n: u64, states: u128, limit: u128 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ambiguous stationary point: H' changes sign {sign_changes} times on (0, 1); (J, h) may lie on the coexistence curve")]
    AmbiguousMaximizer { sign_changes: usize },

    #[error("evaluation grid intersects the excluded band ({lo}, {hi}) around the jump point")]
    GridInBand { lo: f64, hi: f64 },

    #[error("bound {bound} violated at w = {w}: lhs {lhs} > rhs {rhs}")]
    BoundViolation {
        bound: String,
        w: f64,
        lhs: f64,
        rhs: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
