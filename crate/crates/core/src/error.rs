use std::fmt;

use thiserror::Error;

/// A single failed metric axiom, with the indices that witness it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite {
        i: usize,
        j: usize,
    },
    Negative {
        i: usize,
        j: usize,
        value: f64,
    },
    NonzeroDiagonal {
        i: usize,
        value: f64,
    },
    Asymmetric {
        i: usize,
        j: usize,
        diff: f64,
    },
    /// Two distinct points at distance zero.
    ZeroDistance {
        i: usize,
        j: usize,
    },
    /// `d(i, j) > d(i, k) + d(k, j)` by `excess`.
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { i, j } => write!(f, "non-finite entry at ({i}, {j})"),
            Violation::Negative { i, j, value } => {
                write!(f, "negative distance {value} at ({i}, {j})")
            }
            Violation::NonzeroDiagonal { i, value } => {
                write!(f, "diagonal entry ({i}, {i}) is {value}, expected 0")
            }
            Violation::Asymmetric { i, j, diff } => {
                write!(f, "asymmetric pair ({i}, {j}), |d(i,j) - d(j,i)| = {diff}")
            }
            Violation::ZeroDistance { i, j } => {
                write!(f, "duplicate points {i} and {j} (zero off-diagonal distance)")
            }
            Violation::Triangle { i, j, k, excess } => write!(
                f,
                "triangle inequality fails for ({i}, {j}, {k}): d({i},{j}) exceeds d({i},{k}) + d({k},{j}) by {excess}"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty space: at least one point is required")]
    Empty,

    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("{labels} labels given for a {n}x{n} matrix")]
    LabelMismatch { labels: usize, n: usize },

    #[error("{} metric violation(s); first: {}", .0.len(), .0[0])]
    MetricViolation(Vec<Violation>),

    #[error("diameter {0} exceeds 1; request rescaling to divide by the diameter")]
    DiameterExceedsOne(f64),

    #[error("invalid parameter {name} = {value}: expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{what}: {requested} exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("level {level} does not refine level {}", .level - 1)]
    NotNested { level: usize },

    #[error("space is not ultrametric: witness ({}, {}, {}), relative excess {excess:e}", .witness.0, .witness.1, .witness.2)]
    NotUltrametric {
        witness: (usize, usize, usize),
        excess: f64,
    },

    #[error("deepest level does not separate points {0} and {1}")]
    NotSeparating(usize, usize),

    #[error("distortion bounds violated at pair ({}, {}): {detail}", .pair.0, .pair.1)]
    DistortionBoundsViolated {
        pair: (usize, usize),
        detail: String,
    },

    #[error("certificate refused: {0}")]
    CertificateRefused(String),

    #[error("certificate inequality `{inequality}` fails at pair ({}, {}) with slack {slack:e}", .pair.0, .pair.1)]
    CertificateViolated {
        pair: (usize, usize),
        inequality: &'static str,
        slack: f64,
    },

    #[error("exact mode supports at most {max} points, got {n}")]
    ExactModeSizeExceeded { n: usize, max: usize },

    #[error("no (r1, r2) sample lies in the window r = {r}, t = {t}")]
    EmptyWindow { r: f64, t: f64 },

    #[error("packing infeasible at level {level}: {required} boxes required, capacity {capacity}")]
    PackingInfeasible {
        level: usize,
        required: usize,
        capacity: u128,
    },

    #[error("bound `{which}` violated at pair ({}, {}) split at level {level}, slack {slack:e}", .pair.0, .pair.1)]
    BoundViolated {
        pair: (usize, usize),
        level: usize,
        which: &'static str,
        slack: f64,
    },

    #[error("{family} cannot be sampled to depth {depth} (maximum {max})")]
    DepthOverflow {
        family: String,
        depth: usize,
        max: usize,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_param(
    ok: bool,
    name: &'static str,
    value: f64,
    expected: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            expected,
        })
    }
}
