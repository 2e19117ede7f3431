use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("apertures overlap: diameter {diameter} nm exceeds lattice pitch {pitch} nm")]
    OverlappingApertures { diameter: f64, pitch: f64 },

    #[error("energy {energy} keV is outside the range table ({min}..={max} keV)")]
    EnergyOutOfTable { energy: f64, min: f64, max: f64 },

    #[error("range table is invalid: {0}")]
    InvalidRangeTable(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("histogram has no half-maximum crossing on the {0} side of the peak")]
    HalfOpenDistribution(Side),

    #[error("no hole contains two or more NV centers")]
    NoPairs,

    #[error("fit did not converge (best residual {best_residual:.3e})")]
    FitDidNotConverge { best_residual: f64 },

    #[error("trace has no decay scale: {0}")]
    NoDecay(String),

    #[error("spectrum is saturated (all contrast values are zero)")]
    SaturatedSpectrum,

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("malformed {kind} data: {reason}")]
    Format { kind: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Which side of a histogram peak a half-maximum search ran off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
