use crate::modes::ModeIndex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {index} lies outside the truncation box n_trunc = {n_trunc}")]
    OutsideTruncation { index: ModeIndex, n_trunc: usize },
    #[error("truncation mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },
    #[error("numerical blow-up at step {step}: max |coefficient| = {max_abs:e}")]
    BlowUp { step: usize, max_abs: f64 },
    #[error("time {time} is not on the step grid (dt = {dt})")]
    MisalignedTime { time: f64, dt: f64 },
    #[error("interval [{s}, {t}] is not inside [0, {horizon}]")]
    OutsideHorizon { s: f64, t: f64, horizon: f64 },
    #[error("noise path has {available} steps, {required} required")]
    PathTooShort { available: usize, required: usize },
    #[error("noise path has {path} directions, forcing has {forcing}")]
    NoiseDimension { path: usize, forcing: usize },
    #[error("truncation overflow: products need n_trunc >= {required}, have {n_trunc}")]
    TruncationOverflow { required: usize, n_trunc: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("exponent {exponent:.3e} overflows for eta = {eta}; eta too large")]
    EtaTooLarge { eta: f64, exponent: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trajectory file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
