//! Two-radio closed-loop simulation, metrics and parameter sweeps.

mod config;
mod metrics;
mod run;
mod sweep;

use thiserror::Error;

pub use config::{LinkConfig, DEFAULT_DISTANCE_M, DEFAULT_TOTAL_DELAY_S, FIXED_PATH_LOSS_DB};
pub use metrics::{
    detect_lock, detect_lock_with, eye_opening_deg, eye_samples, measure_snr_gain, EyePoint,
    LockCriteria, MIN_SNR_SYMBOLS,
};
pub use run::{
    run_link, run_link_with, LinkMetrics, RadioMetrics, ENVELOPE_DT_S, ENVELOPE_SMOOTH,
    EYE_APERTURE, EYE_DECIMATION,
};
pub use sweep::{parse_grid, sweep, Grid, SweepRow};

use crate::channel::ChannelError;
use crate::signals::SignalError;
use crate::transceiver::{ModemError, TransceiverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error("trace covers {have_s:e} s, lock detection needs at least {need_s:e} s")]
    TraceTooShort { have_s: f64, need_s: f64 },
    #[error("not locked: {0}")]
    NotLocked(String),
    #[error("non-finite sample in radio {radio} at sample {sample}")]
    NonFinite { radio: &'static str, sample: usize },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Transceiver(#[from] TransceiverError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}
