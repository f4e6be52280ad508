//! One retro-directive radio: receive chain, transmit chain and modem.

mod config;
mod modem;
mod receiver;
mod transmitter;

use thiserror::Error;

pub use config::RadioConfig;
pub use modem::{
    constellation_fit, constellation_offset, decide_quadrant, decode_quadrants, descramble,
    gray_quadrant, qpsk_demap, qpsk_map, quadrant_bits, quadrant_phase, scramble, Demapped,
    ModemError, Prbs23, QpskEncoder, QpskMode, Quadrant, SymbolSource, SymbolTiming,
};
pub use receiver::{receive_chain, BaselineRestorer, DemodOutput, Receiver, RxBlock, ANCHOR_LEN};
pub use transmitter::{delta_phases, delta_streams, transmit_chain, Transmitter};

use crate::signals::SignalError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransceiverError {
    #[error("invalid radio config, {0}")]
    Config(String),
    #[error("misaligned streams: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}
