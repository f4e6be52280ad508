//! Discrete-time link-level simulator of two self-phasing (retro-directive)
//! millimeter-wave radios that acquire a mutually beamformed link.

pub mod array;
pub mod channel;
pub mod engine;
pub mod signals;
pub mod transceiver;
