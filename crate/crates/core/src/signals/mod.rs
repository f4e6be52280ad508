//! Sample-domain DSP primitives: waveforms, FIR design and streaming
//! application, the phasing low-pass, and phase modulation/demodulation.
//!
//! All signals are real passband voltages across a 1 Ω-normalized load, so a
//! sinusoid of peak amplitude `A` carries `A² / 2` watts.

mod fir;
mod lowpass;
mod phase;

pub use fir::{design_bandpass, design_lowpass, kaiser_window, FirFilter, FirStream, MAX_TAPS};
pub use lowpass::OnePoleLowpass;
pub use phase::{
    extract_phase, synthesize_pm, unwrap_in_place, wrap_phase, PhaseStream, QuadratureDemod,
};

use thiserror::Error;

/// Simulator time step of 5 ps.
pub const DEFAULT_RATE: f64 = 200e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample rate mismatch: filter at {filter} Hz, signal at {signal} Hz")]
    RateMismatch { filter: f64, signal: f64 },
    #[error("filter design infeasible: {0}")]
    Design(String),
    #[error("invalid filter taps: {0}")]
    InvalidTaps(String),
    #[error("frequency {freq} Hz is not below Nyquist ({nyquist} Hz)")]
    AboveNyquist { freq: f64, nyquist: f64 },
}

/// A uniformly sampled real passband signal segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    rate: f64,
    t0: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, rate: f64, t0: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self { samples, rate, t0 })
    }

    pub fn zeros(len: usize, rate: f64, t0: f64) -> Result<Self, SignalError> {
        Self::new(vec![0.0; len], rate, t0)
    }

    /// Builds a waveform by evaluating `f` at each sample time.
    pub fn from_fn(
        len: usize,
        rate: f64,
        t0: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, SignalError> {
        let samples = (0..len).map(|k| f(t0 + k as f64 / rate)).collect();
        Self::new(samples, rate, t0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate
    }

    /// Mean power in watts.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }
}

/// Peak amplitude (volts) of a sinusoid delivering `dbm` into 1 Ω.
pub fn dbm_to_amplitude(dbm: f64) -> f64 {
    (2.0 * dbm_to_watts(dbm)).sqrt()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dbm_amplitude() {
        // P = A^2 / 2 with P = 1 mW.
        let a = dbm_to_amplitude(0.0);
        assert!((a - 0.044_721_36).abs() < 1e-8);
        assert!((a / 2f64.sqrt() - 0.001f64.sqrt()).abs() < 1e-12);
        let tone = Waveform::from_fn(2000, DEFAULT_RATE, 0.0, |t| {
            a * (2.0 * std::f64::consts::PI * 10e9 * t).cos()
        })
        .unwrap();
        assert!((watts_to_dbm(tone.mean_power())).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_rate_and_nan() {
        assert_eq!(
            Waveform::new(vec![0.0], 0.0, 0.0),
            Err(SignalError::InvalidRate(0.0))
        );
        assert_eq!(
            Waveform::new(vec![0.0, f64::NAN], 1.0, 0.0),
            Err(SignalError::NonFinite(1))
        );
    }
}
