use std::f64::consts::TAU;

use super::{RadioConfig, TransceiverError};
use crate::array::PhaseVector;
use crate::signals::{dbm_to_amplitude, synthesize_pm, PhaseStream, Waveform};

/// `Δφᵢ = φᵢ − φ₁` for one time sample.
pub fn delta_phases(phi_low: &[f64]) -> PhaseVector {
    match phi_low.first() {
        Some(&p1) => PhaseVector(phi_low.iter().map(|&p| p - p1).collect()),
        None => PhaseVector::default(),
    }
}

/// [`delta_phases`] applied sample by sample to aligned streams.
pub fn delta_streams(phi_low: &[PhaseStream]) -> Vec<PhaseStream> {
    let Some(first) = phi_low.first() else {
        return Vec::new();
    };
    phi_low
        .iter()
        .map(|s| PhaseStream {
            values: s.values.iter().zip(&first.values).map(|(p, p1)| p - p1).collect(),
            rate: s.rate,
            t0: s.t0,
        })
        .collect()
}

/// Streaming per-element modulators at `f_tx` with
/// `ψᵢ = s·Δφᵢ + θ_data`. The carrier phase follows the absolute sample
/// index, so block boundaries are seamless.
pub struct Transmitter {
    cycles_per_sample: f64,
    amplitude: f64,
    sign: f64,
    n: usize,
    sample: u64,
}

impl Transmitter {
    pub fn new(cfg: &RadioConfig, rate: f64) -> Result<Self, TransceiverError> {
        cfg.validate(rate)?;
        Ok(Self {
            cycles_per_sample: cfg.f_tx_hz / rate,
            amplitude: dbm_to_amplitude(cfg.tx_power_dbm),
            sign: f64::from(cfg.conjugation_sign),
            n: cfg.n_elements,
            sample: 0,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `dphi[i][k]` per element, `data[k]` common to all elements.
    pub fn process(&mut self, dphi: &[Vec<f64>], data: &[f64], out: &mut [Vec<f64>]) {
        assert_eq!(dphi.len(), self.n);
        assert_eq!(out.len(), self.n);
        let len = data.len();
        for o in out.iter_mut() {
            o.resize(len, 0.0);
        }
        for (k, &d) in data.iter().enumerate() {
            let carrier = TAU * (self.cycles_per_sample * (self.sample + k as u64) as f64).fract();
            for i in 0..self.n {
                out[i][k] = self.amplitude * (carrier + self.sign * dphi[i][k] + d).cos();
            }
        }
        self.sample += len as u64;
    }
}

/// Builds the per-element transmit waveforms for whole streams.
pub fn transmit_chain(
    dphi: &[PhaseStream],
    data_phase: &PhaseStream,
    cfg: &RadioConfig,
) -> Result<Vec<Waveform>, TransceiverError> {
    if dphi.len() != cfg.n_elements {
        return Err(TransceiverError::Misaligned(format!(
            "{} phase streams for {} elements",
            dphi.len(),
            cfg.n_elements
        )));
    }
    cfg.validate(data_phase.rate)?;
    let amplitude = dbm_to_amplitude(cfg.tx_power_dbm);
    let s = f64::from(cfg.conjugation_sign);
    dphi.iter()
        .map(|d| {
            if d.len() != data_phase.len() || d.rate != data_phase.rate || d.t0 != data_phase.t0 {
                return Err(TransceiverError::Misaligned(
                    "phase and data streams differ in rate, start or length".into(),
                ));
            }
            let psi = PhaseStream {
                values: d.values.iter().zip(&data_phase.values).map(|(p, x)| s * p + x).collect(),
                rate: d.rate,
                t0: d.t0,
            };
            Ok(synthesize_pm(cfg.f_tx_hz, &psi, amplitude)?)
        })
        .collect()
}
