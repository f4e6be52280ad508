use serde::{Deserialize, Serialize};

use super::{QpskMode, TransceiverError};
use crate::array::{ArrayGeometry, ElementPattern, HALF_WAVE_60GHZ};

/// Settings for one radio. Angles are in degrees, everything else in SI
/// units or dB as the field names say.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub f_rx_hz: f64,
    pub f_tx_hz: f64,
    pub n_elements: usize,
    pub element_spacing_m: f64,
    pub element_gain_dbi: f64,
    pub cone_half_angle_deg: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub bpf_bandwidth_hz: f64,
    pub bpf_stop_atten_db: f64,
    pub phase_lpf_cutoff_hz: f64,
    pub symbol_rate_hz: f64,
    /// +1 or -1; -1 conjugates the received phase gradient.
    pub conjugation_sign: i8,
    pub qpsk_mode: QpskMode,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self::radio_a()
    }
}

impl RadioConfig {
    /// Receives 58 GHz, transmits 62 GHz.
    pub fn radio_a() -> Self {
        let pattern = ElementPattern::default();
        Self {
            f_rx_hz: 58e9,
            f_tx_hz: 62e9,
            n_elements: 4,
            element_spacing_m: HALF_WAVE_60GHZ,
            element_gain_dbi: pattern.gain_dbi,
            cone_half_angle_deg: pattern.cone_half_angle.to_degrees(),
            tx_power_dbm: 0.0,
            noise_figure_db: 3.0,
            bpf_bandwidth_hz: 1.5e9,
            bpf_stop_atten_db: 40.0,
            phase_lpf_cutoff_hz: 2e6,
            symbol_rate_hz: 1e9,
            conjugation_sign: -1,
            qpsk_mode: QpskMode::Differential,
        }
    }

    /// Receives 62 GHz, transmits 58 GHz.
    pub fn radio_b() -> Self {
        let mut c = Self::radio_a();
        std::mem::swap(&mut c.f_rx_hz, &mut c.f_tx_hz);
        c
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, TransceiverError> {
        ArrayGeometry::uniform(self.n_elements, self.element_spacing_m)
            .map_err(|e| TransceiverError::Config(format!("element geometry: {e}")))
    }

    pub fn pattern(&self) -> ElementPattern {
        ElementPattern {
            gain_dbi: self.element_gain_dbi,
            cone_half_angle: self.cone_half_angle_deg.to_radians(),
        }
    }

    /// Checks ranges against a simulator sample rate.
    pub fn validate(&self, rate: f64) -> Result<(), TransceiverError> {
        let bad = |field: &str, why: String| Err(TransceiverError::Config(format!("{field}: {why}")));
        let nyq = rate / 2.0;
        for (name, f) in [("f_rx_hz", self.f_rx_hz), ("f_tx_hz", self.f_tx_hz)] {
            if !(f > 0.0 && f < nyq) {
                return bad(name, format!("{f} Hz must lie in (0, {nyq}) Hz"));
            }
        }
        if self.f_rx_hz == self.f_tx_hz {
            return bad("f_tx_hz", "must differ from f_rx_hz".into());
        }
        if self.n_elements == 0 {
            return bad("n_elements", "must be at least 1".into());
        }
        if !(self.element_spacing_m > 0.0 && self.element_spacing_m.is_finite()) {
            return bad("element_spacing_m", "must be positive".into());
        }
        if !(self.cone_half_angle_deg > 0.0 && self.cone_half_angle_deg <= 90.0) {
            return bad("cone_half_angle_deg", "must lie in (0, 90]".into());
        }
        for (name, v) in [
            ("element_gain_dbi", self.element_gain_dbi),
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_figure_db", self.noise_figure_db),
        ] {
            if !v.is_finite() {
                return bad(name, "must be finite".into());
            }
        }
        if self.noise_figure_db < 0.0 {
            return bad("noise_figure_db", "must be non-negative".into());
        }
        let bw = self.bpf_bandwidth_hz;
        if !(bw > 0.0 && self.f_rx_hz - 0.75 * bw > 0.0 && self.f_rx_hz + 0.75 * bw < nyq) {
            return bad("bpf_bandwidth_hz", format!("{bw} Hz does not fit around f_rx_hz"));
        }
        if !(self.bpf_stop_atten_db > 0.0) {
            return bad("bpf_stop_atten_db", "must be positive".into());
        }
        if !(self.phase_lpf_cutoff_hz > 0.0 && self.phase_lpf_cutoff_hz < self.symbol_rate_hz) {
            return bad(
                "phase_lpf_cutoff_hz",
                "must be positive and below symbol_rate_hz".into(),
            );
        }
        if !(self.symbol_rate_hz > 0.0 && self.symbol_rate_hz < nyq) {
            return bad("symbol_rate_hz", format!("must lie in (0, {nyq}) Hz"));
        }
        if self.conjugation_sign != 1 && self.conjugation_sign != -1 {
            return bad("conjugation_sign", "must be +1 or -1".into());
        }
        Ok(())
    }
}
