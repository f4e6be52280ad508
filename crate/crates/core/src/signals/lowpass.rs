use std::f64::consts::PI;

use super::{SignalError, Waveform};

/// Single-pole recursive lowpass, `y[n] = y[n-1] + a·(x[n] - y[n-1])`.
///
/// The coefficient is matched to the continuous-time pole so the step
/// response crosses 1 - 1/e at `t = 1 / (2π·cutoff)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnePoleLowpass {
    cutoff: f64,
    rate: f64,
    alpha: f64,
    state: f64,
}

impl OnePoleLowpass {
    pub fn new(cutoff: f64, rate: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        if !(cutoff > 0.0 && cutoff < rate / 2.0) {
            return Err(SignalError::Design(format!(
                "one-pole cutoff {cutoff} Hz outside (0, {})",
                rate / 2.0
            )));
        }
        Ok(Self {
            cutoff,
            rate,
            alpha: 1.0 - (-2.0 * PI * cutoff / rate).exp(),
            state: 0.0,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn state(&self) -> f64 {
        self.state
    }

    pub fn reset(&mut self, value: f64) {
        self.state = value;
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        self.state += self.alpha * (x - self.state);
        self.state
    }

    /// Filters a waveform, continuing from the current state.
    pub fn apply(&mut self, wave: &Waveform) -> Result<Waveform, SignalError> {
        if wave.rate() != self.rate {
            return Err(SignalError::RateMismatch {
                filter: self.rate,
                signal: wave.rate(),
            });
        }
        let out = wave.samples().iter().map(|&x| self.step(x)).collect();
        Waveform::new(out, self.rate, wave.t0())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::DEFAULT_RATE;

    #[test]
    fn dc_passes_unchanged() {
        let mut lp = OnePoleLowpass::new(2e6, DEFAULT_RATE).unwrap();
        let mut y = 0.0;
        for _ in 0..3_000_000 {
            y = lp.step(0.7);
        }
        assert!((y - 0.7).abs() < 1e-12);
    }

    #[test]
    fn step_reaches_63_percent_at_time_constant() {
        for cutoff in [0.5e6, 2e6, 8e6] {
            let mut lp = OnePoleLowpass::new(cutoff, DEFAULT_RATE).unwrap();
            let n = (DEFAULT_RATE / (2.0 * PI * cutoff)).round() as usize;
            let mut y = 0.0;
            for _ in 0..n {
                y = lp.step(1.0);
            }
            assert!((y - 0.632).abs() < 0.01, "cutoff {cutoff}: {y}");
        }
    }

    #[test]
    fn state_carries_across_blocks() {
        let x = Waveform::from_fn(1000, 1e6, 0.0, |t| (t * 1e4).sin()).unwrap();
        let mut whole = OnePoleLowpass::new(1e4, 1e6).unwrap();
        let full = whole.apply(&x).unwrap();
        let mut split = OnePoleLowpass::new(1e4, 1e6).unwrap();
        let a = Waveform::new(x.samples()[..400].to_vec(), 1e6, 0.0).unwrap();
        let b = Waveform::new(x.samples()[400..].to_vec(), 1e6, 0.0).unwrap();
        let mut joined = split.apply(&a).unwrap().into_samples();
        joined.extend(split.apply(&b).unwrap().into_samples());
        assert_eq!(joined, full.samples());
    }

    #[test]
    fn invalid_cutoff() {
        assert!(OnePoleLowpass::new(0.0, 1.0).is_err());
        assert!(OnePoleLowpass::new(0.6, 1.0).is_err());
    }
}
