use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::{design_lowpass, SignalError, Waveform};

/// Sampled phase trajectory in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStream {
    pub values: Vec<f64>,
    pub rate: f64,
    pub t0: f64,
}

impl PhaseStream {
    pub fn new(values: Vec<f64>, rate: f64, t0: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        Ok(Self { values, rate, t0 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate
    }
}

/// Wraps to `(-π, π]`.
#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    let r = x - TAU * (x / TAU).round();
    if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Nearest-multiple-of-2π continuation. A step of exactly ±π is taken as +π.
pub fn unwrap_in_place(values: &mut [f64]) {
    for k in 1..values.len() {
        values[k] = values[k - 1] + wrap_phase(values[k] - values[k - 1]);
    }
}

/// Streaming quadrature demodulator producing the complex envelope
/// `A·e^{jφ}` of an input `A·cos(2π f t + φ)`.
///
/// The input is mixed against `2·e^{-j2π f t}` and the `2f` product is
/// removed by a short Kaiser lowpass. The LO is referenced to absolute time.
pub struct QuadratureDemod {
    cycles_per_sample: f64,
    lo_offset: f64,
    n: u64,
    taps: Vec<f64>,
    history: Vec<Complex64>,
    pos: usize,
}

impl QuadratureDemod {
    pub fn new(f_ref: f64, rate: f64, t0: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        if !(f_ref > 0.0 && f_ref < rate / 2.0) {
            return Err(SignalError::AboveNyquist {
                freq: f_ref,
                nyquist: rate / 2.0,
            });
        }
        // Distance from DC to the (possibly aliased) 2f mixing product.
        let image = (2.0 * f_ref).min(rate - 2.0 * f_ref);
        let lp = design_lowpass(0.3 * image, 0.7 * image, rate, 60.0)?;
        let taps = lp.taps().to_vec();
        let cps = f_ref / rate;
        Ok(Self {
            cycles_per_sample: cps,
            lo_offset: (f_ref * t0).rem_euclid(1.0),
            n: 0,
            history: vec![Complex64::default(); taps.len()],
            taps,
            pos: 0,
        })
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> Complex64 {
        let cycles = (self.lo_offset + self.cycles_per_sample * self.n as f64).fract();
        self.n += 1;
        let (s, c) = (TAU * cycles).sin_cos();
        let m = self.taps.len();
        self.history[self.pos] = Complex64::new(2.0 * x * c, -2.0 * x * s);
        // history is a circular buffer; newest at `pos`.
        let mut acc = Complex64::default();
        let (newer, older) = self.history.split_at(self.pos + 1);
        let mut k = 0;
        for h in newer.iter().rev().chain(older.iter().rev()) {
            acc += h * self.taps[k];
            k += 1;
        }
        debug_assert_eq!(k, m);
        self.pos = (self.pos + 1) % m;
        acc
    }

    pub fn process(&mut self, input: &[f64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(input.iter().map(|&x| self.step(x)));
    }
}

/// Recovers `φ(t)` from `A·cos(2π f_ref t + φ(t))` by quadrature mixing,
/// lowpass filtering, four-quadrant angle and unwrapping. The output `t0`
/// accounts for the demodulator group delay, so `values[k]` is the phase
/// at `out.time(k)`.
pub fn extract_phase(wave: &Waveform, f_ref: f64) -> Result<PhaseStream, SignalError> {
    let mut demod = QuadratureDemod::new(f_ref, wave.rate(), wave.t0())?;
    let mut z = Vec::with_capacity(wave.len());
    demod.process(wave.samples(), &mut z);
    let mut values: Vec<f64> = z.iter().map(|c| c.arg()).collect();
    // Anchor the unwrap at the first sample with a full filter history so
    // the warm-up transient cannot add 2π multiples to the settled output.
    let anchor = (2 * demod.group_delay()).min(values.len().saturating_sub(1));
    unwrap_in_place(&mut values[anchor..]);
    for k in (0..anchor).rev() {
        values[k] = values[k + 1] + wrap_phase(values[k] - values[k + 1]);
    }
    PhaseStream::new(
        values,
        wave.rate(),
        wave.t0() - demod.group_delay() as f64 / wave.rate(),
    )
}

/// `amplitude·cos(2π f_carrier t_k + phase_k)` at the phase stream's times.
pub fn synthesize_pm(
    f_carrier: f64,
    phase: &PhaseStream,
    amplitude: f64,
) -> Result<Waveform, SignalError> {
    if !(f_carrier >= 0.0 && f_carrier < phase.rate / 2.0) {
        return Err(SignalError::AboveNyquist {
            freq: f_carrier,
            nyquist: phase.rate / 2.0,
        });
    }
    let cps = f_carrier / phase.rate;
    let offset = (f_carrier * phase.t0).rem_euclid(1.0);
    let samples = phase
        .values
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let cycles = (offset + cps * k as f64).fract();
            amplitude * (TAU * cycles + p).cos()
        })
        .collect();
    Waveform::new(samples, phase.rate, phase.t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::DEFAULT_RATE;

    fn tone(f: f64, phase: impl Fn(f64) -> f64, len: usize) -> Waveform {
        Waveform::from_fn(len, DEFAULT_RATE, 0.0, |t| (TAU * f * t + phase(t)).cos()).unwrap()
    }

    #[test]
    fn wrap_range_and_tie() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        let mut v = vec![0.0, PI];
        unwrap_in_place(&mut v);
        assert_eq!(v[1], PI);
        let mut v = vec![0.0, -PI];
        unwrap_in_place(&mut v);
        assert_eq!(v[1], PI);
    }

    #[test]
    fn zero_and_constant_phase() {
        for offset in [0.0, 1.0] {
            let p = extract_phase(&tone(58e9, |_| offset, 4000), 58e9).unwrap();
            for &v in &p.values[200..] {
                assert!((v - offset).abs() < 1e-3, "{v} vs {offset}");
            }
        }
    }

    #[test]
    fn frequency_offset_gives_linear_phase() {
        let p = extract_phase(&tone(58e9 + 10e6, |_| 0.0, 40_000), 58e9).unwrap();
        // Least-squares slope over the settled region.
        let pts: Vec<(f64, f64)> = (200..p.len()).map(|k| (p.time(k), p.values[k])).collect();
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope / (TAU * 1e7) - 1.0).abs() < 1e-4, "{slope}");
    }

    #[test]
    fn zero_phase_pm_is_pure_carrier() {
        let p = PhaseStream::new(vec![0.0; 100], DEFAULT_RATE, 0.0).unwrap();
        let w = synthesize_pm(58e9, &p, 2.0).unwrap();
        for (k, s) in w.samples().iter().enumerate() {
            assert!((s - 2.0 * (TAU * 58e9 * w.time(k)).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn pm_round_trip_band_limited() {
        let f = 58e9;
        let len = 6000;
        // Sum of tones below 10% of the carrier.
        let phase = |t: f64| {
            0.8 * (TAU * 1.3e9 * t).sin() + 0.5 * (TAU * 4.1e9 * t + 0.3).cos()
                + 0.4 * (TAU * 5.5e9 * t).sin()
        };
        let ps = PhaseStream::new(
            (0..len).map(|k| phase(k as f64 / DEFAULT_RATE)).collect(),
            DEFAULT_RATE,
            0.0,
        )
        .unwrap();
        let w = synthesize_pm(f, &ps, 0.03).unwrap();
        let back = extract_phase(&w, f).unwrap();
        let gd = ((0.0 - back.t0) * DEFAULT_RATE).round() as usize;
        let worst = (2 * gd..len)
            .map(|k| (back.values[k] - ps.values[k - gd]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "max error {worst}");
    }

    #[test]
    fn above_nyquist_rejected() {
        let p = PhaseStream::new(vec![0.0], 1.0, 0.0).unwrap();
        assert!(synthesize_pm(0.6, &p, 1.0).is_err());
        let w = Waveform::zeros(4, 1.0, 0.0).unwrap();
        assert!(extract_phase(&w, 0.5).is_err());
    }
}
