use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::signals::wrap_phase;
use crate::transceiver::{constellation_offset, decide_quadrant, quadrant_phase, Quadrant};

/// Lock detector settings. Windows are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockCriteria {
    pub window_s: f64,
    /// Allowed relative deviation from the final value.
    pub tolerance: f64,
    /// Required final / initial amplitude ratio.
    pub growth: f64,
}

impl Default for LockCriteria {
    fn default() -> Self {
        Self {
            window_s: 200e-9,
            tolerance: 0.2,
            growth: 1.25,
        }
    }
}

/// Earliest time at which a `window_s` stretch of `trace` (sampled every
/// `dt`) stays within `±tolerance` of the mean of the last window, provided
/// that final value is `growth` times the mean of the first window.
pub fn detect_lock_with(
    trace: &[f64],
    dt: f64,
    criteria: &LockCriteria,
) -> Result<Option<f64>, EngineError> {
    let w = (criteria.window_s / dt).round() as usize;
    if w == 0 || trace.len() < 2 * w {
        return Err(EngineError::TraceTooShort {
            have_s: trace.len() as f64 * dt,
            need_s: 2.0 * criteria.window_s,
        });
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let initial = mean(&trace[..w]);
    let last = mean(&trace[trace.len() - w..]);
    if !(last > criteria.growth * initial) {
        return Ok(None);
    }
    let band = criteria.tolerance * last;
    // Window [t, t + w] spans w + 1 samples; scan for the first run of
    // in-band samples that long.
    let mut run = 0;
    for (k, &x) in trace.iter().enumerate() {
        if (x - last).abs() <= band {
            run += 1;
            if run > w {
                return Ok(Some((k - w) as f64 * dt));
            }
        } else {
            run = 0;
        }
    }
    Ok(None)
}

pub fn detect_lock(trace: &[f64], dt: f64) -> Result<Option<f64>, EngineError> {
    detect_lock_with(trace, dt, &LockCriteria::default())
}

/// Symbols over which slowly varying offsets are averaged out before
/// computing the residual (each side).
const SNR_SMOOTH: usize = 8;

fn residual_power(phases: &[f64], sent: &[Quadrant]) -> (f64, f64) {
    let raw: Vec<f64> = phases
        .iter()
        .zip(sent)
        .map(|(&x, &q)| wrap_phase(x - quadrant_phase(q)))
        .collect();
    let c0 = raw.iter().map(|&r| Complex64::from_polar(1.0, r)).sum::<Complex64>().arg();
    let r: Vec<f64> = raw.iter().map(|&v| wrap_phase(v - c0)).collect();
    let n = r.len();
    // Remove the slow common rotation with a centered moving average.
    let detrended: Vec<f64> = (0..n)
        .map(|m| {
            let lo = m.saturating_sub(SNR_SMOOTH);
            let hi = (m + SNR_SMOOTH + 1).min(n);
            r[m] - r[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    // Remove the mean per (previous, next) symbol context so deterministic
    // inter-symbol interference does not count as noise.
    let ctx = |m: usize| -> usize {
        let prev = if m > 0 { sent[m - 1].wrapping_sub(sent[m]) & 3 } else { 0 };
        let next = if m + 1 < n { sent[m + 1].wrapping_sub(sent[m]) & 3 } else { 0 };
        (prev * 4 + next) as usize
    };
    let mut sums = [0.0; 16];
    let mut counts = [0usize; 16];
    for m in 0..n {
        sums[ctx(m)] += detrended[m];
        counts[ctx(m)] += 1;
    }
    let err = (0..n)
        .map(|m| {
            let c = ctx(m);
            (detrended[m] - sums[c] / counts[c] as f64).powi(2)
        })
        .sum::<f64>()
        / n as f64;
    let signal = phases.iter().map(|&x| wrap_phase(x - c0).powi(2)).sum::<f64>() / n as f64;
    (signal, err)
}

/// Minimum number of slices for a meaningful SNR estimate.
pub const MIN_SNR_SYMBOLS: usize = 64;

/// Phase-domain SNR of each stream, sliced once per symbol and aligned with
/// the transmitted constellation points `sent`. Returns combined SNR minus
/// the mean per-element SNR in dB.
pub fn measure_snr_gain(
    elements: &[Vec<f64>],
    combined: &[f64],
    sent: &[Quadrant],
) -> Result<f64, EngineError> {
    let n = combined.len();
    if n < MIN_SNR_SYMBOLS || sent.len() != n || elements.iter().any(|e| e.len() != n) {
        return Err(EngineError::NotLocked(format!(
            "SNR needs {MIN_SNR_SYMBOLS}+ aligned symbols, got {n}"
        )));
    }
    if elements.is_empty() {
        return Err(EngineError::NotLocked("no element streams".into()));
    }
    let snr = |x: &[f64]| {
        let (s, e) = residual_power(x, sent);
        s / e.max(f64::MIN_POSITIVE)
    };
    let per_element = elements.iter().map(|e| snr(e)).sum::<f64>() / elements.len() as f64;
    Ok(10.0 * (snr(combined) / per_element).log10())
}

/// One point of an eye diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyePoint {
    /// Time within the two-symbol fold window, seconds.
    pub fold_time_s: f64,
    /// Phase wrapped to (-π, π].
    pub phase: f64,
}

/// Folds `(time, phase)` samples modulo two symbol periods. `origin` is
/// the time of a symbol boundary.
pub fn eye_samples(times: &[f64], phases: &[f64], symbol_period: f64, origin: f64) -> Vec<EyePoint> {
    let span = 2.0 * symbol_period;
    times
        .iter()
        .zip(phases)
        .map(|(&t, &p)| EyePoint {
            fold_time_s: (t - origin).rem_euclid(span),
            phase: wrap_phase(p),
        })
        .collect()
}

/// Smallest vertical gap in degrees between adjacent constellation levels,
/// using eye points within `±aperture` of either mid-symbol instant. `None`
/// if any level is empty.
pub fn eye_opening_deg(eye: &[EyePoint], symbol_period: f64, aperture: f64) -> Option<f64> {
    let mids = [0.5 * symbol_period, 1.5 * symbol_period];
    let pts: Vec<f64> = eye
        .iter()
        .filter(|p| mids.iter().any(|m| (p.fold_time_s - m).abs() <= aperture))
        .map(|p| p.phase)
        .collect();
    if pts.is_empty() {
        return None;
    }
    let offset = constellation_offset(&pts);
    // Per level: lowest and highest deviation from the level center.
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for &p in &pts {
        let q = decide_quadrant(p - offset) as usize;
        let d = wrap_phase(p - offset - quadrant_phase(q as Quadrant));
        lo[q] = lo[q].min(d);
        hi[q] = hi[q].max(d);
    }
    if lo.iter().any(|v| v.is_infinite()) {
        return None;
    }
    // Levels counter-clockwise: q, q+1 are adjacent 90° apart.
    let gap = (0..4)
        .map(|q| {
            let next = (q + 1) % 4;
            FRAC_PI_2 + lo[next] - hi[q]
        })
        .fold(TAU, f64::min);
    debug_assert!(gap <= PI);
    Some(gap.to_degrees())
}
