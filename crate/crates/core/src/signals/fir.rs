use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{SignalError, Waveform};

/// Largest filter the designers will produce before giving up.
pub const MAX_TAPS: usize = 1 << 15;

/// Filters longer than this are applied by FFT overlap-save.
const DIRECT_LIMIT: usize = 96;

/// Linear-phase FIR filter with an odd number of symmetric taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
    rate: f64,
}

impl FirFilter {
    pub fn new(taps: Vec<f64>, rate: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        if taps.len() % 2 == 0 {
            return Err(SignalError::InvalidTaps(format!(
                "tap count must be odd, got {}",
                taps.len()
            )));
        }
        let n = taps.len();
        for i in 0..n / 2 {
            let (a, b) = (taps[i], taps[n - 1 - i]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-300) {
                return Err(SignalError::InvalidTaps(format!(
                    "taps not symmetric at index {i}"
                )));
            }
        }
        Ok(Self { taps, rate })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Group delay in samples.
    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let w = -2.0 * PI * freq / self.rate;
        self.taps
            .iter()
            .enumerate()
            .map(|(k, &h)| Complex64::from_polar(h, w * k as f64))
            .sum()
    }

    /// Filters a whole waveform from zero initial state. The output has the
    /// input's length and its `t0` is moved back by the group delay, so output
    /// sample `k` lines up in time with input sample `k - group_delay`.
    pub fn apply(&self, wave: &Waveform) -> Result<Waveform, SignalError> {
        if wave.rate() != self.rate {
            return Err(SignalError::RateMismatch {
                filter: self.rate,
                signal: wave.rate(),
            });
        }
        let mut out = vec![0.0; wave.len()];
        self.stream().process(wave.samples(), &mut out);
        Waveform::new(
            out,
            self.rate,
            wave.t0() - self.group_delay() as f64 / self.rate,
        )
    }

    /// Stateful single-stream convolution engine for block processing.
    pub fn stream(&self) -> FirStream {
        FirStream::new(&self.taps)
    }
}

/// Streaming FIR convolution holding input history across blocks.
///
/// Short filters convolve directly; long ones use FFT overlap-save sized to
/// the filter. Either way each call produces exactly one output per input.
pub struct FirStream {
    taps: Vec<f64>,
    history: Vec<f64>,
    fft: Option<FftState>,
}

struct FftState {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FirStream {
    fn new(taps: &[f64]) -> Self {
        let m = taps.len();
        let fft = (m > DIRECT_LIMIT).then(|| {
            let len = (4 * m).next_power_of_two().max(4096);
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let mut spectrum = vec![Complex64::default(); len];
            for (s, &h) in spectrum.iter_mut().zip(taps) {
                *s = Complex64::new(h / len as f64, 0.0);
            }
            forward.process(&mut spectrum);
            let scratch_len = forward
                .get_inplace_scratch_len()
                .max(inverse.get_inplace_scratch_len());
            FftState {
                len,
                forward,
                inverse,
                spectrum,
                buf: vec![Complex64::default(); len],
                scratch: vec![Complex64::default(); scratch_len],
            }
        });
        Self {
            taps: taps.to_vec(),
            history: vec![0.0; m - 1],
            fft,
        }
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|h| *h = 0.0);
    }

    /// Filters `input` into `output` (same length), continuing from the
    /// previous call's state.
    pub fn process(&mut self, input: &[f64], output: &mut [f64]) {
        assert_eq!(input.len(), output.len());
        if self.fft.is_some() {
            self.process_fft(input, output);
        } else {
            self.process_direct(input, output);
        }
    }

    fn process_direct(&mut self, input: &[f64], output: &mut [f64]) {
        let m = self.taps.len();
        let mut ext = Vec::with_capacity(m - 1 + input.len());
        ext.extend_from_slice(&self.history);
        ext.extend_from_slice(input);
        for (n, y) in output.iter_mut().enumerate() {
            // ext[n + m - 1] is the newest sample for output n.
            let window = &ext[n..n + m];
            *y = window
                .iter()
                .rev()
                .zip(&self.taps)
                .map(|(x, h)| x * h)
                .sum();
        }
        let keep = ext.len() - (m - 1);
        self.history.copy_from_slice(&ext[keep..]);
    }

    fn process_fft(&mut self, input: &[f64], output: &mut [f64]) {
        let m = self.taps.len();
        let st = self.fft.as_mut().expect("fft state");
        let hop = st.len - (m - 1);
        for (chunk_in, chunk_out) in input.chunks(hop).zip(output.chunks_mut(hop)) {
            for (b, &h) in st.buf.iter_mut().zip(&self.history) {
                *b = Complex64::new(h, 0.0);
            }
            for (b, &x) in st.buf[m - 1..].iter_mut().zip(chunk_in) {
                *b = Complex64::new(x, 0.0);
            }
            for b in st.buf[m - 1 + chunk_in.len()..].iter_mut() {
                *b = Complex64::default();
            }
            st.forward
                .process_with_scratch(&mut st.buf, &mut st.scratch);
            for (b, h) in st.buf.iter_mut().zip(&st.spectrum) {
                *b *= h;
            }
            st.inverse
                .process_with_scratch(&mut st.buf, &mut st.scratch);
            for (y, b) in chunk_out.iter_mut().zip(&st.buf[m - 1..]) {
                *y = b.re;
            }
            // Slide history forward by the chunk.
            let n = chunk_in.len();
            if n >= m - 1 {
                self.history.copy_from_slice(&chunk_in[n - (m - 1)..]);
            } else {
                self.history.rotate_left(n);
                let start = m - 1 - n;
                self.history[start..].copy_from_slice(chunk_in);
            }
        }
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser window evaluated at offset `x` from the window center, where the
/// window spans `[-half_width, half_width]`.
pub fn kaiser_window(x: f64, half_width: f64, beta: f64) -> f64 {
    let r = x / half_width;
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

fn kaiser_beta(atten: f64) -> f64 {
    if atten > 50.0 {
        0.1102 * (atten - 8.7)
    } else if atten >= 21.0 {
        0.5842 * (atten - 21.0).powf(0.4) + 0.07886 * (atten - 21.0)
    } else {
        0.0
    }
}

fn kaiser_length(atten: f64, transition: f64, rate: f64) -> usize {
    let dw = 2.0 * PI * transition / rate;
    let n = ((atten - 7.95) / (2.285 * dw)).ceil().max(3.0) as usize + 1;
    n | 1
}

/// Windowed-sinc lowpass prototype with unit DC gain.
fn windowed_lowpass(len: usize, cutoff: f64, rate: f64, beta: f64) -> Vec<f64> {
    let fc = cutoff / rate;
    let mid = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let x = k as f64 - mid;
            let ideal = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            ideal * kaiser_window(x, mid + 1.0, beta)
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}

/// Dense magnitude response on `[0, rate/2]` via a zero-padded FFT.
fn magnitude_grid(taps: &[f64], points: usize) -> Vec<f64> {
    let len = (2 * points).next_power_of_two().max(taps.len().next_power_of_two() * 4);
    let mut buf: Vec<Complex64> = taps.iter().map(|&t| Complex64::new(t, 0.0)).collect();
    buf.resize(len, Complex64::default());
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf[..=len / 2].iter().map(|c| c.norm()).collect()
}

struct Mask {
    pass: Vec<(f64, f64)>,
    stop: Vec<(f64, f64)>,
    ripple_db: f64,
    atten_db: f64,
}

impl Mask {
    fn satisfied(&self, taps: &[f64], rate: f64) -> bool {
        let mags = magnitude_grid(taps, 1 << 17);
        let df = rate / (2.0 * (mags.len() - 1) as f64);
        let in_any = |f: f64, bands: &[(f64, f64)]| bands.iter().any(|&(a, b)| f >= a && f <= b);
        mags.iter().enumerate().all(|(k, &m)| {
            let f = k as f64 * df;
            let db = 20.0 * m.max(1e-300).log10();
            if in_any(f, &self.pass) {
                db.abs() <= self.ripple_db
            } else if in_any(f, &self.stop) {
                db <= -self.atten_db
            } else {
                true
            }
        })
    }
}

/// Kaiser-designed lowpass with passband edge `pass_edge` (ripple within
/// 0.1 dB) and at least `atten` dB rejection above `stop_edge`.
pub fn design_lowpass(
    pass_edge: f64,
    stop_edge: f64,
    rate: f64,
    atten: f64,
) -> Result<FirFilter, SignalError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SignalError::InvalidRate(rate));
    }
    if !(pass_edge > 0.0 && stop_edge > pass_edge && stop_edge <= rate / 2.0) {
        return Err(SignalError::Design(format!(
            "lowpass edges must satisfy 0 < {pass_edge} < {stop_edge} <= {}",
            rate / 2.0
        )));
    }
    let mask = Mask {
        pass: vec![(0.0, pass_edge)],
        stop: vec![(stop_edge, rate / 2.0)],
        ripple_db: 0.1,
        atten_db: atten,
    };
    let cutoff = 0.5 * (pass_edge + stop_edge);
    search(atten, stop_edge - pass_edge, rate, &mask, |len, beta| {
        windowed_lowpass(len, cutoff, rate, beta)
    })
}

/// Linear-phase band-pass centered on `center` with flat response (ripple
/// ≤ 0.5 dB) over `center ± bandwidth/2` and at least `stop_atten` dB
/// rejection beyond `center ± 0.75·bandwidth` (1.5× the passband half-width).
pub fn design_bandpass(
    center: f64,
    bandwidth: f64,
    rate: f64,
    stop_atten: f64,
) -> Result<FirFilter, SignalError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SignalError::InvalidRate(rate));
    }
    let half = bandwidth / 2.0;
    let stop_off = 1.5 * half;
    if !(bandwidth > 0.0 && stop_atten > 0.0) {
        return Err(SignalError::Design(format!(
            "bandwidth {bandwidth} and attenuation {stop_atten} must be positive"
        )));
    }
    if center + half >= rate / 2.0 || center - half <= 0.0 {
        return Err(SignalError::Design(format!(
            "passband {}..{} Hz does not fit in (0, {}) Hz",
            center - half,
            center + half,
            rate / 2.0
        )));
    }
    let mut stop = Vec::new();
    if center - stop_off > 0.0 {
        stop.push((0.0, center - stop_off));
    }
    if center + stop_off < rate / 2.0 {
        stop.push((center + stop_off, rate / 2.0));
    }
    let mask = Mask {
        pass: vec![(center - half, center + half)],
        stop,
        ripple_db: 0.5,
        atten_db: stop_atten,
    };
    let cutoff = 0.5 * (half + stop_off);
    search(stop_atten, stop_off - half, rate, &mask, |len, beta| {
        let proto = windowed_lowpass(len, cutoff, rate, beta);
        let mid = (len - 1) as f64 / 2.0;
        let w0 = 2.0 * PI * center / rate;
        let mut taps: Vec<f64> = proto
            .iter()
            .enumerate()
            .map(|(k, &h)| 2.0 * h * (w0 * (k as f64 - mid)).cos())
            .collect();
        // Unit gain at the center frequency.
        let g: Complex64 = taps
            .iter()
            .enumerate()
            .map(|(k, &h)| Complex64::from_polar(h, -w0 * k as f64))
            .sum();
        let g = g.norm();
        taps.iter_mut().for_each(|t| *t /= g);
        taps
    })
}

fn search(
    atten: f64,
    transition: f64,
    rate: f64,
    mask: &Mask,
    build: impl Fn(usize, f64) -> Vec<f64>,
) -> Result<FirFilter, SignalError> {
    let design_atten = atten + 3.0;
    let beta = kaiser_beta(design_atten);
    let mut len = kaiser_length(design_atten, transition, rate);
    while len <= MAX_TAPS {
        let taps = build(len, beta);
        if mask.satisfied(&taps, rate) {
            return FirFilter::new(symmetrize(taps), rate);
        }
        len = ((len as f64 * 1.1) as usize + 2) | 1;
    }
    Err(SignalError::Design(format!(
        "mask needs more than {MAX_TAPS} taps (transition {transition} Hz at {rate} Hz)"
    )))
}

fn symmetrize(mut taps: Vec<f64>) -> Vec<f64> {
    let n = taps.len();
    for i in 0..n / 2 {
        let avg = 0.5 * (taps[i] + taps[n - 1 - i]);
        taps[i] = avg;
        taps[n - 1 - i] = avg;
    }
    taps
}
