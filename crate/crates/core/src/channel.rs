//! Free-space channel between two radios: per element-pair gains and
//! delays, sub-sample delayed propagation and thermal noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::array::{ArrayGeometry, ElementPattern, C};
use crate::signals::{kaiser_window, SignalError, Waveform};

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reference noise temperature (K).
pub const T0: f64 = 290.0;

/// Length of the windowed-sinc fractional delay kernel.
pub const FRACTIONAL_TAPS: usize = 32;
const FRACTIONAL_BETA: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("expected {expected} waveforms, got {got}")]
    ElementCount { expected: usize, got: usize },
    #[error("waveforms disagree on rate or alignment")]
    Misaligned,
    #[error("delay {delay_samples} samples is shorter than the causal horizon of {needed}")]
    DelayTooShort { delay_samples: usize, needed: usize },
    #[error("distance must be positive, got {0}")]
    Distance(f64),
}

/// Free-space gain in dB between antennas of `g_tx` and `g_rx` dBi.
pub fn friis_gain(d: f64, f: f64, g_tx: f64, g_rx: f64) -> f64 {
    g_tx + g_rx - 20.0 * (4.0 * PI * d * f / C).log10()
}

/// Receiver noise referenced to the antenna.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub noise_figure_db: f64,
    /// Reference bandwidth in Hz.
    pub bandwidth: f64,
}

impl NoiseSpec {
    /// `k·T·B·F` in watts.
    pub fn in_band_power(&self) -> f64 {
        BOLTZMANN * T0 * self.bandwidth * 10f64.powf(self.noise_figure_db / 10.0)
    }

    /// Standard deviation of white samples at `rate` whose one-sided PSD is
    /// `k·T·F`.
    pub fn sample_sigma(&self, rate: f64) -> f64 {
        (BOLTZMANN * T0 * 10f64.powf(self.noise_figure_db / 10.0) * rate / 2.0).sqrt()
    }
}

/// Adds white Gaussian noise with PSD `k·T·F`.
pub fn add_noise<R: Rng + ?Sized>(wave: &Waveform, spec: &NoiseSpec, rng: &mut R) -> Waveform {
    let sigma = spec.sample_sigma(wave.rate());
    let samples = wave
        .samples()
        .iter()
        .map(|&s| s + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Waveform::new(samples, wave.rate(), wave.t0()).expect("finite noise")
}

/// Kernel of `FRACTIONAL_TAPS` taps delaying by `FRACTIONAL_TAPS/2 - 1 + frac`
/// samples.
pub fn fractional_kernel(frac: f64) -> Vec<f64> {
    let n = FRACTIONAL_TAPS;
    let center = (n / 2 - 1) as f64 + frac;
    (0..n)
        .map(|k| {
            let x = k as f64 - center;
            let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
            sinc * kaiser_window(x, (n / 2) as f64, FRACTIONAL_BETA)
        })
        .collect()
}

/// Splits a delay in samples into whole samples and a fraction in `[0, 1)`.
/// Delays within 1e-9 samples of an integer are snapped to it.
fn split_delay(samples: f64) -> (usize, f64) {
    let nearest = samples.round();
    if (samples - nearest).abs() < 1e-9 {
        return (nearest as usize, 0.0);
    }
    let whole = samples.floor();
    (whole as usize, samples - whole)
}

/// Delays a waveform by `delay` seconds; samples before the start are zero.
pub fn fractional_delay(wave: &Waveform, delay: f64) -> Waveform {
    assert!(delay >= 0.0, "negative delay");
    let (whole, frac) = split_delay(delay * wave.rate());
    let x = wave.samples();
    let out = if frac == 0.0 {
        (0..x.len())
            .map(|n| if n >= whole { x[n - whole] } else { 0.0 })
            .collect()
    } else {
        let h = fractional_kernel(frac);
        let lead = (FRACTIONAL_TAPS / 2 - 1) as isize;
        (0..x.len() as isize)
            .map(|n| {
                h.iter()
                    .enumerate()
                    .map(|(k, &hk)| {
                        let idx = n - whole as isize - k as isize + lead;
                        if idx >= 0 && (idx as usize) < x.len() {
                            hk * x[idx as usize]
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
            .collect()
    };
    Waveform::new(out, wave.rate(), wave.t0()).expect("finite delay output")
}

/// Gain (linear amplitude) and delay of one transmit → receive element pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLink {
    pub gain: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AtoB,
    BtoA,
}

/// Everything needed to place two arrays facing each other.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub geom_a: ArrayGeometry,
    pub geom_b: ArrayGeometry,
    pub pattern_a: ElementPattern,
    pub pattern_b: ElementPattern,
    pub distance: f64,
    /// Angle of B seen from A's boresight (radians).
    pub angle_a: f64,
    /// Angle of A seen from B's boresight (radians).
    pub angle_b: f64,
    pub extra_group_delay: f64,
    /// Carrier radiated by A (used for A → B gains).
    pub freq_ab: f64,
    /// Carrier radiated by B.
    pub freq_ba: f64,
    /// Fixed element-to-element loss in dB replacing Friis, antenna gains
    /// included.
    pub path_loss_override: Option<f64>,
}

impl ChannelSpec {
    /// The same link described with the radios' roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            geom_a: self.geom_b.clone(),
            geom_b: self.geom_a.clone(),
            pattern_a: self.pattern_b,
            pattern_b: self.pattern_a,
            distance: self.distance,
            angle_a: self.angle_b,
            angle_b: self.angle_a,
            extra_group_delay: self.extra_group_delay,
            freq_ab: self.freq_ba,
            freq_ba: self.freq_ab,
            path_loss_override: self.path_loss_override,
        }
    }
}

/// Per-pair links in both directions. `ab[i][j]` runs from A's element `i` to
/// B's element `j`; `ba[j][i]` from B's element `j` to A's element `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub ab: Vec<Vec<PairLink>>,
    pub ba: Vec<Vec<PairLink>>,
    pub distance: f64,
    pub angle_a: f64,
    pub angle_b: f64,
    pub extra_group_delay: f64,
    /// Set when either radio lies outside the other's coverage cone; all
    /// gains are then zero.
    pub out_of_coverage: bool,
}

impl ChannelMatrix {
    pub fn links(&self, dir: Direction) -> &[Vec<PairLink>] {
        match dir {
            Direction::AtoB => &self.ab,
            Direction::BtoA => &self.ba,
        }
    }

    pub fn min_delay(&self) -> f64 {
        self.ab
            .iter()
            .chain(&self.ba)
            .flatten()
            .map(|l| l.delay)
            .fold(f64::INFINITY, f64::min)
    }

    /// Mean delay over all pairs of one direction.
    pub fn mean_delay(&self, dir: Direction) -> f64 {
        let links = self.links(dir);
        let n = links.iter().map(Vec::len).sum::<usize>() as f64;
        links.iter().flatten().map(|l| l.delay).sum::<f64>() / n
    }
}

type Vec2 = (f64, f64);

fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    (c * v.0 - s * v.1, s * v.0 + c * v.1)
}

/// Boresight and axis of a radio that sees its partner along `toward` at
/// `angle` off boresight. Both radios use this rule, so exchanging roles
/// mirrors the construction exactly.
fn frame(toward: Vec2, angle: f64) -> (Vec2, Vec2) {
    let boresight = rotate(toward, -angle);
    let axis = (boresight.1, -boresight.0);
    (boresight, axis)
}

fn off_boresight(boresight: Vec2, v: Vec2) -> f64 {
    let norm = (v.0 * v.0 + v.1 * v.1).sqrt();
    ((boresight.0 * v.0 + boresight.1 * v.1) / norm).clamp(-1.0, 1.0).acos()
}

/// Builds the exact per-pair channel from element coordinates.
pub fn build_channel(spec: &ChannelSpec) -> Result<ChannelMatrix, ChannelError> {
    if !(spec.distance > 0.0 && spec.distance.is_finite()) {
        return Err(ChannelError::Distance(spec.distance));
    }
    // A at the origin with boresight +y and axis +x.
    let (bore_a, axis_a) = ((0.0, 1.0), (1.0, 0.0));
    let to_b = (-spec.angle_a.sin(), spec.angle_a.cos());
    let center_b = (spec.distance * to_b.0, spec.distance * to_b.1);
    let (bore_b, axis_b) = frame((-to_b.0, -to_b.1), spec.angle_b);

    let pos_a: Vec<Vec2> = spec
        .geom_a
        .positions()
        .iter()
        .map(|&x| (x * axis_a.0, x * axis_a.1))
        .collect();
    let pos_b: Vec<Vec2> = spec
        .geom_b
        .positions()
        .iter()
        .map(|&x| (center_b.0 + x * axis_b.0, center_b.1 + x * axis_b.1))
        .collect();

    let out_of_coverage =
        !spec.pattern_a.covers(spec.angle_a) || !spec.pattern_b.covers(spec.angle_b);

    let pair = |pa: Vec2, pb: Vec2, freq: f64| -> PairLink {
        let v = (pb.0 - pa.0, pb.1 - pa.1);
        let dist = (v.0 * v.0 + v.1 * v.1).sqrt();
        let delay = dist / C + spec.extra_group_delay;
        let ga = spec.pattern_a.gain_db(off_boresight(bore_a, v));
        let gb = spec.pattern_b.gain_db(off_boresight(bore_b, (-v.0, -v.1)));
        let gain = match (out_of_coverage, ga, gb) {
            (false, Some(ga), Some(gb)) => {
                let db = match spec.path_loss_override {
                    Some(loss) => -loss,
                    None => friis_gain(dist, freq, ga, gb),
                };
                10f64.powf(db / 20.0)
            }
            _ => 0.0,
        };
        PairLink { gain, delay }
    };

    let ab = pos_a
        .iter()
        .map(|&pa| pos_b.iter().map(|&pb| pair(pa, pb, spec.freq_ab)).collect())
        .collect();
    let ba = pos_b
        .iter()
        .map(|&pb| pos_a.iter().map(|&pa| pair(pa, pb, spec.freq_ba)).collect())
        .collect();
    Ok(ChannelMatrix {
        ab,
        ba,
        distance: spec.distance,
        angle_a: spec.angle_a,
        angle_b: spec.angle_b,
        extra_group_delay: spec.extra_group_delay,
        out_of_coverage,
    })
}

/// One-shot propagation of whole waveforms:
/// `rx_j = Σ_i gain_ij · fractional_delay(tx_i, delay_ij)`.
pub fn propagate(
    tx: &[Waveform],
    chan: &ChannelMatrix,
    dir: Direction,
) -> Result<Vec<Waveform>, ChannelError> {
    let links = chan.links(dir);
    if tx.len() != links.len() {
        return Err(ChannelError::ElementCount {
            expected: links.len(),
            got: tx.len(),
        });
    }
    let first = &tx[0];
    if tx
        .iter()
        .any(|w| w.rate() != first.rate() || w.t0() != first.t0() || w.len() != first.len())
    {
        return Err(ChannelError::Misaligned);
    }
    let n_rx = links[0].len();
    let mut rx = vec![vec![0.0; first.len()]; n_rx];
    for (wave, row) in tx.iter().zip(links) {
        for (acc, link) in rx.iter_mut().zip(row) {
            if link.gain == 0.0 {
                continue;
            }
            let d = fractional_delay(wave, link.delay);
            for (a, s) in acc.iter_mut().zip(d.samples()) {
                *a += link.gain * s;
            }
        }
    }
    rx.into_iter()
        .map(|s| Waveform::new(s, first.rate(), first.t0()).map_err(Into::into))
        .collect()
}

/// Per-transmit-element sample history with absolute indexing. Memory is
/// bounded by compacting once the buffer doubles its required span.
struct History {
    base: usize,
    data: Vec<f64>,
    keep: usize,
}

impl History {
    fn push(&mut self, block: &[f64]) {
        self.data.extend_from_slice(block);
        if self.data.len() > 2 * self.keep {
            let drop = self.data.len() - self.keep;
            self.data.drain(..drop);
            self.base += drop;
        }
    }

    #[inline]
    fn window(&self, start: isize, len: usize) -> Option<&[f64]> {
        let off = start - self.base as isize;
        if off < 0 {
            return None;
        }
        self.data.get(off as usize..off as usize + len)
    }

    fn end(&self) -> usize {
        self.base + self.data.len()
    }
}

struct PairKernel {
    tx: usize,
    rx: usize,
    whole: usize,
    /// Gain-scaled taps in time-reversed order.
    taps: Vec<f64>,
}

/// Streaming propagation for one direction with per-pair delay lines.
///
/// Transmit samples are appended block by block; receive blocks are computed
/// only from samples already pushed, so every pair delay must exceed the
/// block length plus the interpolator lookahead.
pub struct Propagator {
    pairs: Vec<PairKernel>,
    history: Vec<History>,
    n_rx: usize,
    lookahead: usize,
}

impl Propagator {
    pub fn new(links: &[Vec<PairLink>], rate: f64, block: usize) -> Result<Self, ChannelError> {
        let n_rx = links.first().map_or(0, Vec::len);
        let lookahead = FRACTIONAL_TAPS / 2;
        let needed = block + lookahead;
        let mut pairs = Vec::new();
        let mut max_whole = 0;
        for (i, row) in links.iter().enumerate() {
            for (j, link) in row.iter().enumerate() {
                let (whole, frac) = split_delay(link.delay * rate);
                if whole < needed {
                    return Err(ChannelError::DelayTooShort {
                        delay_samples: whole,
                        needed,
                    });
                }
                max_whole = max_whole.max(whole);
                if link.gain == 0.0 {
                    continue;
                }
                let mut taps: Vec<f64> = fractional_kernel(frac)
                    .into_iter()
                    .map(|h| h * link.gain)
                    .collect();
                taps.reverse();
                pairs.push(PairKernel {
                    tx: i,
                    rx: j,
                    whole,
                    taps,
                });
            }
        }
        let keep = max_whole + FRACTIONAL_TAPS + block;
        let history = (0..links.len())
            .map(|_| History {
                base: 0,
                data: Vec::with_capacity(2 * keep + block),
                keep,
            })
            .collect();
        Ok(Self {
            pairs,
            history,
            n_rx,
            lookahead,
        })
    }

    /// Number of transmit samples pushed so far.
    pub fn pushed(&self) -> usize {
        self.history.first().map_or(0, History::end)
    }

    /// Appends one block per transmit element.
    pub fn push_tx(&mut self, blocks: &[&[f64]]) {
        for (h, b) in self.history.iter_mut().zip(blocks) {
            h.push(b);
        }
    }

    /// Received samples `start .. start + out[j].len()` for every receive
    /// element, overwriting `out`. Transmit samples before time zero are 0.
    pub fn receive(&self, start: usize, out: &mut [Vec<f64>]) {
        assert_eq!(out.len(), self.n_rx);
        for o in out.iter_mut() {
            o.iter_mut().for_each(|v| *v = 0.0);
        }
        let n = FRACTIONAL_TAPS;
        for p in &self.pairs {
            let hist = &self.history[p.tx];
            let acc = &mut out[p.rx];
            let len = acc.len();
            // Output n uses tx[n - whole - k + lead], k in 0..taps.
            let first = start as isize - p.whole as isize + self.lookahead as isize - n as isize;
            debug_assert!(first + (len + n - 1) as isize <= hist.end() as isize);
            match hist.window(first, len + n - 1) {
                Some(x) => {
                    for (m, a) in acc.iter_mut().enumerate() {
                        let w = &x[m..m + n];
                        *a += w.iter().zip(&p.taps).map(|(x, h)| x * h).sum::<f64>();
                    }
                }
                None => {
                    for (m, a) in acc.iter_mut().enumerate() {
                        for (k, h) in p.taps.iter().enumerate() {
                            let idx = first + (m + k) as isize;
                            if idx >= 0 {
                                if let Some(x) = hist.window(idx, 1) {
                                    *a += x[0] * h;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Streaming white-noise source for one receive element.
pub struct NoiseSource {
    sigma: f64,
}

impl NoiseSource {
    pub fn new(spec: &NoiseSpec, rate: f64) -> Self {
        Self {
            sigma: spec.sample_sigma(rate),
        }
    }

    pub fn add<R: Rng + ?Sized>(&self, block: &mut [f64], rng: &mut R) {
        for s in block {
            *s += self.sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
}
