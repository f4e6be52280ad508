use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{detect_lock_with, eye_opening_deg, eye_samples, measure_snr_gain, EyePoint, LockCriteria};
use super::{EngineError, LinkConfig};
use crate::channel::{build_channel, Direction, NoiseSource, NoiseSpec, Propagator};
use crate::signals::wrap_phase;
use crate::transceiver::{
    constellation_offset, decide_quadrant, decode_quadrants, BaselineRestorer, QpskMode,
    RadioConfig, Receiver, RxBlock, SymbolSource, Transmitter,
};

/// Envelope resolution.
pub const ENVELOPE_DT_S: f64 = 1e-9;
/// Envelope smoothing window, in envelope steps.
pub const ENVELOPE_SMOOTH: usize = 10;
/// Eye traces keep every `EYE_DECIMATION`-th receiver output sample.
pub const EYE_DECIMATION: usize = 5;
/// Half-width of the mid-symbol aperture used for the eye opening, as a
/// fraction of the symbol period.
pub const EYE_APERTURE: f64 = 0.05;
/// Symbol-alignment search range either side of the nominal latency.
const MAX_LAG: i64 = 2;

/// Results for one radio. BER, SNR and eye describe the data this radio
/// receives from its partner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMetrics {
    /// `[element][k]`: received amplitude, 10 ns moving average, at
    /// `(k + 1)·ENVELOPE_DT_S`.
    pub envelope: Vec<Vec<f64>>,
    pub element_lock_times_s: Vec<Option<f64>>,
    /// Latest element lock, or `None` if any element never locks.
    pub lock_time_s: Option<f64>,
    pub ber: Option<f64>,
    pub bit_errors: usize,
    pub bits_compared: usize,
    pub snr_gain_db: Option<f64>,
    /// Combined data phase after baseline restoration, post-lock.
    pub eye: Vec<EyePoint>,
    pub eye_opening_deg: Option<f64>,
    /// Opening of the combined phase before baseline restoration.
    pub eye_opening_raw_deg: Option<f64>,
    /// Mean received power over the last vs the first 200 ns, all elements.
    pub power_ratio_db: f64,
    /// Transmit-to-demodulated-phase latency used for symbol timing.
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub duration_s: f64,
    pub envelope_dt_s: f64,
    pub radio_a: RadioMetrics,
    pub radio_b: RadioMetrics,
}

impl LinkMetrics {
    pub fn locked(&self) -> bool {
        self.radio_a.lock_time_s.is_some() && self.radio_b.lock_time_s.is_some()
    }
}

/// Streaming state of one radio inside the link.
struct RadioSim {
    name: &'static str,
    mode: QpskMode,
    rx: Receiver,
    tx: Transmitter,
    src: SymbolSource,
    rng: ChaCha8Rng,
    noise: NoiseSource,
    input: Vec<Vec<f64>>,
    out: RxBlock,
    dphi: Vec<Vec<f64>>,
    data: Vec<f64>,
    tx_out: Vec<Vec<f64>>,
    bucket_len: usize,
    buckets: Vec<Vec<f64>>,
    /// Receiver latency in samples for the partner's transmissions.
    latency: f64,
    /// Mid-symbol slices of the partner's symbols.
    slices_combined: Vec<f64>,
    slices_element: Vec<Vec<f64>>,
    restorer: BaselineRestorer,
    eye_trace: Vec<f64>,
    eye_trace_raw: Vec<f64>,
}

impl RadioSim {
    fn new(
        name: &'static str,
        cfg: &RadioConfig,
        link: &LinkConfig,
        noise_seed: u64,
        payload_seed: u64,
        path_delay: f64,
    ) -> Result<Self, EngineError> {
        let rate = link.sample_rate_hz;
        let n = cfg.n_elements;
        let rx = Receiver::new(cfg, rate, 0.0)?;
        let latency = path_delay * rate + rx.group_delay() as f64;
        let noise = NoiseSource::new(
            &NoiseSpec {
                noise_figure_db: cfg.noise_figure_db,
                bandwidth: cfg.bpf_bandwidth_hz,
            },
            rate,
        );
        Ok(Self {
            name,
            mode: cfg.qpsk_mode,
            tx: Transmitter::new(cfg, rate)?,
            src: SymbolSource::new(cfg.qpsk_mode, cfg.symbol_rate_hz, rate, payload_seed)?,
            rng: ChaCha8Rng::seed_from_u64(noise_seed),
            noise,
            rx,
            input: vec![Vec::new(); n],
            out: RxBlock::default(),
            dphi: vec![Vec::new(); n],
            data: Vec::new(),
            tx_out: vec![Vec::new(); n],
            bucket_len: (ENVELOPE_DT_S * rate).round().max(1.0) as usize,
            buckets: vec![Vec::new(); n],
            latency,
            slices_combined: Vec::new(),
            slices_element: vec![Vec::new(); n],
            restorer: BaselineRestorer::new(cfg.phase_lpf_cutoff_hz, rate)?,
            eye_trace: Vec::new(),
            eye_trace_raw: Vec::new(),
        })
    }

    /// Receives, demodulates and transmits one block starting at absolute
    /// sample `start`. `partner` locates the symbols to slice.
    fn step(
        &mut self,
        start: usize,
        len: usize,
        incoming: &Propagator,
        partner: &SymbolSource,
    ) -> Result<(), EngineError> {
        for b in &mut self.input {
            b.resize(len, 0.0);
        }
        incoming.receive(start, &mut self.input);
        for b in &mut self.input {
            self.noise.add(b, &mut self.rng);
            if let Some(k) = b.iter().position(|x| !x.is_finite()) {
                return Err(EngineError::NonFinite {
                    radio: self.name,
                    sample: start + k,
                });
            }
        }
        self.rx.process(&self.input, &mut self.out);

        for (i, env) in self.out.envelope.iter().enumerate() {
            for (k, &a) in env.iter().enumerate() {
                let b = (start + k) / self.bucket_len;
                let bk = &mut self.buckets[i];
                if bk.len() <= b {
                    bk.resize(b + 1, 0.0);
                }
                bk[b] += a;
            }
        }
        // Mid-symbol slices of partner symbol m sit at
        // start(m) + sps/2 + latency.
        let sps = partner.samples_per_symbol();
        let mut next_slice = self.slice_at(partner, sps);
        for k in 0..len {
            let decide = start + k == next_slice;
            let raw = self.out.combined[k];
            let correction = self.restorer.correction();
            let restored = self.restorer.step(raw, decide);
            if (start + k) % EYE_DECIMATION == 0 {
                self.eye_trace.push(restored);
                self.eye_trace_raw.push(raw);
            }
            if decide {
                self.slices_combined.push(restored);
                for (i, s) in self.slices_element.iter_mut().enumerate() {
                    s.push(wrap_phase(self.out.data_high[i][k] + correction));
                }
                next_slice = self.slice_at(partner, sps);
            }
        }

        let n = self.dphi.len();
        for i in 0..n {
            self.dphi[i].clear();
            let (pi, p1) = (&self.out.phi_low[i], &self.out.phi_low[0]);
            self.dphi[i].extend(pi.iter().zip(p1).map(|(a, b)| a - b));
        }
        self.data.resize(len, 0.0);
        self.src.fill(&mut self.data);
        self.tx.process(&self.dphi, &self.data, &mut self.tx_out);
        for b in &self.tx_out {
            if let Some(k) = b.iter().position(|x| !x.is_finite()) {
                return Err(EngineError::NonFinite {
                    radio: self.name,
                    sample: start + k,
                });
            }
        }
        Ok(())
    }

    /// Sample index of the next partner symbol to slice.
    fn slice_at(&self, partner: &SymbolSource, sps: f64) -> usize {
        let m = self.slices_combined.len();
        (partner.symbol_start(m) as f64 + 0.5 * sps + self.latency).round() as usize
    }

    fn envelope(&self, total: usize) -> Vec<Vec<f64>> {
        let steps = total / self.bucket_len;
        self.buckets
            .iter()
            .map(|b| {
                let mut out = Vec::with_capacity(steps);
                let mut acc = 0.0;
                for k in 0..steps {
                    acc += b[k];
                    if k >= ENVELOPE_SMOOTH {
                        acc -= b[k - ENVELOPE_SMOOTH];
                    }
                    let count = (k + 1).min(ENVELOPE_SMOOTH) * self.bucket_len;
                    out.push(acc / count as f64);
                }
                out
            })
            .collect()
    }

    fn finish(
        &self,
        partner: &SymbolSource,
        link: &LinkConfig,
        symbol_rate: f64,
        lock: &LockCriteria,
    ) -> Result<RadioMetrics, EngineError> {
        let rate = link.sample_rate_hz;
        let total = link.total_samples();
        let envelope = self.envelope(total);
        let element_lock_times_s = envelope
            .iter()
            .map(|e| match detect_lock_with(e, ENVELOPE_DT_S, lock) {
                // Too short to ever show a settled envelope.
                Err(EngineError::TraceTooShort { .. }) => Ok(None),
                other => other,
            })
            .collect::<Result<Vec<_>, _>>()?;
        let lock_time_s = element_lock_times_s
            .iter()
            .try_fold(0.0f64, |acc, t| t.map(|t| acc.max(t)));

        let w = (lock.window_s / ENVELOPE_DT_S).round() as usize;
        let mean_power = |range: std::ops::Range<usize>| -> f64 {
            let mut s = 0.0;
            let mut c = 0usize;
            for e in &envelope {
                for &a in &e[range.clone()] {
                    s += a * a / 2.0;
                    c += 1;
                }
            }
            s / c.max(1) as f64
        };
        let steps = envelope.first().map_or(0, Vec::len);
        let power_ratio_db = if steps >= 2 * w && w > 0 {
            10.0 * (mean_power(steps - w..steps) / mean_power(0..w)).log10()
        } else {
            f64::NAN
        };

        let latency_s = self.latency / rate;
        let sps = partner.samples_per_symbol();
        let mut m = RadioMetrics {
            envelope,
            element_lock_times_s,
            lock_time_s,
            ber: None,
            bit_errors: 0,
            bits_compared: 0,
            snr_gain_db: None,
            eye: Vec::new(),
            eye_opening_deg: None,
            eye_opening_raw_deg: None,
            power_ratio_db,
            latency_s,
        };
        let Some(t_lock) = lock_time_s else {
            return Ok(m);
        };

        // First slice at or after lock.
        let slice_time = |k: usize| (partner.symbol_start(k) as f64 + 0.5 * sps + self.latency) / rate;
        let first = (0..self.slices_combined.len())
            .find(|&k| slice_time(k) >= t_lock)
            .unwrap_or(self.slices_combined.len());
        let post = &self.slices_combined[first..];
        if post.len() >= 2 {
            let offset = constellation_offset(post);
            let decided: Vec<u8> = post.iter().map(|&p| decide_quadrant(p - offset)).collect();
            let line = decode_quadrants(&decided, self.mode);
            // Differential decoding yields symbols first+1.., coherent first..
            let sym0 = first + usize::from(self.mode == QpskMode::Differential);
            let mut best: Option<(usize, usize, i64)> = None;
            for lag in -MAX_LAG..=MAX_LAG {
                let mut errors = 0;
                let mut bits = 0;
                for (j, pair) in line.chunks(2).enumerate() {
                    let tx_sym = sym0 as i64 + j as i64 + lag;
                    if tx_sym < 0 || (tx_sym as usize) >= partner.sent.len() {
                        continue;
                    }
                    let base = 2 * tx_sym as usize;
                    for b in 0..2 {
                        let payload = pair[b] ^ partner.prbs[base + b];
                        errors += usize::from(payload != partner.payload[base + b]);
                        bits += 1;
                    }
                }
                if bits > 0 && best.is_none_or(|(e, n, _)| (errors as f64 / bits as f64) < e as f64 / n as f64) {
                    best = Some((errors, bits, lag));
                }
            }
            if let Some((errors, bits, lag)) = best {
                m.ber = Some(errors as f64 / bits as f64);
                m.bit_errors = errors;
                m.bits_compared = bits;

                let idx: Vec<usize> = (first..self.slices_combined.len())
                    .filter(|&k| {
                        let t = k as i64 + lag;
                        t >= 0 && (t as usize) < partner.sent.len()
                    })
                    .collect();
                let sent: Vec<u8> = idx.iter().map(|&k| partner.sent[(k as i64 + lag) as usize]).collect();
                let comb: Vec<f64> = idx.iter().map(|&k| self.slices_combined[k]).collect();
                let elems: Vec<Vec<f64>> = self
                    .slices_element
                    .iter()
                    .map(|s| idx.iter().map(|&k| s[k]).collect())
                    .collect();
                m.snr_gain_db = measure_snr_gain(&elems, &comb, &sent).ok();
            }
        }

        let t_sym = 1.0 / symbol_rate;
        let post_lock = |trace: &[f64]| -> Vec<EyePoint> {
            let (times, phases): (Vec<f64>, Vec<f64>) = trace
                .iter()
                .enumerate()
                .map(|(j, &p)| ((j * EYE_DECIMATION) as f64 / rate, p))
                .filter(|&(t, _)| t >= t_lock)
                .unzip();
            eye_samples(&times, &phases, t_sym, latency_s)
        };
        m.eye = post_lock(&self.eye_trace);
        m.eye_opening_deg = eye_opening_deg(&m.eye, t_sym, EYE_APERTURE * t_sym);
        m.eye_opening_raw_deg =
            eye_opening_deg(&post_lock(&self.eye_trace_raw), t_sym, EYE_APERTURE * t_sym);
        Ok(m)
    }
}

/// Runs the closed loop with the default lock criteria.
pub fn run_link(cfg: &LinkConfig) -> Result<LinkMetrics, EngineError> {
    run_link_with(cfg, &LockCriteria::default())
}

pub fn run_link_with(cfg: &LinkConfig, lock: &LockCriteria) -> Result<LinkMetrics, EngineError> {
    cfg.validate()?;
    let rate = cfg.sample_rate_hz;
    let block = cfg.block_size;
    let chan = build_channel(&cfg.channel_spec()?)?;
    let ab = Propagator::new(chan.links(Direction::AtoB), rate, block)?;
    let ba = Propagator::new(chan.links(Direction::BtoA), rate, block)?;

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: [u64; 4] = std::array::from_fn(|_| master.random());
    let mut a = RadioSim::new("A", &cfg.radio_a, cfg, seeds[0], seeds[2], chan.mean_delay(Direction::BtoA))?;
    let mut b = RadioSim::new("B", &cfg.radio_b, cfg, seeds[1], seeds[3], chan.mean_delay(Direction::AtoB))?;
    let (mut ab, mut ba) = (ab, ba);

    let total = cfg.total_samples();
    let mut start = 0;
    while start < total {
        let len = block.min(total - start);
        a.step(start, len, &ba, &b.src)?;
        b.step(start, len, &ab, &a.src)?;
        let ta: Vec<&[f64]> = a.tx_out.iter().map(Vec::as_slice).collect();
        ab.push_tx(&ta);
        let tb: Vec<&[f64]> = b.tx_out.iter().map(Vec::as_slice).collect();
        ba.push_tx(&tb);
        start += len;
    }

    Ok(LinkMetrics {
        duration_s: total as f64 / rate,
        envelope_dt_s: ENVELOPE_DT_S,
        radio_a: a.finish(&b.src, cfg, cfg.radio_b.symbol_rate_hz, lock)?,
        radio_b: b.finish(&a.src, cfg, cfg.radio_a.symbol_rate_hz, lock)?,
    })
}
