//! PRBS-23 whitening and Gray-coded (differential) QPSK.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{wrap_phase, PhaseStream, SignalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("QPSK needs an even number of bits, got {0}")]
    OddBits(usize),
    #[error("symbol rate {symbol_rate} Hz must be positive and below the sample rate {rate} Hz")]
    SymbolRate { symbol_rate: f64, rate: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

const PRBS23_MASK: u32 = (1 << 23) - 1;

/// Fibonacci LFSR for x²³ + x¹⁸ + 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prbs23 {
    state: u32,
}

impl Prbs23 {
    /// Seeds from the low 23 bits; an all-zero seed is replaced by all ones.
    pub fn new(seed: u32) -> Self {
        let state = match seed & PRBS23_MASK {
            0 => PRBS23_MASK,
            s => s,
        };
        Self { state }
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let bit = ((self.state >> 22) ^ (self.state >> 17)) & 1;
        self.state = ((self.state << 1) | bit) & PRBS23_MASK;
        bit as u8
    }
}

/// Additive scrambler; applying it twice with the same seed is the identity.
pub fn scramble(bits: &[u8], seed: u32) -> Vec<u8> {
    let mut prbs = Prbs23::new(seed);
    bits.iter().map(|&b| (b & 1) ^ prbs.next_bit()).collect()
}

pub fn descramble(bits: &[u8], seed: u32) -> Vec<u8> {
    scramble(bits, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QpskMode {
    /// Symbols ride on the previous symbol's phase; immune to a constant
    /// carrier offset.
    #[default]
    Differential,
    /// Absolute phases; needs a phase reference.
    Coherent,
}

/// Constellation index 0..4 for +45°, +135°, -135°, -45°.
pub type Quadrant = u8;

/// Gray map: 00 → 0, 01 → 1, 11 → 2, 10 → 3.
pub fn gray_quadrant(b0: u8, b1: u8) -> Quadrant {
    match (b0 & 1, b1 & 1) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => 3,
    }
}

pub fn quadrant_bits(q: Quadrant) -> (u8, u8) {
    match q & 3 {
        0 => (0, 0),
        1 => (0, 1),
        2 => (1, 1),
        _ => (1, 0),
    }
}

pub fn quadrant_phase(q: Quadrant) -> f64 {
    match q & 3 {
        0 => FRAC_PI_4,
        1 => 3.0 * FRAC_PI_4,
        2 => -3.0 * FRAC_PI_4,
        _ => -FRAC_PI_4,
    }
}

/// Nearest constellation point to a phase.
pub fn decide_quadrant(phase: f64) -> Quadrant {
    // Counter-clockwise order 0, 1, 2, 3 starting at +45°.
    let idx = ((wrap_phase(phase - FRAC_PI_4) + 2.0 * PI) / FRAC_PI_2).round() as i64;
    idx.rem_euclid(4) as Quadrant
}

/// Turns bit pairs into transmitted constellation points.
#[derive(Debug, Clone)]
pub struct QpskEncoder {
    mode: QpskMode,
    prev: Quadrant,
}

impl QpskEncoder {
    pub fn new(mode: QpskMode) -> Self {
        Self { mode, prev: 0 }
    }

    pub fn encode(&mut self, b0: u8, b1: u8) -> Quadrant {
        let g = gray_quadrant(b0, b1);
        let q = match self.mode {
            QpskMode::Coherent => g,
            QpskMode::Differential => (self.prev + g) & 3,
        };
        self.prev = q;
        q
    }
}

/// Recovers Gray symbols from decided constellation points. In differential
/// mode the first decision only serves as the reference.
pub fn decode_quadrants(decided: &[Quadrant], mode: QpskMode) -> Vec<u8> {
    let data: Vec<Quadrant> = match mode {
        QpskMode::Coherent => decided.to_vec(),
        QpskMode::Differential => decided
            .windows(2)
            .map(|w| w[1].wrapping_sub(w[0]) & 3)
            .collect(),
    };
    data.into_iter()
        .flat_map(|q| {
            let (a, b) = quadrant_bits(q);
            [a, b]
        })
        .collect()
}

/// Constellation offset (within ±45°) estimated by the fourth-power method.
pub fn constellation_offset(phases: &[f64]) -> f64 {
    let s: Complex64 = phases
        .iter()
        .map(|&p| Complex64::from_polar(1.0, 4.0 * (p - FRAC_PI_4)))
        .sum();
    // e^{j4(p - 45°)} = 1 on the ideal constellation.
    s.arg() / 4.0
}

/// Maps bits to a sample-held phase stream at `rate`. Differential mode
/// starts with one reference symbol at +45°.
pub fn qpsk_map(
    bits: &[u8],
    mode: QpskMode,
    symbol_rate: f64,
    rate: f64,
) -> Result<PhaseStream, ModemError> {
    if bits.len() % 2 != 0 {
        return Err(ModemError::OddBits(bits.len()));
    }
    if !(symbol_rate > 0.0 && symbol_rate < rate) {
        return Err(ModemError::SymbolRate { symbol_rate, rate });
    }
    let mut enc = QpskEncoder::new(mode);
    let mut symbols = Vec::with_capacity(bits.len() / 2 + 1);
    if mode == QpskMode::Differential {
        symbols.push(0);
    }
    symbols.extend(bits.chunks(2).map(|p| enc.encode(p[0], p[1])));
    let sps = rate / symbol_rate;
    let len = (symbols.len() as f64 * sps).round() as usize;
    let values = (0..len)
        .map(|n| quadrant_phase(symbols[((n as f64 / sps) as usize).min(symbols.len() - 1)]))
        .collect();
    Ok(PhaseStream::new(values, rate, 0.0)?)
}

/// Where to slice a phase stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolTiming {
    /// Sample index (may be fractional) of the first symbol's midpoint.
    pub first_mid: f64,
    pub samples_per_symbol: f64,
    pub symbols: usize,
}

impl SymbolTiming {
    /// Mid-symbol slicing for a stream produced by [`qpsk_map`].
    pub fn for_mapped(stream: &PhaseStream, symbol_rate: f64) -> Self {
        let sps = stream.rate / symbol_rate;
        Self {
            first_mid: sps / 2.0,
            samples_per_symbol: sps,
            symbols: (stream.len() as f64 / sps).floor() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demapped {
    pub bits: Vec<u8>,
    /// False when fewer than 90% of slices fall within ±22.5° of the
    /// (offset-corrected) constellation, e.g. on a never-locked input.
    pub reliable: bool,
}

/// Fraction of phases within ±22.5° of the constellation after removing
/// `offset`.
pub fn constellation_fit(phases: &[f64], offset: f64) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let good = phases
        .iter()
        .filter(|&&p| {
            let q = decide_quadrant(p - offset);
            wrap_phase(p - offset - quadrant_phase(q)).abs() < PI / 8.0
        })
        .count();
    good as f64 / phases.len() as f64
}

pub fn qpsk_demap(phase: &PhaseStream, timing: SymbolTiming, mode: QpskMode) -> Demapped {
    let slices: Vec<f64> = (0..timing.symbols)
        .filter_map(|k| {
            let idx = (timing.first_mid + k as f64 * timing.samples_per_symbol).round() as usize;
            phase.values.get(idx).copied()
        })
        .collect();
    let offset = match mode {
        QpskMode::Differential => constellation_offset(&slices),
        QpskMode::Coherent => 0.0,
    };
    let decided: Vec<Quadrant> = slices.iter().map(|&p| decide_quadrant(p - offset)).collect();
    Demapped {
        bits: decode_quadrants(&decided, mode),
        reliable: constellation_fit(&slices, offset) >= 0.9,
    }
}

/// Endless scrambled pseudo-random QPSK payload, sample-held at the
/// simulator rate. Keeps a log of everything sent.
pub struct SymbolSource {
    rng: ChaCha8Rng,
    scrambler: Prbs23,
    encoder: QpskEncoder,
    samples_per_symbol: f64,
    next_boundary: u64,
    sample: u64,
    current: f64,
    /// Payload bits before scrambling, two per symbol.
    pub payload: Vec<u8>,
    /// Scrambler sequence applied to `payload`.
    pub prbs: Vec<u8>,
    /// Transmitted constellation points.
    pub sent: Vec<Quadrant>,
}

impl SymbolSource {
    pub fn new(mode: QpskMode, symbol_rate: f64, rate: f64, seed: u64) -> Result<Self, ModemError> {
        if !(symbol_rate > 0.0 && symbol_rate < rate) {
            return Err(ModemError::SymbolRate { symbol_rate, rate });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scrambler = Prbs23::new(rng.random());
        Ok(Self {
            rng,
            scrambler,
            encoder: QpskEncoder::new(mode),
            samples_per_symbol: rate / symbol_rate,
            next_boundary: 0,
            sample: 0,
            current: 0.0,
            payload: Vec::new(),
            prbs: Vec::new(),
            sent: Vec::new(),
        })
    }

    pub fn samples_per_symbol(&self) -> f64 {
        self.samples_per_symbol
    }

    /// Sample index at which symbol `k` starts.
    pub fn symbol_start(&self, k: usize) -> u64 {
        (k as f64 * self.samples_per_symbol).round() as u64
    }

    fn next_symbol(&mut self) {
        let mut line = [0u8; 2];
        for b in &mut line {
            let bit = u8::from(self.rng.random::<bool>());
            let p = self.scrambler.next_bit();
            self.payload.push(bit);
            self.prbs.push(p);
            *b = bit ^ p;
        }
        let q = self.encoder.encode(line[0], line[1]);
        self.sent.push(q);
        self.current = quadrant_phase(q);
        self.next_boundary = self.symbol_start(self.sent.len());
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            while self.sample >= self.next_boundary {
                self.next_symbol();
            }
            *v = self.current;
            self.sample += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::DEFAULT_RATE;
    use proptest::arbitrary::any;
    use proptest::{prop_assert, prop_assert_eq, proptest};
    use rustfft::FftPlanner;

    #[test]
    fn prbs23_is_maximal_length() {
        let mut p = Prbs23::new(1);
        let start = p.state();
        let period = (1u32 << 23) - 1;
        // 2^23 - 1 = 47 · 178481: the state must not recur at any proper
        // divisor of the period, and must recur at the period.
        let mut seen_at = Vec::new();
        for k in 1..=period {
            p.next_bit();
            if p.state() == start {
                seen_at.push(k);
                break;
            }
        }
        assert_eq!(seen_at, vec![period]);
    }

    #[test]
    fn scrambling_zeros_yields_prbs() {
        let zeros = vec![0u8; 100];
        let mut p = Prbs23::new(0x1234);
        let prbs: Vec<u8> = (0..100).map(|_| p.next_bit()).collect();
        assert_eq!(scramble(&zeros, 0x1234), prbs);
    }

    #[test]
    fn gray_points() {
        assert_eq!(quadrant_phase(gray_quadrant(0, 0)).to_degrees().round(), 45.0);
        assert_eq!(quadrant_phase(gray_quadrant(0, 1)).to_degrees().round(), 135.0);
        assert_eq!(quadrant_phase(gray_quadrant(1, 1)).to_degrees().round(), -135.0);
        assert_eq!(quadrant_phase(gray_quadrant(1, 0)).to_degrees().round(), -45.0);
        for q in 0..4 {
            assert_eq!(decide_quadrant(quadrant_phase(q)), q);
            let (a, b) = quadrant_bits(q);
            assert_eq!(gray_quadrant(a, b), q);
        }
    }

    #[test]
    fn single_symbol_and_period() {
        // 2 Gbps at 2 bits per symbol → 1 ns symbols.
        let symbol_rate = 2e9 / 2.0;
        assert_eq!(1.0 / symbol_rate, 1e-9);
        let s = qpsk_map(&[0, 0], QpskMode::Coherent, symbol_rate, DEFAULT_RATE).unwrap();
        assert_eq!(s.len(), 200);
        assert!(s.values.iter().all(|&v| (v - FRAC_PI_4).abs() < 1e-15));
        let d = qpsk_map(&[0, 0], QpskMode::Differential, symbol_rate, DEFAULT_RATE).unwrap();
        assert_eq!(d.len(), 400);
        assert!(d.values.iter().all(|&v| (v - FRAC_PI_4).abs() < 1e-15));
    }

    #[test]
    fn odd_bits_rejected() {
        assert_eq!(
            qpsk_map(&[1, 0, 1], QpskMode::Coherent, 1e9, DEFAULT_RATE),
            Err(ModemError::OddBits(3))
        );
    }

    #[test]
    fn noise_only_demap_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..20_000).map(|_| rng.random_range(-PI..PI)).collect();
        let s = PhaseStream::new(values, DEFAULT_RATE, 0.0).unwrap();
        let out = qpsk_demap(&s, SymbolTiming::for_mapped(&s, 1e9), QpskMode::Differential);
        assert!(!out.reliable);
        assert_eq!(out.bits.len(), 2 * 99);
    }

    #[test]
    fn scrambled_zeros_have_no_low_frequency_content() {
        // Periodogram of the mapped symbol stream (one sample per symbol).
        let n = 1 << 16;
        let bits = scramble(&vec![0u8; 2 * n], 0x5A5A5A);
        let mut enc = QpskEncoder::new(QpskMode::Differential);
        let phases: Vec<f64> = bits
            .chunks(2)
            .map(|p| quadrant_phase(enc.encode(p[0], p[1])))
            .collect();
        let mut buf: Vec<Complex64> = phases.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        // Bins within 2 MHz of DC at 1 GHz symbol rate.
        let edge = (2e6 / 1e9 * n as f64).ceil() as usize;
        let low: f64 = power[..=edge].iter().sum::<f64>() + power[n - edge..].iter().sum::<f64>();
        assert!(low / total < 0.01, "{}", low / total);

        // Without scrambling the same stream is pure DC.
        let mut enc = QpskEncoder::new(QpskMode::Differential);
        let flat: Vec<f64> = (0..64).map(|_| quadrant_phase(enc.encode(0, 0))).collect();
        assert!(flat.iter().all(|&p| p == FRAC_PI_4));
    }

    #[test]
    fn symbol_source_logs_what_it_sends() {
        let mut src = SymbolSource::new(QpskMode::Differential, 1e9, 20e9, 9).unwrap();
        let mut out = vec![0.0; 1000];
        src.fill(&mut out[..333]);
        src.fill(&mut out[333..]);
        assert_eq!(src.sent.len(), 50);
        for (k, &q) in src.sent.iter().enumerate() {
            assert!(out[20 * k..20 * (k + 1)].iter().all(|&v| v == quadrant_phase(q)));
        }
        let mut decided = vec![0];
        decided.extend(&src.sent);
        let line = decode_quadrants(&decided, QpskMode::Differential);
        let payload: Vec<u8> = line.iter().zip(&src.prbs).map(|(a, b)| a ^ b).collect();
        assert_eq!(payload, src.payload);
    }

    proptest! {
        #[test]
        fn descramble_inverts(bits in proptest::collection::vec(0u8..2, 0..500), seed in any::<u32>()) {
            prop_assert_eq!(descramble(&scramble(&bits, seed), seed), bits);
        }

        #[test]
        fn differential_round_trip_any_offset(
            pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..60),
            offset in -10.0f64..10.0,
        ) {
            let bits: Vec<u8> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            let mut s = qpsk_map(&bits, QpskMode::Differential, 1e9, 20e9).unwrap();
            s.values.iter_mut().for_each(|v| *v += offset);
            let out = qpsk_demap(&s, SymbolTiming::for_mapped(&s, 1e9), QpskMode::Differential);
            prop_assert!(out.reliable);
            prop_assert_eq!(out.bits, bits);
        }

        #[test]
        fn coherent_round_trip(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..60)) {
            let bits: Vec<u8> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            let s = qpsk_map(&bits, QpskMode::Coherent, 1e9, 20e9).unwrap();
            let out = qpsk_demap(&s, SymbolTiming::for_mapped(&s, 1e9), QpskMode::Coherent);
            prop_assert_eq!(out.bits, bits);
        }
    }
}
