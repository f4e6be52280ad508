use num_complex::Complex64;

use super::{decide_quadrant, quadrant_phase, RadioConfig, TransceiverError};
use crate::signals::{
    design_bandpass, wrap_phase, FirStream, OnePoleLowpass, PhaseStream, QuadratureDemod, Waveform,
};

/// Length of the moving average that fixes each element's 2π branch
/// relative to element 1 (5 ns at 200 GSa/s).
pub const ANCHOR_LEN: usize = 1024;

/// Per-element receive phases for one run, all on the same time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodOutput {
    pub phi: Vec<PhaseStream>,
    pub phi_low: Vec<PhaseStream>,
    pub data_high: Vec<PhaseStream>,
    pub combined_data: PhaseStream,
}

/// One block of receiver output, indexed `[element][sample]`.
#[derive(Debug, Clone, Default)]
pub struct RxBlock {
    pub envelope: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub phi_low: Vec<Vec<f64>>,
    pub data_high: Vec<Vec<f64>>,
    pub combined: Vec<f64>,
}

impl RxBlock {
    fn resize(&mut self, n: usize, len: usize) {
        for v in [&mut self.envelope, &mut self.phi, &mut self.phi_low, &mut self.data_high] {
            v.resize(n, Vec::new());
            v.iter_mut().for_each(|e| e.resize(len, 0.0));
        }
        self.combined.resize(len, 0.0);
    }
}

#[derive(Debug, Clone)]
struct Anchor {
    ring: Vec<Complex64>,
    pos: usize,
    sum: Complex64,
    phase: f64,
}

impl Anchor {
    fn new() -> Self {
        Self {
            ring: vec![Complex64::default(); ANCHOR_LEN],
            pos: 0,
            sum: Complex64::default(),
            phase: 0.0,
        }
    }

    #[inline]
    fn update(&mut self, p: Complex64) -> f64 {
        self.sum += p - self.ring[self.pos];
        self.ring[self.pos] = p;
        self.pos += 1;
        if self.pos == ANCHOR_LEN {
            self.pos = 0;
            self.sum = self.ring.iter().sum();
        }
        if self.sum.norm_sqr() > 0.0 {
            self.phase += wrap_phase(self.sum.arg() - self.phase);
        }
        self.phase
    }
}

/// Streaming receive chain: band-pass, quadrature phase demodulation,
/// unwrapping and the phasing lowpass for every element.
///
/// Element 1 is unwrapped around its own lowpass output, so wraps of the
/// data phase never reach the filter. Every other element takes the 2π
/// branch of its phase difference to element 1 from a short moving average
/// of `z_i·conj(z_1)`; the data modulation is common to all elements and
/// cancels in that product.
pub struct Receiver {
    bpf: Vec<FirStream>,
    bpf_delay: usize,
    demod: Vec<QuadratureDemod>,
    lpf: Vec<OnePoleLowpass>,
    anchors: Vec<Anchor>,
    filtered: Vec<f64>,
    z: Vec<Vec<Complex64>>,
}

impl Receiver {
    /// `t0` is the absolute time of the first input sample.
    pub fn new(cfg: &RadioConfig, rate: f64, t0: f64) -> Result<Self, TransceiverError> {
        cfg.validate(rate)?;
        let n = cfg.n_elements;
        let bpf = design_bandpass(cfg.f_rx_hz, cfg.bpf_bandwidth_hz, rate, cfg.bpf_stop_atten_db)?;
        let bpf_delay = bpf.group_delay();
        let demod_t0 = t0 - bpf_delay as f64 / rate;
        Ok(Self {
            bpf: (0..n).map(|_| bpf.stream()).collect(),
            bpf_delay,
            demod: (0..n)
                .map(|_| QuadratureDemod::new(cfg.f_rx_hz, rate, demod_t0))
                .collect::<Result<_, _>>()?,
            lpf: (0..n)
                .map(|_| OnePoleLowpass::new(cfg.phase_lpf_cutoff_hz, rate))
                .collect::<Result<_, _>>()?,
            anchors: (0..n).map(|_| Anchor::new()).collect(),
            filtered: Vec::new(),
            z: vec![Vec::new(); n],
        })
    }

    pub fn n_elements(&self) -> usize {
        self.bpf.len()
    }

    /// Samples from the antenna input to the phase outputs (band-pass plus
    /// demodulator filter), excluding the phasing lowpass.
    pub fn group_delay(&self) -> usize {
        self.bpf_delay + self.demod[0].group_delay()
    }

    /// Processes one block; every `input[i]` must have the same length.
    pub fn process(&mut self, input: &[Vec<f64>], out: &mut RxBlock) {
        let n = self.n_elements();
        assert_eq!(input.len(), n, "one input stream per element");
        let len = input[0].len();
        out.resize(n, len);
        for i in 0..n {
            self.filtered.resize(len, 0.0);
            self.bpf[i].process(&input[i], &mut self.filtered);
            self.demod[i].process(&self.filtered, &mut self.z[i]);
        }
        let inv_n = 1.0 / n as f64;
        for k in 0..len {
            let z1 = self.z[0][k];
            let raw1 = z1.arg();
            let prev = self.lpf[0].state();
            let phi1 = prev + wrap_phase(raw1 - prev);
            let low1 = self.lpf[0].step(phi1);
            out.envelope[0][k] = z1.norm();
            out.phi[0][k] = phi1;
            out.phi_low[0][k] = low1;
            out.data_high[0][k] = phi1 - low1;
            let mut acc = phi1 - low1;
            for i in 1..n {
                let zi = self.z[i][k];
                let anchor = self.anchors[i].update(zi * z1.conj());
                let rel = anchor + wrap_phase(zi.arg() - raw1 - anchor);
                let phi = phi1 + rel;
                let low = self.lpf[i].step(phi);
                out.envelope[i][k] = zi.norm();
                out.phi[i][k] = phi;
                out.phi_low[i][k] = low;
                out.data_high[i][k] = phi - low;
                acc += phi - low;
            }
            out.combined[k] = acc * inv_n;
        }
    }
}

/// Decision-directed baseline restoration for the combined data phase.
///
/// The phasing lowpass also removes the low-frequency part of the data
/// itself, which shows up as slow wander of the constellation. This adds
/// back the same lowpass applied to the decided symbols (quantized
/// feedback). Decisions are made at the instants flagged by the caller and
/// held until the next one.
#[derive(Debug, Clone)]
pub struct BaselineRestorer {
    lpf: OnePoleLowpass,
    held: f64,
}

impl BaselineRestorer {
    pub fn new(cutoff: f64, rate: f64) -> Result<Self, TransceiverError> {
        Ok(Self {
            lpf: OnePoleLowpass::new(cutoff, rate)?,
            held: 0.0,
        })
    }

    /// Current correction added to the data phase.
    pub fn correction(&self) -> f64 {
        self.lpf.state()
    }

    /// Restores one sample; when `decide` is set the restored value is also
    /// sliced and becomes the held decision.
    #[inline]
    pub fn step(&mut self, data_high: f64, decide: bool) -> f64 {
        let restored = wrap_phase(data_high + self.lpf.state());
        if decide {
            self.held = quadrant_phase(decide_quadrant(restored));
        }
        self.lpf.step(self.held);
        restored
    }
}

/// Runs the receive chain over whole waveforms. Output times are shifted
/// back by the chain's group delay.
pub fn receive_chain(rx: &[Waveform], cfg: &RadioConfig) -> Result<DemodOutput, TransceiverError> {
    if rx.len() != cfg.n_elements {
        return Err(TransceiverError::Misaligned(format!(
            "{} waveforms for {} elements",
            rx.len(),
            cfg.n_elements
        )));
    }
    let (rate, t0, len) = (rx[0].rate(), rx[0].t0(), rx[0].len());
    if rx.iter().any(|w| w.rate() != rate || w.t0() != t0 || w.len() != len) {
        return Err(TransceiverError::Misaligned(
            "element waveforms differ in rate, start or length".into(),
        ));
    }
    let mut rxr = Receiver::new(cfg, rate, t0)?;
    let input: Vec<Vec<f64>> = rx.iter().map(|w| w.samples().to_vec()).collect();
    let mut block = RxBlock::default();
    rxr.process(&input, &mut block);
    let t_out = t0 - rxr.group_delay() as f64 / rate;
    let wrap = |v: Vec<Vec<f64>>| -> Result<Vec<PhaseStream>, TransceiverError> {
        v.into_iter()
            .map(|s| PhaseStream::new(s, rate, t_out).map_err(Into::into))
            .collect()
    };
    Ok(DemodOutput {
        combined_data: PhaseStream::new(block.combined, rate, t_out)?,
        phi: wrap(block.phi)?,
        phi_low: wrap(block.phi_low)?,
        data_high: wrap(block.data_high)?,
    })
}
