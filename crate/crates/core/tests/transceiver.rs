use std::f64::consts::{FRAC_PI_4, PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retrolink_core::array::{
    angle_grid, array_factor, arrival_phases, pattern_peak, squint_angle, PhaseVector,
};
use retrolink_core::channel::{add_noise, NoiseSpec};
use retrolink_core::signals::{extract_phase, wrap_phase, PhaseStream, Waveform, DEFAULT_RATE};
use retrolink_core::transceiver::{
    delta_phases, delta_streams, receive_chain, transmit_chain, RadioConfig,
};

const RATE: f64 = DEFAULT_RATE;

/// Per-element tones at `f` with the given phases.
fn tones(f: f64, phases: &[f64], amplitude: f64, len: usize) -> Vec<Waveform> {
    phases
        .iter()
        .map(|&p| Waveform::from_fn(len, RATE, 0.0, |t| amplitude * (TAU * f * t + p).cos()).unwrap())
        .collect()
}

#[test]
fn constant_tone_settles() {
    let cfg = RadioConfig::radio_a();
    let c = 0.7;
    let out = receive_chain(&tones(cfg.f_rx_hz, &[c; 4], 1e-3, 200_000), &cfg).unwrap();
    for i in 0..4 {
        let low = *out.phi_low[i].values.last().unwrap();
        let high = *out.data_high[i].values.last().unwrap();
        assert!((low - c).abs() < 1e-3, "element {i}: {low}");
        assert!(high.abs() < 1e-3, "element {i}: {high}");
    }
}

#[test]
fn plane_wave_gradient_matches_arrival_phases() {
    let cfg = RadioConfig::radio_a();
    let geom = cfg.geometry().unwrap();
    let theta = 42f64.to_radians();
    let arrival = arrival_phases(&geom, theta, cfg.f_rx_hz);
    let out = receive_chain(&tones(cfg.f_rx_hz, &arrival.0, 1e-3, 200_000), &cfg).unwrap();
    let last: Vec<f64> = out.phi_low.iter().map(|s| *s.values.last().unwrap()).collect();
    let d = delta_phases(&last);
    for i in 0..4 {
        let err = wrap_phase(d.0[i] - arrival.0[i]);
        assert!(err.abs() < 1e-3, "element {i}: {err}");
    }
}

#[test]
fn decomposition_is_exact() {
    let cfg = RadioConfig::radio_a();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = NoiseSpec { noise_figure_db: 3.0, bandwidth: 1.5e9 };
    let clean = tones(cfg.f_rx_hz, &[0.1, -2.0, 2.2, 0.2], 2e-5, 40_000);
    let noisy: Vec<Waveform> = clean.iter().map(|w| add_noise(w, &spec, &mut rng)).collect();
    let out = receive_chain(&noisy, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for k in 0..out.phi[i].len() {
            let r = out.phi_low[i].values[k] + out.data_high[i].values[k] - out.phi[i].values[k];
            worst = worst.max(r.abs());
        }
    }
    assert!(worst < 1e-9, "{worst}");
    for k in 0..out.combined_data.len() {
        let mean = out.data_high.iter().map(|s| s.values[k]).sum::<f64>() / 4.0;
        assert!((out.combined_data.values[k] - mean).abs() < 1e-12);
    }
}

#[test]
fn delta_phase_examples() {
    let d = delta_phases(&[1.0, 1.2, 1.4, 1.6]);
    for (got, want) in d.0.iter().zip([0.0, 0.2, 0.4, 0.6]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(delta_phases(&[3.0]).0, vec![0.0]);
    let streams = vec![
        PhaseStream::new(vec![1.0, 2.0], RATE, 0.0).unwrap(),
        PhaseStream::new(vec![1.5, 1.0], RATE, 0.0).unwrap(),
    ];
    let d = delta_streams(&streams);
    assert_eq!(d[0].values, vec![0.0, 0.0]);
    assert_eq!(d[1].values, vec![0.5, -1.0]);
}

proptest! {
    #[test]
    fn delta_ignores_common_trajectory(
        phases in proptest::collection::vec(-10.0f64..10.0, 1..8),
        common in -100.0f64..100.0,
    ) {
        let base = delta_phases(&phases);
        let shifted: Vec<f64> = phases.iter().map(|p| p + common).collect();
        let moved = delta_phases(&shifted);
        prop_assert_eq!(moved.0[0], 0.0);
        for (a, b) in base.0.iter().zip(&moved.0) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

fn stream(values: Vec<f64>) -> PhaseStream {
    PhaseStream::new(values, RATE, 0.0).unwrap()
}

#[test]
fn zero_delta_gives_identical_carriers() {
    let cfg = RadioConfig::radio_a();
    let dphi: Vec<PhaseStream> = (0..4).map(|_| stream(vec![0.0; 500])).collect();
    let waves = transmit_chain(&dphi, &stream(vec![0.0; 500]), &cfg).unwrap();
    for w in &waves[1..] {
        assert_eq!(w.samples(), waves[0].samples());
    }
}

#[test]
fn common_data_offset_does_not_steer() {
    let cfg = RadioConfig::radio_a();
    let dphi: Vec<PhaseStream> = (0..4).map(|i| stream(vec![0.3 * i as f64; 2000])).collect();
    let plain = transmit_chain(&dphi, &stream(vec![0.0; 2000]), &cfg).unwrap();
    let offset = transmit_chain(&dphi, &stream(vec![FRAC_PI_4; 2000]), &cfg).unwrap();
    for (a, b) in plain.iter().zip(&offset) {
        let pa = extract_phase(a, cfg.f_tx_hz).unwrap();
        let pb = extract_phase(b, cfg.f_tx_hz).unwrap();
        let d = wrap_phase(pb.values[1500] - pa.values[1500]);
        assert!((d - FRAC_PI_4).abs() < 1e-3, "{d}");
    }
}

/// Element phases actually radiated, measured from the transmit waveforms.
fn radiated_phases(waves: &[Waveform], f: f64, at: usize) -> PhaseVector {
    let p: Vec<f64> = waves
        .iter()
        .map(|w| extract_phase(w, f).unwrap().values[at])
        .collect();
    delta_phases(&p)
}

#[test]
fn conjugate_transmit_points_at_squint_angle() {
    let cfg = RadioConfig::radio_a();
    let geom = cfg.geometry().unwrap();
    let theta = 42f64.to_radians();
    let arrival = arrival_phases(&geom, theta, cfg.f_rx_hz);
    let dphi: Vec<PhaseStream> = arrival.0.iter().map(|&a| stream(vec![a; 2000])).collect();
    let waves = transmit_chain(&dphi, &stream(vec![0.0; 2000]), &cfg).unwrap();
    let phases = radiated_phases(&waves, cfg.f_tx_hz, 1500);
    let grid = angle_grid(PI / 2.0, 0.01f64.to_radians());
    let (peak, _) = pattern_peak(&phases, &geom, &grid, cfg.f_tx_hz);
    let want = squint_angle(theta, cfg.f_rx_hz, cfg.f_tx_hz).unwrap();
    assert!((peak - want).abs() < 0.02f64.to_radians(), "{} vs {}", peak.to_degrees(), want.to_degrees());
    assert!((want.to_degrees() - 38.77).abs() < 0.05);

    let mut wrong = cfg.clone();
    wrong.conjugation_sign = 1;
    let waves = transmit_chain(&dphi, &stream(vec![0.0; 2000]), &wrong).unwrap();
    let phases = radiated_phases(&waves, cfg.f_tx_hz, 1500);
    let (peak, _) = pattern_peak(&phases, &geom, &grid, cfg.f_tx_hz);
    assert!(peak < 0.0, "non-conjugate beam must point away, got {}", peak.to_degrees());
}

#[test]
fn retro_loop_gain_is_n_squared() {
    // Receive a plane wave, transmit the conjugate and compare far-field
    // power toward the squinted angle with a single element.
    let cfg = RadioConfig::radio_a();
    let geom = cfg.geometry().unwrap();
    for deg in [-60.0, -20.0, 0.0, 42.0, 70.0] {
        let theta = f64::to_radians(deg);
        let arrival = arrival_phases(&geom, theta, cfg.f_rx_hz);
        let len = 200_000;
        let rx = receive_chain(&tones(cfg.f_rx_hz, &arrival.0, 1e-3, len), &cfg).unwrap();
        let dphi = delta_streams(&rx.phi_low);
        let data = PhaseStream::new(vec![0.0; len], RATE, rx.phi_low[0].t0).unwrap();
        let tx = transmit_chain(&dphi, &data, &cfg).unwrap();
        let phases = radiated_phases(&tx, cfg.f_tx_hz, len - 1000);
        let toward = squint_angle(theta, cfg.f_rx_hz, cfg.f_tx_hz).unwrap();
        let gain = array_factor(&phases, &geom, toward, cfg.f_tx_hz).norm_sqr();
        let db = 10.0 * (gain / 16.0).log10();
        assert!(db.abs() < 0.5, "{deg}°: {db} dB");
    }
}

#[test]
fn noise_only_input_radiates_omni() {
    let cfg = RadioConfig::radio_a();
    let geom = cfg.geometry().unwrap();
    let spec = NoiseSpec { noise_figure_db: 3.0, bandwidth: 1.5e9 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let len = 800_000;
    let silent = vec![Waveform::zeros(len, RATE, 0.0).unwrap(); 4];
    let noisy: Vec<Waveform> = silent.iter().map(|w| add_noise(w, &spec, &mut rng)).collect();
    let out = receive_chain(&noisy, &cfg).unwrap();
    let s = f64::from(cfg.conjugation_sign);
    let cone = cfg.pattern().cone_half_angle;
    let angles = angle_grid(cone, 1f64.to_radians());
    let mut avg = vec![0.0; angles.len()];
    let snapshots: Vec<usize> = (20_000..len).step_by(2_000).collect();
    for &k in &snapshots {
        let low: Vec<f64> = out.phi_low.iter().map(|p| p.values[k]).collect();
        let d = PhaseVector(delta_phases(&low).0.iter().map(|x| s * x).collect());
        for (a, acc) in angles.iter().zip(&mut avg) {
            *acc += array_factor(&d, &geom, *a, cfg.f_tx_hz).norm_sqr() / 4.0;
        }
    }
    for (a, acc) in angles.iter().zip(&avg) {
        let v = acc / snapshots.len() as f64;
        assert!((0.5..=2.0).contains(&v), "{}°: {v}", a.to_degrees());
    }
}
