use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retrolink_core::array::{ArrayGeometry, ElementPattern};
use retrolink_core::channel::{
    add_noise, build_channel, fractional_delay, propagate, ChannelSpec, Direction, NoiseSpec,
    PairLink, Propagator, FRACTIONAL_TAPS,
};
use retrolink_core::signals::{design_bandpass, Waveform, DEFAULT_RATE};
use rustfft::FftPlanner;

fn spec(n: usize, angle_deg: f64, distance: f64) -> ChannelSpec {
    ChannelSpec {
        geom_a: ArrayGeometry::half_wave(n).unwrap(),
        geom_b: ArrayGeometry::half_wave(n).unwrap(),
        pattern_a: ElementPattern::default(),
        pattern_b: ElementPattern::default(),
        distance,
        angle_a: angle_deg.to_radians(),
        angle_b: (0.7 * angle_deg).to_radians(),
        extra_group_delay: 1e-9,
        freq_ab: 62e9,
        freq_ba: 58e9,
        path_loss_override: None,
    }
}

/// Phase of the `freq` component over `range`, by correlation.
fn tone_phase(x: &[f64], freq: f64, range: std::ops::Range<usize>) -> f64 {
    range
        .map(|k| x[k] * Complex64::from_polar(1.0, -TAU * freq * k as f64 / DEFAULT_RATE))
        .sum::<Complex64>()
        .arg()
}

fn tone(freq: f64, len: usize) -> Waveform {
    Waveform::from_fn(len, DEFAULT_RATE, 0.0, |t| (TAU * freq * t).cos()).unwrap()
}

fn phase_err_deg(a: f64, b: f64) -> f64 {
    (a - b).sin().atan2((a - b).cos()).abs().to_degrees()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pair_delays_are_reciprocal(n in 1usize..8, angle in -70.0..70.0f64, d in 0.5..50.0f64) {
        let ch = build_channel(&spec(n, angle, d)).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((ch.ab[i][j].delay - ch.ba[j][i].delay).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn fractional_delay_tone_phase(freq in 1e9..65e9f64, d in 0.0..2.0f64) {
        let len = 1200;
        let out = fractional_delay(&tone(freq, len), d / DEFAULT_RATE);
        let got = tone_phase(out.samples(), freq, 100..len - 100);
        let err = phase_err_deg(got, -TAU * freq * d / DEFAULT_RATE);
        prop_assert!(err < 1.0, "{err} deg at {freq} Hz, {d} samples");
    }

    #[test]
    fn fractional_delays_compose(freq in 1e9..65e9f64, d1 in 0.0..3.0f64, d2 in 0.0..3.0f64) {
        let len = 1200;
        let w = tone(freq, len);
        let two = fractional_delay(&fractional_delay(&w, d1 / DEFAULT_RATE), d2 / DEFAULT_RATE);
        let one = fractional_delay(&w, (d1 + d2) / DEFAULT_RATE);
        let r = 100..len - 100;
        let err = phase_err_deg(tone_phase(two.samples(), freq, r.clone()), tone_phase(one.samples(), freq, r));
        prop_assert!(err < 1.0, "{err}");
    }

    #[test]
    fn propagation_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, seed in 0u64..1000) {
        let ch = build_channel(&spec(2, 30.0, 0.3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ns = NoiseSpec { noise_figure_db: 0.0, bandwidth: 1e9 };
        let len = 1500;
        let x: Vec<Waveform> = (0..2).map(|_| add_noise(&Waveform::zeros(len, DEFAULT_RATE, 0.0).unwrap(), &ns, &mut rng)).collect();
        let y: Vec<Waveform> = (0..2).map(|_| add_noise(&Waveform::zeros(len, DEFAULT_RATE, 0.0).unwrap(), &ns, &mut rng)).collect();
        let mix: Vec<Waveform> = x.iter().zip(&y).map(|(x, y)| {
            Waveform::new(x.samples().iter().zip(y.samples()).map(|(p, q)| a * p + b * q).collect(), DEFAULT_RATE, 0.0).unwrap()
        }).collect();
        let px = propagate(&x, &ch, Direction::AtoB).unwrap();
        let py = propagate(&y, &ch, Direction::AtoB).unwrap();
        let pm = propagate(&mix, &ch, Direction::AtoB).unwrap();
        let scale = px.iter().chain(&py).flat_map(|w| w.samples()).fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..2 {
            for k in 0..len {
                let want = a * px[j].samples()[k] + b * py[j].samples()[k];
                prop_assert!((pm[j].samples()[k] - want).abs() <= 1e-12 * scale.max(1e-30) * 10.0);
            }
        }
    }

    #[test]
    fn streaming_receive_ignores_newer_transmissions(
        delay in 300.0..900.0f64,
        change_at in 0usize..2000,
        block in 64usize..256,
    ) {
        let links = vec![vec![PairLink { gain: 0.5, delay: delay / DEFAULT_RATE }]];
        let total = 2400;
        let horizon = delay.floor() as usize - FRACTIONAL_TAPS / 2;
        let run = |perturb: bool| -> Vec<f64> {
            let mut p = Propagator::new(&links, DEFAULT_RATE, block).unwrap();
            let mut rx = Vec::new();
            let mut start = 0;
            while start < total {
                let len = block.min(total - start);
                let mut out = vec![vec![0.0; len]];
                p.receive(start, &mut out);
                rx.extend_from_slice(&out[0]);
                let tx: Vec<f64> = (start..start + len)
                    .map(|k| if perturb && k >= change_at { 1.0 } else { ((k * 7919) % 13) as f64 - 6.0 })
                    .collect();
                p.push_tx(&[&tx]);
                start += len;
            }
            rx
        };
        let (base, pert) = (run(false), run(true));
        // Output n may only see transmit samples up to n - horizon.
        for n in 0..(change_at + horizon).min(total) {
            prop_assert_eq!(base[n], pert[n], "sample {}", n);
        }
    }
}

#[test]
fn in_band_noise_matches_ktbf() {
    let ns = NoiseSpec { noise_figure_db: 3.0, bandwidth: 1.5e9 };
    let len = 1 << 21;
    let w = add_noise(&Waveform::zeros(len, DEFAULT_RATE, 0.0).unwrap(), &ns, &mut ChaCha8Rng::seed_from_u64(3));
    let bpf = design_bandpass(58e9, 1.5e9, DEFAULT_RATE, 40.0).unwrap();
    let y = bpf.apply(&w).unwrap();
    let mut buf: Vec<Complex64> = y.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let df = DEFAULT_RATE / len as f64;
    let (lo, hi) = (((58e9 - 0.75e9) / df).ceil() as usize, ((58e9 + 0.75e9) / df).floor() as usize);
    // One-sided power in the passband.
    let p: f64 = buf[lo..=hi].iter().map(|c| 2.0 * c.norm_sqr()).sum::<f64>() / (len as f64).powi(2);
    let err_db = 10.0 * (p / ns.in_band_power()).log10();
    assert!(err_db.abs() < 0.2, "{err_db} dB");
}
