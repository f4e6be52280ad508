//! Quick sanity checks of the installed build (a few seconds).

use std::f64::consts::TAU;

use retrolink_core::array::{angle_grid, arrival_phases, pattern_peak, squint_angle, ArrayGeometry};
use retrolink_core::channel::friis_gain;
use retrolink_core::engine::{run_link, LinkConfig};
use retrolink_core::signals::{design_bandpass, extract_phase, synthesize_pm, PhaseStream, DEFAULT_RATE};
use retrolink_core::transceiver::delta_phases;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

pub fn run_checks() -> Vec<Check> {
    let mut out = Vec::new();

    let g = friis_gain(10.0, 60e9, 4.0, 4.0);
    out.push(check("friis", (g + 80.0).abs() < 0.02, format!("{g:.3} dB at 10 m, 60 GHz, 4+4 dBi")));

    let geom = ArrayGeometry::half_wave(4).expect("geometry");
    let grid = angle_grid(80f64.to_radians(), 0.05f64.to_radians());
    let theta = 42f64.to_radians();
    let conj = arrival_phases(&geom, theta, 58e9).negated();
    let (peak, _) = pattern_peak(&conj, &geom, &grid, 62e9);
    let want = squint_angle(theta, 58e9, 62e9).expect("main lobe");
    out.push(check(
        "squint",
        (peak - want).abs() < 1f64.to_radians(),
        format!("peak {:.2} deg, closed form {:.2} deg", peak.to_degrees(), want.to_degrees()),
    ));

    let worst = (-7..=7)
        .map(|k| {
            let a = (k as f64 * 10.0).to_radians();
            let c = arrival_phases(&geom, a, 60e9).negated();
            (pattern_peak(&c, &geom, &grid, 60e9).0 - a).abs()
        })
        .fold(0.0, f64::max);
    out.push(check(
        "retro_peak",
        worst <= 0.05f64.to_radians() + 1e-12,
        format!("worst offset {:.3} deg", worst.to_degrees()),
    ));

    let iso = match design_bandpass(62e9, 1.5e9, DEFAULT_RATE, 40.0) {
        Ok(f) => 20.0 * f.response(58e9).norm().log10(),
        Err(_) => f64::INFINITY,
    };
    out.push(check("band_isolation", iso <= -40.0, format!("{iso:.1} dB at 58 GHz")));

    let p = PhaseStream::new(
        (0..4000).map(|k| 0.7 * (TAU * 2e9 * k as f64 / DEFAULT_RATE).sin()).collect(),
        DEFAULT_RATE,
        0.0,
    )
    .expect("finite");
    let err = synthesize_pm(58e9, &p, 0.03)
        .and_then(|w| extract_phase(&w, 58e9))
        .map(|b| {
            let gd = (-b.t0 * DEFAULT_RATE).round() as usize;
            (2 * gd..p.len()).map(|k| (b.values[k] - p.values[k - gd]).abs()).fold(0.0, f64::max)
        })
        .unwrap_or(f64::INFINITY);
    out.push(check("pm_round_trip", err < 0.02, format!("max error {err:.2e} rad")));

    let base = [0.0, -2.03, -4.07, 0.9];
    let shifted: Vec<f64> = base.iter().map(|p| p + 1e6 * 3e-6).collect();
    let d = delta_phases(&base)
        .0
        .iter()
        .zip(&delta_phases(&shifted).0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(check("common_drift", d < 1e-9, format!("delta change {d:.1e} rad")));

    let cfg = LinkConfig {
        sim_duration_s: 400e-9,
        ..LinkConfig::reference()
    };
    let det = match (run_link(&cfg), run_link(&cfg)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    out.push(check("determinism", det, "two 400 ns runs with one seed".into()));
    out
}
