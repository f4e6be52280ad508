use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use retrolink_core::array::{
    angle_grid, arrival_phases, pattern_db, squint_angle, van_atta_path_check, Source,
};
use retrolink_core::engine::{parse_grid, run_link, sweep, LinkConfig, FIXED_PATH_LOSS_DB};

use crate::output::{
    write_envelope_csv, write_eye_csv, write_json, write_sweep_csv, write_table, RadioReport,
    ReportFiles, RunReport, Timing,
};

pub const ENVELOPE_FILE: &str = "envelope.csv";
pub const EYE_FILE: &str = "eye.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Angular resolution of pattern files, degrees.
pub const PATTERN_STEP_DEG: f64 = 0.1;

/// Options shared by every simulation command.
#[derive(Debug, Clone, Default)]
pub struct ConfigOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub paper_pathloss: bool,
}

/// Resolves the configuration file (or defaults) plus command-line overrides.
pub fn load_config(opts: &ConfigOptions) -> Result<LinkConfig> {
    let mut cfg = match &opts.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            LinkConfig::from_json_str(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => LinkConfig::default(),
    };
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(d) = opts.duration_s {
        cfg.sim_duration_s = d;
    }
    if opts.paper_pathloss {
        cfg.path_loss_override_db = Some(FIXED_PATH_LOSS_DB);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `100ns`, `5us`, `5µs`, `2ms`, `1e-6s` or a bare number of seconds.
pub fn parse_duration(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (num, exp) = [("ps", -12), ("ns", -9), ("us", -6), ("µs", -6), ("ms", -3), ("s", 0)]
        .iter()
        .find_map(|&(unit, exp)| t.strip_suffix(unit).map(|n| (n.trim(), exp)))
        .unwrap_or((t, 0));
    let bad = || format!("`{text}` is not a duration (e.g. 100ns, 5us)");
    let v: f64 = if num.contains(['e', 'E']) {
        num.parse::<f64>().map_err(|_| bad())? * 10f64.powi(exp)
    } else {
        // Folding the unit into the exponent keeps `100ns` exactly 100e-9.
        format!("{num}e{exp}").parse().map_err(|_| bad())?
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("duration `{text}` must be positive"));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Locked,
    NotLocked,
}

/// Runs one link simulation and writes envelope, eye, report and timing
/// files into `out`.
pub fn cmd_run(opts: &ConfigOptions, out: &Path) -> Result<(RunOutcome, RunReport)> {
    let cfg = load_config(opts)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let t0 = Instant::now();
    let m = run_link(&cfg)?;
    let wall = t0.elapsed().as_secs_f64();

    write_envelope_csv(&out.join(ENVELOPE_FILE), &m)?;
    write_eye_csv(&out.join(EYE_FILE), &m.radio_a.eye)?;
    let report = RunReport {
        seed: cfg.seed,
        locked: m.locked(),
        duration_us: m.duration_s * 1e6,
        config: cfg,
        radio_a: RadioReport::from(&m.radio_a),
        radio_b: RadioReport::from(&m.radio_b),
        eye_radio: "A".into(),
        files: ReportFiles {
            envelope: ENVELOPE_FILE.into(),
            eye: EYE_FILE.into(),
            timing: TIMING_FILE.into(),
        },
    };
    write_json(&out.join(TIMING_FILE), &Timing { wall_clock_s: wall })?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let outcome = if report.locked {
        RunOutcome::Locked
    } else {
        RunOutcome::NotLocked
    };
    Ok((outcome, report))
}

/// Runs a parameter grid; returns the number of rows written.
pub fn cmd_sweep(opts: &ConfigOptions, grid: &[String], out: &Path) -> Result<usize> {
    let cfg = load_config(opts)?;
    let grid = parse_grid(grid)?;
    let rows = sweep(&cfg, &grid)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let axes: Vec<String> = grid.axes.iter().map(|(n, _)| n.clone()).collect();
    write_sweep_csv(&out.join(SWEEP_FILE), &axes, &rows)?;
    Ok(rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternMode {
    Static,
    Squint,
    VanAtta,
}

impl PatternMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Self::Static),
            "squint" => Ok(Self::Squint),
            "vanatta" => Ok(Self::VanAtta),
            _ => bail!("unknown pattern mode `{s}` (expected static, squint or vanatta)"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Squint => "squint",
            Self::VanAtta => "vanatta",
        }
    }
}

/// Grid angle in degrees, rounded to hide radian round-off.
fn degrees(a: f64) -> f64 {
    (a.to_degrees() * 1e9).round() / 1e9
}

pub fn pattern_file(mode: PatternMode) -> String {
    format!("pattern_{}.csv", mode.name())
}

/// Writes the pattern table for radio A seeing radio B at `angle_a_deg`.
pub fn cmd_patterns(opts: &ConfigOptions, mode: PatternMode, out: &Path) -> Result<PathBuf> {
    let cfg = load_config(opts)?;
    let radio = &cfg.radio_a;
    let geom = radio.geometry()?;
    let theta = cfg.angle_a_deg.to_radians();
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join(pattern_file(mode));
    let grid = angle_grid(std::f64::consts::FRAC_PI_2, PATTERN_STEP_DEG.to_radians());
    let conj = arrival_phases(&geom, theta, radio.f_rx_hz).negated();
    match mode {
        PatternMode::Static => {
            let db = pattern_db(&conj, &geom, &grid, radio.f_rx_hz);
            let rows: Vec<Vec<f64>> = grid.iter().zip(db).map(|(&a, p)| vec![degrees(a), p]).collect();
            write_table(&path, &["angle_deg", "af_power_db"], &rows)?;
        }
        PatternMode::Squint => {
            let marker = squint_angle(theta, radio.f_rx_hz, radio.f_tx_hz)?.to_degrees();
            let db = pattern_db(&conj, &geom, &grid, radio.f_tx_hz);
            let rows: Vec<Vec<f64>> = grid
                .iter()
                .zip(db)
                .map(|(&a, p)| vec![degrees(a), p, marker])
                .collect();
            write_table(&path, &["angle_deg", "af_power_db", "squint_deg"], &rows)?;
        }
        PatternMode::VanAtta => {
            let cone = radio.cone_half_angle_deg;
            let rows: Vec<Vec<f64>> = (0..)
                .map(|k| -cone.floor() + k as f64)
                .take_while(|a| *a <= cone)
                .map(|a| {
                    let ang = a.to_radians();
                    let plane = van_atta_path_check(&geom, Source::PlaneWave { angle: ang }, radio.f_rx_hz);
                    let point = van_atta_path_check(
                        &geom,
                        Source::Point { angle: ang, range: cfg.distance_m },
                        radio.f_rx_hz,
                    );
                    vec![a, plane, point]
                })
                .collect();
            write_table(
                &path,
                &["source_angle_deg", "plane_wave_spread_rad", "point_source_spread_rad"],
                &rows,
            )?;
        }
    }
    Ok(path)
}
