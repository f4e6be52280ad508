//! CSV and JSON writers. Numbers use Rust's shortest round-trip formatting,
//! which never depends on the locale.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use retrolink_core::engine::{EyePoint, LinkConfig, LinkMetrics, RadioMetrics, SweepRow};
use serde::{Deserialize, Serialize};

pub const ENVELOPE_HEADER: [&str; 4] = ["time_ns", "radio", "element", "amplitude"];
pub const EYE_HEADER: [&str; 2] = ["fold_time_ps", "phase_deg"];
pub const SWEEP_TAIL: [&str; 5] = ["seed", "lock_time_us", "ber", "snr_gain_db", "status"];

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per (radio, element, time step).
pub fn write_envelope_csv(path: &Path, m: &LinkMetrics) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ENVELOPE_HEADER)?;
    let step_ns = (m.envelope_dt_s * 1e9).round() as u64;
    for (name, r) in [("A", &m.radio_a), ("B", &m.radio_b)] {
        for (i, trace) in r.envelope.iter().enumerate() {
            for (k, a) in trace.iter().enumerate() {
                let t = (k as u64 + 1) * step_ns;
                w.write_record([t.to_string(), name.into(), (i + 1).to_string(), a.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_eye_csv(path: &Path, eye: &[EyePoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EYE_HEADER)?;
    for p in eye {
        w.write_record([(p.fold_time_s * 1e12).to_string(), p.phase.to_degrees().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an eye CSV back into points.
pub fn read_eye_csv(path: &Path) -> Result<Vec<EyePoint>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(EyePoint {
                fold_time_s: rec[0].parse::<f64>()? * 1e-12,
                phase: rec[1].parse::<f64>()?.to_radians(),
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, axes: &[String], rows: &[SweepRow]) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<&str> = axes.iter().map(String::as_str).chain(SWEEP_TAIL).collect();
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.params.iter().map(|(_, v)| v.to_string()).collect();
        rec.push(r.seed.to_string());
        rec.push(opt(r.lock_time_s.map(|t| t * 1e6)));
        rec.push(opt(r.ber));
        rec.push(opt(r.snr_gain_db));
        rec.push(r.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic numeric table.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioReport {
    pub lock_time_us: Option<f64>,
    pub element_lock_times_us: Vec<Option<f64>>,
    pub ber: Option<f64>,
    pub bit_errors: usize,
    pub bits_compared: usize,
    pub snr_gain_db: Option<f64>,
    pub eye_opening_deg: Option<f64>,
    pub eye_opening_raw_deg: Option<f64>,
    pub power_ratio_db: Option<f64>,
    pub latency_ns: f64,
}

impl From<&RadioMetrics> for RadioReport {
    fn from(r: &RadioMetrics) -> Self {
        let us = |t: Option<f64>| t.map(|t| t * 1e6);
        Self {
            lock_time_us: us(r.lock_time_s),
            element_lock_times_us: r.element_lock_times_s.iter().map(|&t| us(t)).collect(),
            ber: r.ber,
            bit_errors: r.bit_errors,
            bits_compared: r.bits_compared,
            snr_gain_db: r.snr_gain_db,
            eye_opening_deg: r.eye_opening_deg,
            eye_opening_raw_deg: r.eye_opening_raw_deg,
            power_ratio_db: r.power_ratio_db.is_finite().then_some(r.power_ratio_db),
            latency_ns: r.latency_s * 1e9,
        }
    }
}

/// Output file names, relative to the directory holding the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub envelope: String,
    pub eye: String,
    pub timing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub locked: bool,
    pub duration_us: f64,
    pub config: LinkConfig,
    pub radio_a: RadioReport,
    pub radio_b: RadioReport,
    /// Eye diagram radio whose points are in `files.eye`.
    pub eye_radio: String,
    pub files: ReportFiles,
}

/// Wall-clock time is kept apart from the report so the report itself is
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_s: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
