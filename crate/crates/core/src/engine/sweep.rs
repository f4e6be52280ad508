use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_link, EngineError, LinkConfig, LinkMetrics};

/// Cartesian grid over numeric config fields, first axis slowest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub axes: Vec<(String, Vec<f64>)>,
}

impl Grid {
    pub fn points(&self) -> Vec<Vec<(String, f64)>> {
        if self.axes.is_empty() || self.axes.iter().any(|(_, v)| v.is_empty()) {
            return Vec::new();
        }
        let mut out = vec![Vec::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((name.clone(), v));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Parses `FIELD=v1,v2,...` specs.
pub fn parse_grid(specs: &[String]) -> Result<Grid, EngineError> {
    let mut grid = Grid::default();
    for s in specs {
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| EngineError::Config(format!("grid `{s}` is not FIELD=v1,v2,...")))?;
        let values = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| EngineError::Config(format!("grid `{name}`: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        grid.axes.push((name.trim().to_string(), values));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: Vec<(String, f64)>,
    pub seed: u64,
    /// Later of the two radios' lock times.
    pub lock_time_s: Option<f64>,
    /// Worse of the two directions.
    pub ber: Option<f64>,
    /// Mean over the two radios.
    pub snr_gain_db: Option<f64>,
    /// `locked`, `no_lock` or `error: ...`.
    pub status: String,
}

fn summarize(params: Vec<(String, f64)>, seed: u64, m: &LinkMetrics) -> SweepRow {
    let (a, b) = (&m.radio_a, &m.radio_b);
    let both = |x: Option<f64>, y: Option<f64>, f: fn(f64, f64) -> f64| x.zip(y).map(|(x, y)| f(x, y));
    SweepRow {
        params,
        seed,
        lock_time_s: both(a.lock_time_s, b.lock_time_s, f64::max),
        ber: both(a.ber, b.ber, f64::max),
        snr_gain_db: both(a.snr_gain_db, b.snr_gain_db, |x, y| (x + y) / 2.0),
        status: if m.locked() { "locked" } else { "no_lock" }.into(),
    }
}

/// One [`run_link`] per grid point, in parallel. Point `i` runs with seed
/// `cfg.seed + i` (wrapping). Unknown field names fail the whole sweep;
/// any other failure is recorded in that row's status.
pub fn sweep(cfg: &LinkConfig, grid: &Grid) -> Result<Vec<SweepRow>, EngineError> {
    let points = grid.points();
    if points.is_empty() {
        return Err(EngineError::EmptyGrid);
    }
    for (name, values) in &grid.axes {
        if let Err(EngineError::UnknownField(f)) = cfg.with_field(name, values[0]) {
            return Err(EngineError::UnknownField(f));
        }
    }
    Ok(points
        .into_par_iter()
        .enumerate()
        .map(|(i, params)| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let run = params
                .iter()
                .try_fold(cfg.clone(), |c, (name, v)| c.with_field(name, *v))
                .and_then(|c| run_link(&LinkConfig { seed, ..c }));
            match run {
                Ok(m) => summarize(params, seed, &m),
                Err(e) => SweepRow {
                    params,
                    seed,
                    lock_time_s: None,
                    ber: None,
                    snr_gain_db: None,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_product() {
        let g = parse_grid(&["tx_power_dbm=0,-10".into(), "distance_m=5,10,20".into()]).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![("tx_power_dbm".into(), 0.0), ("distance_m".into(), 5.0)]);
        assert_eq!(pts[5], vec![("tx_power_dbm".into(), -10.0), ("distance_m".into(), 20.0)]);
        assert!(parse_grid(&["x=1,a".into()]).is_err());
        assert!(parse_grid(&["x".into()]).is_err());
    }

    #[test]
    fn empty_and_unknown_rejected() {
        let cfg = LinkConfig::default();
        assert_eq!(sweep(&cfg, &Grid::default()), Err(EngineError::EmptyGrid));
        let g = parse_grid(&["tx_power_dbm=".into()]).unwrap();
        assert_eq!(sweep(&cfg, &g), Err(EngineError::EmptyGrid));
        let g = parse_grid(&["warp_factor=1".into()]).unwrap();
        assert_eq!(sweep(&cfg, &g), Err(EngineError::UnknownField("warp_factor".into())));
    }

    #[test]
    fn bad_value_is_recorded_in_row() {
        let cfg = LinkConfig {
            sim_duration_s: 500e-9,
            ..LinkConfig::default()
        };
        let g = parse_grid(&["distance_m=-1".into()]).unwrap();
        let rows = sweep(&cfg, &g).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].status.starts_with("error"), "{}", rows[0].status);
    }
}
