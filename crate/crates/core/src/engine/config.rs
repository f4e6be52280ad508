use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EngineError;
use crate::array::C;
use crate::channel::ChannelSpec;
use crate::transceiver::{RadioConfig, TransceiverError};

/// Total one-way delay of the reference scenario: 35 ns, of which the
/// free-space part is `distance / c`.
pub const DEFAULT_TOTAL_DELAY_S: f64 = 35e-9;
pub const DEFAULT_DISTANCE_M: f64 = 10.0;
/// Fixed element-to-element loss reproducing the reference operating point.
pub const FIXED_PATH_LOSS_DB: f64 = 75.0;

/// Everything needed for one two-radio run. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub radio_a: RadioConfig,
    pub radio_b: RadioConfig,
    pub distance_m: f64,
    /// Direction of radio B off radio A's boresight.
    pub angle_a_deg: f64,
    /// Direction of radio A off radio B's boresight.
    pub angle_b_deg: f64,
    /// Hardware delay added to every element pair, on top of free space.
    pub extra_group_delay_s: f64,
    pub sim_duration_s: f64,
    pub sample_rate_hz: f64,
    pub block_size: usize,
    pub seed: u64,
    /// Replaces Friis with a fixed per-pair loss (antenna gains included).
    pub path_loss_override_db: Option<f64>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            radio_a: RadioConfig::radio_a(),
            radio_b: RadioConfig::radio_b(),
            distance_m: DEFAULT_DISTANCE_M,
            angle_a_deg: 42.0,
            angle_b_deg: 42.0,
            extra_group_delay_s: DEFAULT_TOTAL_DELAY_S - DEFAULT_DISTANCE_M / C,
            sim_duration_s: 5e-6,
            sample_rate_hz: 200e9,
            block_size: 2048,
            seed: 1,
            path_loss_override_db: None,
        }
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key,
/// anything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

impl LinkConfig {
    /// The reference scenario with the fixed 75 dB path loss.
    pub fn reference() -> Self {
        Self {
            path_loss_override_db: Some(FIXED_PATH_LOSS_DB),
            ..Self::default()
        }
    }

    /// Parses a partial JSON document over the defaults. Missing keys keep
    /// their default, unknown keys are rejected.
    pub fn from_json_str(text: &str) -> Result<Self, EngineError> {
        let patch: Value = serde_json::from_str(text).map_err(|e| {
            EngineError::Config(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        Self::from_patch(patch)
    }

    pub fn from_patch(patch: Value) -> Result<Self, EngineError> {
        if !patch.is_object() {
            return Err(EngineError::Config("top level must be a JSON object".into()));
        }
        let mut doc = serde_json::to_value(Self::default()).expect("serializable");
        merge(&mut doc, patch);
        let cfg: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            EngineError::Config(format!("field `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Sets a numeric field by dotted path (`radio_a.tx_power_dbm`,
    /// `distance_m`). A bare radio field name sets it on both radios.
    pub fn with_field(&self, path: &str, value: f64) -> Result<Self, EngineError> {
        let mut doc = serde_json::to_value(self).expect("serializable");
        let paths: Vec<String> = if path.contains('.') || doc.get(path).is_some() {
            vec![path.to_string()]
        } else if doc["radio_a"].get(path).is_some() {
            vec![format!("radio_a.{path}"), format!("radio_b.{path}")]
        } else {
            return Err(EngineError::UnknownField(path.to_string()));
        };
        for p in &paths {
            let mut slot = &mut doc;
            for key in p.split('.') {
                slot = slot
                    .get_mut(key)
                    .ok_or_else(|| EngineError::UnknownField(path.to_string()))?;
            }
            *slot = match slot {
                Value::Number(n) if n.is_u64() || n.is_i64() => {
                    if value.fract() != 0.0 {
                        return Err(EngineError::Config(format!(
                            "field `{p}` takes an integer, got {value}"
                        )));
                    }
                    if n.is_u64() {
                        Value::from(value as u64)
                    } else {
                        Value::from(value as i64)
                    }
                }
                Value::Number(_) | Value::Null => Value::from(value),
                _ => return Err(EngineError::Config(format!("field `{p}` is not numeric"))),
            };
        }
        let cfg: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            EngineError::Config(format!("field `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::Config(msg));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample_rate_hz: {} must be positive", self.sample_rate_hz));
        }
        for (name, r) in [("radio_a", &self.radio_a), ("radio_b", &self.radio_b)] {
            r.validate(self.sample_rate_hz).map_err(|e| match e {
                TransceiverError::Config(m) => EngineError::Config(format!("{name}.{m}")),
                other => EngineError::Config(format!("{name}: {other}")),
            })?;
        }
        if self.radio_a.f_tx_hz != self.radio_b.f_rx_hz || self.radio_b.f_tx_hz != self.radio_a.f_rx_hz {
            return bad("radio_b: receive/transmit frequencies must mirror radio_a".into());
        }
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return bad(format!("distance_m: {} must be positive", self.distance_m));
        }
        for (name, a) in [("angle_a_deg", self.angle_a_deg), ("angle_b_deg", self.angle_b_deg)] {
            if !(a.abs() < 90.0) {
                return bad(format!("{name}: {a} must lie in (-90, 90)"));
            }
        }
        if !(self.extra_group_delay_s >= 0.0 && self.extra_group_delay_s.is_finite()) {
            return bad("extra_group_delay_s: must be non-negative".into());
        }
        if !(self.sim_duration_s > 0.0 && self.sim_duration_s.is_finite()) {
            return bad("sim_duration_s: must be positive".into());
        }
        if self.block_size == 0 {
            return bad("block_size: must be at least 1".into());
        }
        if let Some(l) = self.path_loss_override_db {
            if !l.is_finite() {
                return bad("path_loss_override_db: must be finite".into());
            }
        }
        Ok(())
    }

    /// Number of simulated samples.
    pub fn total_samples(&self) -> usize {
        (self.sim_duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec, EngineError> {
        Ok(ChannelSpec {
            geom_a: self.radio_a.geometry()?,
            geom_b: self.radio_b.geometry()?,
            pattern_a: self.radio_a.pattern(),
            pattern_b: self.radio_b.pattern(),
            distance: self.distance_m,
            angle_a: self.angle_a_deg.to_radians(),
            angle_b: self.angle_b_deg.to_radians(),
            extra_group_delay: self.extra_group_delay_s,
            freq_ab: self.radio_a.f_tx_hz,
            freq_ba: self.radio_b.f_tx_hz,
            path_loss_override: self.path_loss_override_db,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_scenario() {
        let c = LinkConfig::default();
        assert_eq!(c.radio_a.n_elements + c.radio_b.n_elements, 8);
        assert_eq!((c.angle_a_deg, c.angle_b_deg), (42.0, 42.0));
        assert!((c.distance_m / C + c.extra_group_delay_s - 35e-9).abs() < 1e-18);
        assert_eq!(1.0 / c.sample_rate_hz, 5e-12);
        assert_eq!(c.sim_duration_s, 5e-6);
        assert_eq!(c.total_samples(), 1_000_000);
        c.validate().unwrap();
    }

    #[test]
    fn partial_json_keeps_other_defaults() {
        let c = LinkConfig::from_json_str(r#"{"radio_b": {"tx_power_dbm": -10}, "seed": 7}"#).unwrap();
        assert_eq!(c.radio_b.tx_power_dbm, -10.0);
        assert_eq!(c.radio_b.f_rx_hz, 62e9);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let e = LinkConfig::from_json_str(r#"{"radio_a": {"tx_pwr": 1}}"#).unwrap_err().to_string();
        assert!(e.contains("tx_pwr"), "{e}");
        let e = LinkConfig::from_json_str(r#"{"distance_m": "far"}"#).unwrap_err().to_string();
        assert!(e.contains("distance_m"), "{e}");
        let e = LinkConfig::from_json_str("{\n  \"seed\": 1,\n  oops\n}").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
    }

    #[test]
    fn canonical_round_trip() {
        let c = LinkConfig::reference();
        let text = c.to_json_pretty();
        let back = LinkConfig::from_json_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json_pretty(), text);
    }

    #[test]
    fn field_setter() {
        let c = LinkConfig::default();
        let d = c.with_field("tx_power_dbm", -20.0).unwrap();
        assert_eq!((d.radio_a.tx_power_dbm, d.radio_b.tx_power_dbm), (-20.0, -20.0));
        let d = c.with_field("radio_a.phase_lpf_cutoff_hz", 8e6).unwrap();
        assert_eq!(d.radio_a.phase_lpf_cutoff_hz, 8e6);
        assert_eq!(d.radio_b.phase_lpf_cutoff_hz, 2e6);
        let d = c.with_field("path_loss_override_db", 75.0).unwrap();
        assert_eq!(d.path_loss_override_db, Some(75.0));
        assert_eq!(c.with_field("n_elements", 2.0).unwrap().radio_b.n_elements, 2);
        assert!(matches!(c.with_field("bogus", 1.0), Err(EngineError::UnknownField(_))));
        assert!(c.with_field("n_elements", 2.5).is_err());
    }
}
