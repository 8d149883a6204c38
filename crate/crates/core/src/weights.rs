//! Operator-editable cost table for node and hyperedge weights.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dimensionless traversal costs and the bucket thresholds they apply to.
///
/// Serialized as a flat JSON object with these exact keys; unknown keys are
/// rejected, missing keys take their default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    /// Room bounded by at least one curtain wall.
    pub wm_curtain: f64,
    pub wm_standard: f64,
    pub wa_small: f64,
    pub wa_medium: f64,
    pub wa_large: f64,
    /// Lower edge of the medium area bucket, m² (inclusive).
    pub area_medium_min: f64,
    /// Upper edge of the medium area bucket, m² (inclusive).
    pub area_medium_max: f64,
    pub ws_fresh: f64,
    pub ws_recent: f64,
    pub ws_stale: f64,
    /// Lower edge of the recent scan-age bucket, days (inclusive).
    pub scan_recent_min_days: u32,
    /// Upper edge of the recent scan-age bucket, days (inclusive).
    pub scan_recent_max_days: u32,
    pub wh_hazard: f64,
    pub wd_push: f64,
    pub wd_pull: f64,
    /// Paths at or above this total raise a no-safe-alternative warning.
    pub warn_threshold: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            wm_curtain: 12.0,
            wm_standard: 4.0,
            wa_small: 2.0,
            wa_medium: 8.0,
            wa_large: 12.0,
            area_medium_min: 50.0,
            area_medium_max: 100.0,
            ws_fresh: 10.0,
            ws_recent: 6.0,
            ws_stale: 0.0,
            scan_recent_min_days: 7,
            scan_recent_max_days: 14,
            wh_hazard: 500.0,
            wd_push: 2.0,
            wd_pull: 6.0,
            warn_threshold: 500.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("weight `{field}` must be a finite value >= 0, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("thresholds must be strictly increasing: `{lower}` ({lo}) < `{upper}` ({hi})")]
    Thresholds {
        lower: &'static str,
        upper: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("malformed weight document: {0}")]
    Parse(String),
}

impl WeightConfig {
    fn costs(&self) -> [(&'static str, f64); 14] {
        [
            ("wm_curtain", self.wm_curtain),
            ("wm_standard", self.wm_standard),
            ("wa_small", self.wa_small),
            ("wa_medium", self.wa_medium),
            ("wa_large", self.wa_large),
            ("area_medium_min", self.area_medium_min),
            ("area_medium_max", self.area_medium_max),
            ("ws_fresh", self.ws_fresh),
            ("ws_recent", self.ws_recent),
            ("ws_stale", self.ws_stale),
            ("wh_hazard", self.wh_hazard),
            ("wd_push", self.wd_push),
            ("wd_pull", self.wd_pull),
            ("warn_threshold", self.warn_threshold),
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in self.costs() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::Negative { field, value });
            }
        }
        if self.area_medium_min >= self.area_medium_max {
            return Err(ConfigError::Thresholds {
                lower: "area_medium_min",
                upper: "area_medium_max",
                lo: self.area_medium_min,
                hi: self.area_medium_max,
            });
        }
        if self.scan_recent_min_days >= self.scan_recent_max_days {
            return Err(ConfigError::Thresholds {
                lower: "scan_recent_min_days",
                upper: "scan_recent_max_days",
                lo: self.scan_recent_min_days.into(),
                hi: self.scan_recent_max_days.into(),
            });
        }
        Ok(())
    }

    /// Parses and validates a weight document.
    pub fn from_json(bytes: &[u8]) -> Result<Self, ConfigError> {
        let cfg: WeightConfig =
            serde_json::from_slice(bytes).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
