//! Engine and checker tuning knobs.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Engine-side behaviour knobs. These shape tool semantics, not checking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Zoom level applied by `zoom_map` when the call names a place but no
    /// explicit zoom.
    pub default_city_zoom: u8,
    /// Radius in kilometres used by `filter_coords` when the call omits one.
    pub default_radius_km: f64,
    /// Number of documents returned by the retrieval tools.
    pub retrieval_k: usize,
    /// Directory `export_results` writes into. `None` disables exports;
    /// the tool then reports a tool-level error without touching state.
    pub export_dir: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            default_city_zoom: 10,
            default_radius_km: 50.0,
            retrieval_k: 3,
            export_dir: None,
        }
    }
}

/// Checker tolerances. All comparisons treat their bound inclusively, so a
/// zero tolerance still accepts exactly-equal values.
///
/// Leniency directions differ per field: larger `numeric_epsilon` and
/// `coord_epsilon` are more lenient, while smaller `rouge_threshold` and
/// `set_overlap_threshold` are.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Numeric tool-argument tolerance: args match when `|a - b| <= epsilon`.
    pub numeric_epsilon: f64,
    /// Map-centre tolerance in degrees, applied per axis.
    pub coord_epsilon: f64,
    /// Minimum ROUGE-L recall for a reply to count as matching (strictly
    /// greater-than, matching the reply check's definition).
    pub rouge_threshold: f64,
    /// Minimum Jaccard overlap for id sets. 1.0 means exact equality, and
    /// for ordered lists (tabs, displayed images) also order equality.
    pub set_overlap_threshold: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            numeric_epsilon: 1e-6,
            coord_epsilon: 0.01,
            rouge_threshold: 0.5,
            set_overlap_threshold: 1.0,
        }
    }
}

impl ToleranceConfig {
    /// The strictest configuration: zero numeric slack, exact sets, and a
    /// reply threshold of 1.0. Under this config `states_equal(a, b)` holds
    /// exactly when the two state fingerprints are equal.
    pub fn exact() -> Self {
        Self {
            numeric_epsilon: 0.0,
            coord_epsilon: 0.0,
            rouge_threshold: 1.0,
            set_overlap_threshold: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let tol = ToleranceConfig::default();
        assert_eq!(tol.numeric_epsilon, 1e-6);
        assert_eq!(tol.coord_epsilon, 0.01);
        assert_eq!(tol.rouge_threshold, 0.5);
        assert_eq!(tol.set_overlap_threshold, 1.0);
        let cfg = EngineConfig::default();
        assert_eq!(cfg.default_city_zoom, 10);
        assert_eq!(cfg.default_radius_km, 50.0);
        assert_eq!(cfg.retrieval_k, 3);
    }
}
