//! Canonical state serialization and fingerprinting.
//!
//! The fingerprint contract: a state is canonicalized by sorting every set,
//! rounding every coordinate (and any other float) to 6 decimal places,
//! serializing timestamps as fixed-width RFC 3339, and emitting compact JSON
//! with keys sorted at every level. The fingerprint is the SHA-256 of those
//! bytes. Equal states after canonicalization always produce equal digests,
//! independent of platform, process, or thread count.

use chrono::SecondsFormat;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::catalog::FilterSpec;
use super::{EnvironmentState, LayerKind, PlotLayer};

/// A 32-byte SHA-256 digest over the canonical state serialization.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateFingerprint(pub [u8; 32]);

impl StateFingerprint {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> crate::error::Result<Self> {
        let bytes = hex::decode(s.trim())
            .map_err(|e| crate::error::Error::Schema(format!("bad fingerprint hex: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| crate::error::Error::Schema("fingerprint must be 32 bytes".into()))?;
        Ok(Self(arr))
    }
}

impl std::fmt::Debug for StateFingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StateFingerprint({})", self.to_hex())
    }
}

impl std::fmt::Display for StateFingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl serde::Serialize for StateFingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> serde::Deserialize<'de> for StateFingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        StateFingerprint::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Round to 6 decimal places (~0.1 m for coordinates), normalizing -0.0.
pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn num(x: f64) -> Value {
    Value::from(round6(x))
}

fn sorted_strings<'a>(iter: impl Iterator<Item = &'a String>) -> Value {
    let mut v: Vec<&str> = iter.map(String::as_str).collect();
    v.sort_unstable();
    json!(v)
}

fn layer_value(layer: &PlotLayer) -> Value {
    let kind = match layer.layer_kind {
        LayerKind::Scatter => "scatter",
        LayerKind::Heatmap => "heatmap",
        LayerKind::ChangeDetection => "change_detection",
    };
    let style = match &layer.style {
        None => Value::Null,
        Some(map) => {
            let mut obj = Map::new();
            for (k, v) in map {
                obj.insert(k.clone(), Value::from(v.clone()));
            }
            Value::Object(obj)
        }
    };
    json!({
        "layer_kind": kind,
        "dataset": layer.dataset,
        "record_ids": sorted_strings(layer.record_ids.iter()),
        "style": style,
    })
}

fn filter_value(filter: &FilterSpec) -> Value {
    match filter {
        FilterSpec::Radius { lat, lon, radius_km } => json!({
            "kind": "radius", "lat": num(*lat), "lon": num(*lon), "radius_km": num(*radius_km),
        }),
        FilterSpec::Bbox { min_lat, min_lon, max_lat, max_lon } => json!({
            "kind": "bbox",
            "min_lat": num(*min_lat), "min_lon": num(*min_lon),
            "max_lat": num(*max_lat), "max_lon": num(*max_lon),
        }),
        FilterSpec::DateRange { start, end } => json!({
            "kind": "date_range",
            "start": start.to_rfc3339_opts(SecondsFormat::Nanos, true),
            "end": end.to_rfc3339_opts(SecondsFormat::Nanos, true),
        }),
        FilterSpec::Class { classes } => json!({ "kind": "class", "classes": classes }),
        FilterSpec::LccClass { classes } => json!({ "kind": "lcc_class", "classes": classes }),
    }
}

/// The canonical JSON value for a state. `serde_json` maps are BTree-backed,
/// so object keys come out sorted at every level.
pub fn canonical_state_value(state: &EnvironmentState) -> Value {
    json!({
        "map_state": {
            "center_lat": num(state.map_state.center_lat),
            "center_lon": num(state.map_state.center_lon),
            "zoom": state.map_state.zoom,
            "layers": state.map_state.layers.iter().map(layer_value).collect::<Vec<_>>(),
        },
        "ui_state": {
            "open_tabs": state.ui_state.open_tabs,
            "displayed_images": state.ui_state.displayed_images,
            "hover_target": state.ui_state.hover_target,
        },
        "session_state": {
            "loaded_datasets": sorted_strings(state.session_state.loaded_datasets.iter()),
            "active_filters": state.session_state.active_filters.iter().map(filter_value).collect::<Vec<_>>(),
            "result_set": sorted_strings(state.session_state.result_set.iter()),
            "retrieved_docs": sorted_strings(state.session_state.retrieved_docs.iter()),
        },
        "reply": state.reply,
    })
}

/// Compact canonical JSON string — the exact bytes fed to SHA-256.
pub fn canonical_state_json(state: &EnvironmentState) -> String {
    canonical_state_value(state).to_string()
}

/// Canonicalize and hash a state.
pub fn fingerprint(state: &EnvironmentState) -> StateFingerprint {
    let mut hasher = Sha256::new();
    hasher.update(canonical_state_json(state).as_bytes());
    StateFingerprint(hasher.finalize().into())
}
