//! The deterministic environment state machine.
//!
//! A state captures everything a task can observably change: the map view,
//! the UI view, the session (loaded data, filters, result and document
//! sets), and the final reply. Transitions are pure: applying a tool call
//! yields a new state and a textual observation, never touching the input.
//! Given the same initial state, replaying the same trace always lands on
//! the same fingerprint, regardless of thread or process.

pub mod canonical;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{parse_timestamp, parse_timestamp_end, Catalog, Dataset, FilterSpec};
use crate::config::{EngineConfig, ToleranceConfig};
use crate::error::{Error, Result};
use crate::fixtures::{CorpusKind, FixtureBundle};
use crate::tools::{
    number_of, register_builtin_tools, string_list_of, SemanticsId, ToolCall, ToolRegistry, Trace,
    ValidationResult,
};

pub use canonical::{canonical_state_json, canonical_state_value, fingerprint, round6, StateFingerprint};

/// Plot layer kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Scatter,
    Heatmap,
    ChangeDetection,
}

/// One plotted layer. The kind is fixed at creation and the id set is the
/// result set snapshot the plot was taken from, so it is never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotLayer {
    pub layer_kind: LayerKind,
    pub dataset: String,
    pub record_ids: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<BTreeMap<String, String>>,
}

/// Map view: center, zoom level 0-22, and plotted layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapState {
    pub center_lat: f64,
    pub center_lon: f64,
    pub zoom: u8,
    pub layers: Vec<PlotLayer>,
}

/// UI view: open tabs, displayed images, and the hover target.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UiState {
    pub open_tabs: Vec<String>,
    pub displayed_images: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hover_target: Option<String>,
}

/// Session: loaded datasets, applied filters, the current result set, and
/// documents retrieved so far.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionState {
    pub loaded_datasets: BTreeSet<String>,
    pub active_filters: Vec<FilterSpec>,
    pub result_set: BTreeSet<String>,
    pub retrieved_docs: BTreeSet<String>,
}

/// The full verifiable state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    pub map_state: MapState,
    pub ui_state: UiState,
    pub session_state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
}

impl EnvironmentState {
    /// The canonical empty state: world view at (0, 0), zoom 2, nothing
    /// loaded, no reply. Every task starts here.
    pub fn initial() -> Self {
        Self {
            map_state: MapState { center_lat: 0.0, center_lon: 0.0, zoom: 2, layers: Vec::new() },
            ui_state: UiState::default(),
            session_state: SessionState::default(),
            reply: None,
        }
    }
}

/// Textual result of one tool application. `ok == false` marks a tool-level
/// failure (state unchanged) or an infeasible call that was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub tool: String,
    pub ok: bool,
    pub message: String,
}

impl Observation {
    fn ok(tool: &str, message: String) -> Self {
        Self { tool: tool.into(), ok: true, message }
    }

    fn err(tool: &str, message: String) -> Self {
        Self { tool: tool.into(), ok: false, message }
    }
}

/// One field-level difference between two states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Difference {
    pub path: String,
    pub left: String,
    pub right: String,
}

/// The simulated workbench: immutable catalog, fixtures, config, and tool
/// registry. Instances are cheap to share across threads; each replay owns
/// its private [`EnvironmentState`].
#[derive(Debug)]
pub struct Environment {
    catalog: Catalog,
    fixtures: FixtureBundle,
    config: EngineConfig,
    registry: ToolRegistry,
}

impl Environment {
    pub fn new(catalog: Catalog, fixtures: FixtureBundle, config: EngineConfig) -> Self {
        let registry = register_builtin_tools().expect("builtin registry is consistent");
        Self { catalog, fixtures, config, registry }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn fixtures(&self) -> &FixtureBundle {
        &self.fixtures
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    /// The canonical empty starting state.
    pub fn initial_state(&self) -> EnvironmentState {
        EnvironmentState::initial()
    }

    /// Apply one tool call, returning the successor state and an
    /// observation. The input state is never mutated. Calls that fail
    /// validation (unknown tool, schema violation) are errors; calls that
    /// are schema-valid but fail at tool level (unknown place, dataset not
    /// in catalog) return an error observation with the state unchanged.
    pub fn apply_tool(
        &self,
        state: &EnvironmentState,
        call: &ToolCall,
    ) -> Result<(EnvironmentState, Observation)> {
        let mut next = state.clone();
        let obs = self.apply_tool_mut(&mut next, call)?;
        Ok((next, obs))
    }

    /// Fold a whole trace from `state0`. Infeasible calls are recorded as
    /// failed observations and skipped; tool-level failures likewise leave
    /// the state untouched for that step. Afterwards the trace's own reply,
    /// when present, becomes the state's final reply.
    pub fn run_trace(
        &self,
        state0: &EnvironmentState,
        trace: &Trace,
    ) -> (EnvironmentState, Vec<Observation>) {
        let mut state = state0.clone();
        let mut observations = Vec::with_capacity(trace.calls.len());
        for call in &trace.calls {
            match self.apply_tool_mut(&mut state, call) {
                Ok(obs) => observations.push(obs),
                Err(err) => {
                    observations.push(Observation::err(&call.tool, format!("infeasible: {err}")))
                }
            }
        }
        if trace.reply.is_some() {
            state.reply = trace.reply.clone();
        }
        (state, observations)
    }

    /// In-place transition used by [`Self::run_trace`]; mutates only on
    /// success so a failed step leaves `state` exactly as it was.
    fn apply_tool_mut(&self, state: &mut EnvironmentState, call: &ToolCall) -> Result<Observation> {
        let spec = match self.registry.validate_call(call) {
            ValidationResult::Ok => self.registry.get(&call.tool).expect("validated"),
            ValidationResult::InfeasibleAction { tool } => {
                return Err(Error::Infeasible(format!("unknown tool {tool:?}")));
            }
            ValidationResult::ArgSchemaViolation { violations } => {
                let detail: Vec<String> =
                    violations.iter().map(|v| format!("{}: {}", v.arg, v.reason)).collect();
                return Err(Error::Infeasible(format!(
                    "{} schema violation: {}",
                    call.tool,
                    detail.join("; ")
                )));
            }
        };

        let tool = spec.name.clone();
        match spec.semantics_id {
            SemanticsId::DbLoad => self.db_load(state, call, &tool),
            SemanticsId::FilterCoords => self.filter_coords(state, call, &tool),
            SemanticsId::FilterBbox => self.filter_bbox(state, call, &tool),
            SemanticsId::FilterDate => self.filter_date(state, call, &tool),
            SemanticsId::FilterClass => self.filter_classes(state, call, &tool, false),
            SemanticsId::FilterLcc => self.filter_classes(state, call, &tool, true),
            SemanticsId::CountResults => Ok(Observation::ok(
                &tool,
                format!("result set contains {} records", state.session_state.result_set.len()),
            )),
            SemanticsId::ScatterPlot => self.plot(state, call, &tool, LayerKind::Scatter),
            SemanticsId::HeatmapPlot => {
                let kind = match call.args.get("mode").and_then(Value::as_str) {
                    Some(mode) if mode.contains("change") => LayerKind::ChangeDetection,
                    _ => LayerKind::Heatmap,
                };
                self.plot(state, call, &tool, kind)
            }
            SemanticsId::ZoomMap => self.zoom_map(state, call, &tool),
            SemanticsId::PanMap => self.pan_map(state, call, &tool),
            SemanticsId::DisplayImages => {
                let ids = string_list_of(&call.args["ids"]);
                state.ui_state.displayed_images = ids.clone();
                Ok(Observation::ok(&tool, format!("displaying {} images", ids.len())))
            }
            SemanticsId::DisplayHover => {
                let id = call.args["id"].as_str().unwrap_or_default().to_string();
                state.ui_state.hover_target = Some(id.clone());
                Ok(Observation::ok(&tool, format!("hovering over {id}")))
            }
            SemanticsId::OpenUrl => {
                let url = call.args["url"].as_str().unwrap_or_default().to_string();
                state.ui_state.open_tabs.push(url.clone());
                Ok(Observation::ok(&tool, format!("opened tab {url}")))
            }
            SemanticsId::WebSearch => self.retrieve(state, call, &tool, CorpusKind::Web),
            SemanticsId::ArxivSearch => self.retrieve(state, call, &tool, CorpusKind::Arxiv),
            SemanticsId::DocsRag => self.retrieve(state, call, &tool, CorpusKind::Documents),
            SemanticsId::ModelzooSearch => self.retrieve(state, call, &tool, CorpusKind::Modelzoo),
            SemanticsId::WikiRag => self.retrieve(state, call, &tool, CorpusKind::Wiki),
            SemanticsId::AnswerTools => {
                let text = call.args["text"].as_str().unwrap_or_default().to_string();
                state.reply = Some(text);
                Ok(Observation::ok(&tool, "reply recorded".into()))
            }
            SemanticsId::ExportResults => self.export_results(state, call, &tool),
        }
    }

    fn db_load(&self, state: &mut EnvironmentState, call: &ToolCall, tool: &str) -> Result<Observation> {
        let name = call.args["dataset"].as_str().unwrap_or_default();
        let dataset: Dataset = match name.parse() {
            Ok(d) => d,
            Err(_) => return Ok(Observation::err(tool, format!("unknown dataset {name:?}"))),
        };
        if !self.catalog.has_dataset(dataset) {
            return Ok(Observation::err(tool, format!("dataset {dataset} has no records in the catalog")));
        }
        let ids = self.catalog.ids_of_dataset(dataset);
        let added = ids.len();
        state.session_state.loaded_datasets.insert(dataset.name().to_string());
        state.session_state.result_set.extend(ids);
        Ok(Observation::ok(
            tool,
            format!(
                "loaded {dataset} ({added} records); result set now {}",
                state.session_state.result_set.len()
            ),
        ))
    }

    fn require_loaded(&self, state: &EnvironmentState, tool: &str) -> Option<Observation> {
        if state.session_state.loaded_datasets.is_empty() {
            Some(Observation::err(tool, "no datasets loaded".into()))
        } else {
            None
        }
    }

    fn apply_filter(
        &self,
        state: &mut EnvironmentState,
        tool: &str,
        filter: FilterSpec,
    ) -> Observation {
        let before = state.session_state.result_set.len();
        let filtered = self.catalog.filter_records(&state.session_state.result_set, &filter);
        state.session_state.result_set = filtered;
        state.session_state.active_filters.push(filter);
        Observation::ok(
            tool,
            format!("result set now {} (was {before})", state.session_state.result_set.len()),
        )
    }

    fn filter_coords(&self, state: &mut EnvironmentState, call: &ToolCall, tool: &str) -> Result<Observation> {
        if let Some(obs) = self.require_loaded(state, tool) {
            return Ok(obs);
        }
        let radius_km = match call.args.get("radius_km") {
            Some(v) => number_of(v).map_err(|e| Error::Infeasible(format!("radius_km: {e}")))?,
            None => self.config.default_radius_km,
        };
        let center = match self.resolve_point(call, "place") {
            Ok(c) => c,
            Err(msg) => return Ok(Observation::err(tool, msg)),
        };
        Ok(self.apply_filter(state, tool, FilterSpec::Radius {
            lat: center.0,
            lon: center.1,
            radius_km,
        }))
    }

    fn filter_bbox(&self, state: &mut EnvironmentState, call: &ToolCall, tool: &str) -> Result<Observation> {
        if let Some(obs) = self.require_loaded(state, tool) {
            return Ok(obs);
        }
        let get = |name: &str| number_of(&call.args[name]).unwrap_or(f64::NAN);
        Ok(self.apply_filter(state, tool, FilterSpec::Bbox {
            min_lat: get("min_lat"),
            min_lon: get("min_lon"),
            max_lat: get("max_lat"),
            max_lon: get("max_lon"),
        }))
    }

    fn filter_date(&self, state: &mut EnvironmentState, call: &ToolCall, tool: &str) -> Result<Observation> {
        if let Some(obs) = self.require_loaded(state, tool) {
            return Ok(obs);
        }
        let start = parse_timestamp(call.args["start"].as_str().unwrap_or_default())
            .ok_or_else(|| Error::Infeasible("unparseable start date".into()))?;
        let end = parse_timestamp_end(call.args["end"].as_str().unwrap_or_default())
            .ok_or_else(|| Error::Infeasible("unparseable end date".into()))?;
        Ok(self.apply_filter(state, tool, FilterSpec::DateRange { start, end }))
    }

    fn filter_classes(
        &self,
        state: &mut EnvironmentState,
        call: &ToolCall,
        tool: &str,
        lcc: bool,
    ) -> Result<Observation> {
        if let Some(obs) = self.require_loaded(state, tool) {
            return Ok(obs);
        }
        let classes = string_list_of(&call.args["classes"]);
        let filter = if lcc {
            FilterSpec::LccClass { classes }
        } else {
            FilterSpec::Class { classes }
        };
        Ok(self.apply_filter(state, tool, filter))
    }

    fn plot(
        &self,
        state: &mut EnvironmentState,
        call: &ToolCall,
        tool: &str,
        kind: LayerKind,
    ) -> Result<Observation> {
        if state.session_state.result_set.is_empty() {
            return Ok(Observation::err(tool, "result set is empty; nothing to plot".into()));
        }
        let record_ids = state.session_state.result_set.clone();
        let datasets: BTreeSet<&str> = record_ids
            .iter()
            .filter_map(|id| self.catalog.record(id).map(|r| r.dataset.name()))
            .collect();
        let style = call
            .args
            .get("label")
            .and_then(Value::as_str)
            .map(|label| BTreeMap::from([("label".to_string(), label.to_string())]));
        let count = record_ids.len();
        state.map_state.layers.push(PlotLayer {
            layer_kind: kind,
            dataset: datasets.into_iter().collect::<Vec<_>>().join("+"),
            record_ids,
            style,
        });
        Ok(Observation::ok(tool, format!("plotted layer with {count} records")))
    }

    /// Resolve the center point of a map/filter call from either a named
    /// place (gazetteer) or explicit lat/lon args.
    fn resolve_point(&self, call: &ToolCall, place_key: &str) -> std::result::Result<(f64, f64), String> {
        if let Some(place) = call.args.get(place_key).and_then(Value::as_str) {
            return self
                .fixtures
                .resolve_place(place)
                .ok_or_else(|| format!("unknown place {place:?}"));
        }
        match (call.args.get("lat"), call.args.get("lon")) {
            (Some(lat), Some(lon)) => {
                let lat = number_of(lat).map_err(|e| format!("lat: {e}"))?;
                let lon = number_of(lon).map_err(|e| format!("lon: {e}"))?;
                Ok((lat.clamp(-90.0, 90.0), wrap_lon(lon)))
            }
            _ => Err(format!("missing {place_key} or lat/lon")),
        }
    }

    fn zoom_map(&self, state: &mut EnvironmentState, call: &ToolCall, tool: &str) -> Result<Observation> {
        let center = match self.resolve_point(call, "location") {
            Ok(c) => c,
            Err(msg) => return Ok(Observation::err(tool, msg)),
        };
        let zoom = match call.args.get("zoom") {
            Some(v) => number_of(v)
                .map_err(|e| Error::Infeasible(format!("zoom: {e}")))?
                .round()
                .clamp(0.0, 22.0) as u8,
            None => self.config.default_city_zoom.min(22),
        };
        state.map_state.center_lat = center.0;
        state.map_state.center_lon = center.1;
        state.map_state.zoom = zoom;
        Ok(Observation::ok(
            tool,
            format!("map centered at ({:.4}, {:.4}) zoom {zoom}", center.0, center.1),
        ))
    }

    fn pan_map(&self, state: &mut EnvironmentState, call: &ToolCall, tool: &str) -> Result<Observation> {
        let center = match self.resolve_point(call, "location") {
            Ok(c) => c,
            Err(msg) => return Ok(Observation::err(tool, msg)),
        };
        state.map_state.center_lat = center.0;
        state.map_state.center_lon = center.1;
        Ok(Observation::ok(
            tool,
            format!("map panned to ({:.4}, {:.4})", center.0, center.1),
        ))
    }

    fn retrieve(
        &self,
        state: &mut EnvironmentState,
        call: &ToolCall,
        tool: &str,
        corpus: CorpusKind,
    ) -> Result<Observation> {
        let query = call.args["query"].as_str().unwrap_or_default();
        let docs = self.fixtures.retrieve(corpus, query, self.config.retrieval_k);
        if docs.is_empty() {
            return Ok(Observation::ok(tool, "no matching documents".into()));
        }
        let mut lines = Vec::with_capacity(docs.len());
        for doc in &docs {
            state.session_state.retrieved_docs.insert(doc.id.clone());
            lines.push(format!("{} ({}): {}", doc.id, doc.title, doc.text));
        }
        Ok(Observation::ok(
            tool,
            format!("retrieved {} documents:\n{}", docs.len(), lines.join("\n")),
        ))
    }

    fn export_results(&self, state: &mut EnvironmentState, call: &ToolCall, tool: &str) -> Result<Observation> {
        let Some(export_dir) = &self.config.export_dir else {
            return Ok(Observation::err(tool, "export directory not configured".into()));
        };
        let rel = call.args["path"].as_str().unwrap_or_default();
        let rel_path = std::path::Path::new(rel);
        if rel_path.is_absolute() || rel.contains("..") {
            return Ok(Observation::err(tool, format!("refusing non-relative export path {rel:?}")));
        }
        let path = export_dir.join(rel_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        for id in &state.session_state.result_set {
            writeln!(f, "{}", serde_json::json!({ "id": id }))?;
        }
        Ok(Observation::ok(
            tool,
            format!("exported {} ids to {}", state.session_state.result_set.len(), path.display()),
        ))
    }
}

fn wrap_lon(lon: f64) -> f64 {
    let mut l = lon;
    while l > 180.0 {
        l -= 360.0;
    }
    while l < -180.0 {
        l += 360.0;
    }
    l
}

/// Jaccard overlap of two sets; two empty sets count as fully overlapping.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    intersection / union
}

fn lists_match(a: &[String], b: &[String], threshold: f64) -> bool {
    if threshold >= 1.0 {
        // At full strictness order matters, mirroring the fingerprint.
        a == b
    } else {
        let sa: BTreeSet<&String> = a.iter().collect();
        let sb: BTreeSet<&String> = b.iter().collect();
        jaccard(&sa, &sb) >= threshold
    }
}

fn sets_match(a: &BTreeSet<String>, b: &BTreeSet<String>, threshold: f64) -> bool {
    jaccard(a, b) >= threshold
}

fn coords_match(a: f64, b: f64, epsilon: f64) -> bool {
    (round6(a) - round6(b)).abs() <= epsilon
}

/// Tolerant full-state equality. With [`ToleranceConfig::exact`] this holds
/// exactly when the two fingerprints are equal.
pub fn states_equal(a: &EnvironmentState, b: &EnvironmentState, tol: &ToleranceConfig) -> bool {
    let th = tol.set_overlap_threshold;
    if !coords_match(a.map_state.center_lat, b.map_state.center_lat, tol.coord_epsilon)
        || !coords_match(a.map_state.center_lon, b.map_state.center_lon, tol.coord_epsilon)
        || a.map_state.zoom != b.map_state.zoom
    {
        return false;
    }
    if a.map_state.layers.len() != b.map_state.layers.len() {
        return false;
    }
    for (la, lb) in a.map_state.layers.iter().zip(&b.map_state.layers) {
        if la.layer_kind != lb.layer_kind
            || la.dataset != lb.dataset
            || la.style != lb.style
            || !sets_match(&la.record_ids, &lb.record_ids, th)
        {
            return false;
        }
    }
    if !lists_match(&a.ui_state.open_tabs, &b.ui_state.open_tabs, th)
        || !lists_match(&a.ui_state.displayed_images, &b.ui_state.displayed_images, th)
        || a.ui_state.hover_target != b.ui_state.hover_target
    {
        return false;
    }
    if !sets_match(&a.session_state.loaded_datasets, &b.session_state.loaded_datasets, th)
        || !sets_match(&a.session_state.result_set, &b.session_state.result_set, th)
        || !sets_match(&a.session_state.retrieved_docs, &b.session_state.retrieved_docs, th)
    {
        return false;
    }
    // Filters and reply have no tolerance knob; compare canonically.
    let fa: Vec<Value> = a.session_state.active_filters.iter().map(|f| canonical_filter(f)).collect();
    let fb: Vec<Value> = b.session_state.active_filters.iter().map(|f| canonical_filter(f)).collect();
    if fa != fb {
        return false;
    }
    a.reply == b.reply
}

fn canonical_filter(f: &FilterSpec) -> Value {
    // Reuse the fingerprint encoding so float rounding stays consistent.
    let state = EnvironmentState {
        session_state: SessionState { active_filters: vec![f.clone()], ..Default::default() },
        ..EnvironmentState::initial()
    };
    canonical_state_value(&state)["session_state"]["active_filters"][0].clone()
}

/// Field-path-labelled differences between two states; empty exactly when
/// [`states_equal`] holds under [`ToleranceConfig::exact`].
pub fn state_diff(a: &EnvironmentState, b: &EnvironmentState) -> Vec<Difference> {
    let va = canonical_state_value(a);
    let vb = canonical_state_value(b);
    let mut out = Vec::new();
    diff_value("", &va, &vb, &mut out);
    out
}

fn diff_value(path: &str, a: &Value, b: &Value, out: &mut Vec<Difference>) {
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            // Canonical values always share a schema, so keys align.
            for (key, va) in ma {
                let sub = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                diff_value(&sub, va, &mb[key], out);
            }
        }
        _ if a != b => out.push(Difference {
            path: path.to_string(),
            left: a.to_string(),
            right: b.to_string(),
        }),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::synth::synthetic_catalog;
    use crate::fixtures::synthetic_fixtures;

    fn test_env() -> Environment {
        Environment::new(
            Catalog::from_records(synthetic_catalog(700, 42)),
            synthetic_fixtures(),
            EngineConfig::default(),
        )
    }

    #[test]
    fn initial_state_is_the_documented_default() {
        let env = test_env();
        let s = env.initial_state();
        assert_eq!(s.map_state.zoom, 2);
        assert_eq!(s.map_state.center_lat, 0.0);
        assert_eq!(s.map_state.center_lon, 0.0);
        assert!(s.map_state.layers.is_empty());
        assert!(s.session_state.result_set.is_empty());
        assert_eq!(fingerprint(&s), fingerprint(&env.initial_state()));
    }

    #[test]
    fn zoom_map_uses_gazetteer_and_default_city_zoom() {
        let env = test_env();
        let call = ToolCall::new("zoom_map").with_arg("location", "Seattle, WA");
        let (next, obs) = env.apply_tool(&env.initial_state(), &call).unwrap();
        assert!(obs.ok);
        assert!((next.map_state.center_lat - 47.6062).abs() < 1e-9);
        assert!((next.map_state.center_lon + 122.3321).abs() < 1e-9);
        assert_eq!(next.map_state.zoom, 10);
    }

    #[test]
    fn unknown_place_is_a_tool_level_error_leaving_state_unchanged() {
        let env = test_env();
        let state = env.initial_state();
        let call = ToolCall::new("zoom_map").with_arg("location", "Atlantis");
        let (next, obs) = env.apply_tool(&state, &call).unwrap();
        assert!(!obs.ok);
        assert_eq!(fingerprint(&next), fingerprint(&state));
    }

    #[test]
    fn unknown_tool_is_an_infeasible_error() {
        let env = test_env();
        let err = env.apply_tool(&env.initial_state(), &ToolCall::new("teleport")).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn db_load_is_idempotent() {
        let env = test_env();
        let call = ToolCall::new("db_load").with_arg("dataset", "xview1");
        let (s1, _) = env.apply_tool(&env.initial_state(), &call).unwrap();
        let (s2, _) = env.apply_tool(&s1, &call).unwrap();
        assert_eq!(fingerprint(&s1), fingerprint(&s2));
        assert!(!s1.session_state.result_set.is_empty());
    }

    #[test]
    fn filter_date_matches_brute_force_scan() {
        let env = test_env();
        let (loaded, _) = env.apply_tool(
            &env.initial_state(),
            &ToolCall::new("db_load").with_arg("dataset", "xview1"),
        ).unwrap();
        let call = ToolCall::new("filter_date")
            .with_arg("start", "2021-11-01")
            .with_arg("end", "2021-11-30");
        let (next, _) = env.apply_tool(&loaded, &call).unwrap();

        let start = parse_timestamp("2021-11-01").unwrap();
        let end = parse_timestamp_end("2021-11-30").unwrap();
        let brute: BTreeSet<String> = env
            .catalog()
            .records()
            .filter(|r| r.dataset == Dataset::Xview1 && r.timestamp >= start && r.timestamp <= end)
            .map(|r| r.id.clone())
            .collect();
        assert_eq!(next.session_state.result_set, brute);
    }

    #[test]
    fn filters_before_any_load_fail_without_state_change() {
        let env = test_env();
        let state = env.initial_state();
        let call = ToolCall::new("filter_class").with_arg("classes", serde_json::json!(["truck"]));
        let (next, obs) = env.apply_tool(&state, &call).unwrap();
        assert!(!obs.ok);
        assert_eq!(fingerprint(&next), fingerprint(&state));
    }

    #[test]
    fn run_trace_on_empty_trace_keeps_state_and_sets_reply() {
        let env = test_env();
        let trace = Trace::new(vec![], Some("done".into()));
        let (state, obs) = env.run_trace(&env.initial_state(), &trace);
        assert!(obs.is_empty());
        assert_eq!(state.reply.as_deref(), Some("done"));
        let mut expected = env.initial_state();
        expected.reply = Some("done".into());
        assert_eq!(fingerprint(&state), fingerprint(&expected));
    }

    #[test]
    fn run_trace_is_deterministic_and_skips_infeasible_calls() {
        let env = test_env();
        let trace = Trace::new(
            vec![
                ToolCall::new("db_load").with_arg("dataset", "xview1"),
                ToolCall::new("teleport"),
                ToolCall::new("scatter_plot"),
            ],
            Some("plotted".into()),
        );
        let (s1, obs1) = env.run_trace(&env.initial_state(), &trace);
        let (s2, _) = env.run_trace(&env.initial_state(), &trace);
        assert_eq!(fingerprint(&s1), fingerprint(&s2));
        assert_eq!(obs1.len(), 3);
        assert!(!obs1[1].ok);
        assert_eq!(s1.map_state.layers.len(), 1);
    }

    #[test]
    fn gold_load_filter_plot_trace_matches_brute_force() {
        let env = test_env();
        let trace = Trace::new(
            vec![
                ToolCall::new("db_load").with_arg("dataset", "xview1"),
                ToolCall::new("filter_coords").with_arg("place", "Seattle, WA").with_arg("radius_km", 400),
                ToolCall::new("filter_date").with_arg("start", "2016-01-01").with_arg("end", "2022-12-31"),
                ToolCall::new("filter_class").with_arg("classes", serde_json::json!(["truck", "small-car"])),
                ToolCall::new("scatter_plot"),
            ],
            Some(String::new()),
        );
        let (state, _) = env.run_trace(&env.initial_state(), &trace);
        assert_eq!(state.map_state.layers.len(), 1);

        let (slat, slon) = env.fixtures().resolve_place("Seattle, WA").unwrap();
        let start = parse_timestamp("2016-01-01").unwrap();
        let end = parse_timestamp_end("2022-12-31").unwrap();
        let brute: BTreeSet<String> = env
            .catalog()
            .records()
            .filter(|r| r.dataset == Dataset::Xview1)
            .filter(|r| crate::catalog::geo::haversine_km(slat, slon, r.lat, r.lon) <= 400.0)
            .filter(|r| r.timestamp >= start && r.timestamp <= end)
            .filter(|r| {
                r.classes.iter().any(|c| {
                    let c = c.trim().to_lowercase();
                    c == "truck" || c == "small-car"
                })
            })
            .map(|r| r.id.clone())
            .collect();
        assert!(!brute.is_empty(), "fixture should have matches");
        assert_eq!(state.map_state.layers[0].record_ids, brute);
        assert_eq!(state.session_state.result_set, brute);
    }

    #[test]
    fn prefix_then_suffix_equals_whole_trace() {
        let env = test_env();
        let calls = vec![
            ToolCall::new("db_load").with_arg("dataset", "fmow"),
            ToolCall::new("filter_lccclass").with_arg("classes", serde_json::json!(["golf-course"])),
            ToolCall::new("heatmap_plot"),
            ToolCall::new("zoom_map").with_arg("location", "Madrid"),
        ];
        let whole = Trace::new(calls.clone(), Some("ok".into()));
        let prefix = Trace::new(calls[..2].to_vec(), None);
        let suffix = Trace::new(calls[2..].to_vec(), Some("ok".into()));

        let (s_whole, _) = env.run_trace(&env.initial_state(), &whole);
        let (s_mid, _) = env.run_trace(&env.initial_state(), &prefix);
        let (s_split, _) = env.run_trace(&s_mid, &suffix);
        assert_eq!(fingerprint(&s_whole), fingerprint(&s_split));
    }

    #[test]
    fn states_equal_exact_iff_fingerprints_equal() {
        let env = test_env();
        let trace = Trace::new(
            vec![
                ToolCall::new("db_load").with_arg("dataset", "xview3"),
                ToolCall::new("zoom_map").with_arg("location", "Vienna"),
                ToolCall::new("web_search").with_arg("query", "illegal fishing"),
            ],
            Some("done".into()),
        );
        let (a, _) = env.run_trace(&env.initial_state(), &trace);
        let (b, _) = env.run_trace(&env.initial_state(), &trace);
        let exact = ToleranceConfig::exact();
        assert!(states_equal(&a, &b, &exact));
        assert_eq!(fingerprint(&a), fingerprint(&b));

        let mut c = b.clone();
        c.ui_state.open_tabs.push("https://example.org/extra".into());
        assert!(!states_equal(&a, &c, &exact));
        assert_ne!(fingerprint(&a), fingerprint(&c));

        let mut d = b.clone();
        d.reply = Some("different".into());
        assert!(!states_equal(&a, &d, &exact));
        assert_ne!(fingerprint(&a), fingerprint(&d));
    }

    #[test]
    fn zoom_difference_fails_equality() {
        let a = EnvironmentState::initial();
        let mut b = EnvironmentState::initial();
        b.map_state.zoom = 3;
        assert!(!states_equal(&a, &b, &ToleranceConfig::default()));
    }

    #[test]
    fn layer_jaccard_threshold_applies() {
        let mut a = EnvironmentState::initial();
        let mut b = EnvironmentState::initial();
        let ids_a: BTreeSet<String> = (0..10).map(|i| format!("r{i}")).collect();
        let ids_b: BTreeSet<String> = (1..10).map(|i| format!("r{i}")).collect();
        // Jaccard = 9/10 = 0.9.
        for (state, ids) in [(&mut a, ids_a), (&mut b, ids_b)] {
            state.map_state.layers.push(PlotLayer {
                layer_kind: LayerKind::Scatter,
                dataset: "xview1".into(),
                record_ids: ids,
                style: None,
            });
        }
        let mut tol = ToleranceConfig::default();
        tol.set_overlap_threshold = 0.8;
        assert!(states_equal(&a, &b, &tol));
        tol.set_overlap_threshold = 1.0;
        assert!(!states_equal(&a, &b, &tol));
    }

    #[test]
    fn diff_is_empty_iff_exactly_equal() {
        let env = test_env();
        let s = env.initial_state();
        assert!(state_diff(&s, &s).is_empty());

        let mut other = s.clone();
        other.map_state.zoom = 12;
        let diffs = state_diff(&s, &other);
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].path, "map_state.zoom");
        assert_eq!(diffs[0].left, "2");
        assert_eq!(diffs[0].right, "12");

        let mut tabbed = s.clone();
        tabbed.ui_state.open_tabs.push("https://example.org".into());
        let diffs = state_diff(&s, &tabbed);
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].path, "ui_state.open_tabs");
    }

    #[test]
    fn retrieval_tools_record_doc_ids() {
        let env = test_env();
        let call = ToolCall::new("modelzoo_search").with_arg("query", "vessel detector SAR");
        let (next, obs) = env.apply_tool(&env.initial_state(), &call).unwrap();
        assert!(obs.ok);
        assert!(next.session_state.retrieved_docs.contains("model-001"));
        assert!(obs.message.contains("model-001"));
    }

    #[test]
    fn export_requires_configuration() {
        let env = test_env();
        let (loaded, _) = env
            .apply_tool(&env.initial_state(), &ToolCall::new("db_load").with_arg("dataset", "xview1"))
            .unwrap();
        let call = ToolCall::new("export_results").with_arg("path", "out.jsonl");
        let (after, obs) = env.apply_tool(&loaded, &call).unwrap();
        assert!(!obs.ok);
        assert_eq!(fingerprint(&after), fingerprint(&loaded));

        let dir = tempfile::tempdir().unwrap();
        let mut config = EngineConfig::default();
        config.export_dir = Some(dir.path().to_path_buf());
        let env2 = Environment::new(
            Catalog::from_records(synthetic_catalog(50, 42)),
            synthetic_fixtures(),
            config,
        );
        let (loaded2, _) = env2
            .apply_tool(&env2.initial_state(), &ToolCall::new("db_load").with_arg("dataset", "xview1"))
            .unwrap();
        let (_, obs2) = env2.apply_tool(&loaded2, &call).unwrap();
        assert!(obs2.ok, "{}", obs2.message);
        let written = std::fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
        assert_eq!(written.lines().count(), loaded2.session_state.result_set.len());
    }

    #[test]
    fn count_results_reports_without_state_change() {
        let env = test_env();
        let (loaded, _) = env
            .apply_tool(&env.initial_state(), &ToolCall::new("db_load").with_arg("dataset", "fair1m"))
            .unwrap();
        let (after, obs) = env.apply_tool(&loaded, &ToolCall::new("count_results")).unwrap();
        assert_eq!(fingerprint(&after), fingerprint(&loaded));
        assert!(obs.message.contains(&loaded.session_state.result_set.len().to_string()));
    }

    #[test]
    fn filter_permutations_commute_on_result_set() {
        let env = test_env();
        let load = ToolCall::new("db_load").with_arg("dataset", "xview1");
        let f1 = ToolCall::new("filter_date").with_arg("start", "2015-01-01").with_arg("end", "2021-12-31");
        let f2 = ToolCall::new("filter_bbox")
            .with_arg("min_lat", -60).with_arg("min_lon", -130)
            .with_arg("max_lat", 60).with_arg("max_lon", 140);
        let f3 = ToolCall::new("filter_class").with_arg("classes", serde_json::json!(["building", "truck"]));

        let order_a = Trace::new(vec![load.clone(), f1.clone(), f2.clone(), f3.clone()], None);
        let order_b = Trace::new(vec![load.clone(), f3, f1, f2], None);
        let (sa, _) = env.run_trace(&env.initial_state(), &order_a);
        let (sb, _) = env.run_trace(&env.initial_state(), &order_b);
        assert_eq!(sa.session_state.result_set, sb.session_state.result_set);
        assert!(!sa.session_state.result_set.is_empty());
    }
}
