//! Tool registry, call schemas, JSON wire parsing, and validation.
//!
//! The wire format for a tool call is `{"tool": string, "args": object}`,
//! UTF-8 JSON, no extra top-level fields. Args serialize key-sorted, so
//! `serialize(parse(s))` is the canonical form of any valid input `s`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::parse_timestamp;
use crate::error::{Error, Result};

/// Tool families; the registry always carries at least one tool per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolCategory {
    Database,
    Map,
    Ui,
    Web,
    Knowledge,
    Data,
    Answer,
}

/// Argument value kinds understood by the schema validator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgKind {
    String,
    Number,
    Date,
    Coord,
    StringList,
}

/// One argument slot in a tool schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    pub kind: ArgKind,
    pub required: bool,
}

impl ArgSpec {
    pub fn new(name: &str, kind: ArgKind, required: bool) -> Self {
        Self { name: name.into(), kind, required }
    }
}

/// Keys the deterministic transition rule the environment applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticsId {
    DbLoad,
    FilterCoords,
    FilterBbox,
    FilterDate,
    FilterClass,
    FilterLcc,
    CountResults,
    ScatterPlot,
    HeatmapPlot,
    ZoomMap,
    PanMap,
    DisplayImages,
    DisplayHover,
    OpenUrl,
    WebSearch,
    ArxivSearch,
    DocsRag,
    ModelzooSearch,
    WikiRag,
    AnswerTools,
    ExportResults,
}

/// A registered tool: name, family, argument schema, and semantics key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub category: ToolCategory,
    pub args: Vec<ArgSpec>,
    pub doc: String,
    pub semantics_id: SemanticsId,
}

/// One agent action: a tool name plus named arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub args: BTreeMap<String, Value>,
}

impl ToolCall {
    pub fn new(tool: &str) -> Self {
        Self { tool: tool.into(), args: BTreeMap::new() }
    }

    pub fn with_arg(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.args.insert(name.into(), value.into());
        self
    }

    /// Canonical wire form: compact JSON with key-sorted args.
    pub fn to_wire(&self) -> String {
        serde_json::to_string(self).expect("tool call serializes")
    }
}

/// An ordered tool-call sequence plus the final textual reply. Gold traces
/// always carry a reply (possibly empty for purely state-changing tasks).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_tokens: Option<u64>,
}

impl Trace {
    pub fn new(calls: Vec<ToolCall>, reply: Option<String>) -> Self {
        Self { calls, reply, transcript_tokens: None }
    }
}

/// Outcome of schema validation. Failures are values, not errors: the
/// checker turns them into typed report entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidationResult {
    Ok,
    /// The tool does not exist in the registry.
    InfeasibleAction { tool: String },
    /// The tool exists but one or more args violate its schema.
    ArgSchemaViolation { violations: Vec<ArgViolation> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgViolation {
    pub arg: String,
    pub reason: String,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationResult::Ok)
    }
}

/// Immutable after construction; safe for concurrent readers.
#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, ToolSpec>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: ToolSpec) -> Result<()> {
        if self.tools.contains_key(&spec.name) {
            return Err(Error::Config(format!("tool {:?} already registered", spec.name)));
        }
        self.tools.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Name-sorted iteration.
    pub fn iter(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values()
    }

    /// Schema-check a call: the tool must exist, required args must be
    /// present, no unknown args, and every value must coerce to its kind.
    pub fn validate_call(&self, call: &ToolCall) -> ValidationResult {
        let Some(spec) = self.get(&call.tool) else {
            return ValidationResult::InfeasibleAction { tool: call.tool.clone() };
        };
        let mut violations = Vec::new();
        for arg in &spec.args {
            match call.args.get(&arg.name) {
                None if arg.required => violations.push(ArgViolation {
                    arg: arg.name.clone(),
                    reason: "missing required arg".into(),
                }),
                None => {}
                Some(value) => {
                    if let Err(reason) = coerce_kind(value, arg.kind) {
                        violations.push(ArgViolation { arg: arg.name.clone(), reason });
                    }
                }
            }
        }
        for name in call.args.keys() {
            if !spec.args.iter().any(|a| &a.name == name) {
                violations.push(ArgViolation { arg: name.clone(), reason: "unknown arg".into() });
            }
        }
        if violations.is_empty() {
            ValidationResult::Ok
        } else {
            ValidationResult::ArgSchemaViolation { violations }
        }
    }
}

/// Check a JSON value against an [`ArgKind`], with mild coercions: numeric
/// strings count as numbers and a bare string counts as a one-element list.
pub fn coerce_kind(value: &Value, kind: ArgKind) -> std::result::Result<(), String> {
    match kind {
        ArgKind::String => value
            .as_str()
            .map(|_| ())
            .ok_or_else(|| "expected string".into()),
        ArgKind::Number => number_of(value).map(|_| ()),
        ArgKind::Date => {
            let s = value.as_str().ok_or_else(|| "expected date string".to_string())?;
            parse_timestamp(s).map(|_| ()).ok_or_else(|| format!("not an ISO-8601 date: {s:?}"))
        }
        ArgKind::Coord => {
            let arr = value.as_array().ok_or_else(|| "expected [lat, lon] pair".to_string())?;
            if arr.len() != 2 {
                return Err("expected exactly two elements".into());
            }
            let lat = number_of(&arr[0])?;
            let lon = number_of(&arr[1])?;
            if !(-90.0..=90.0).contains(&lat) {
                return Err("lat out of range".into());
            }
            if !(-180.0..=180.0).contains(&lon) {
                return Err("lon out of range".into());
            }
            Ok(())
        }
        ArgKind::StringList => match value {
            Value::String(_) => Ok(()),
            Value::Array(items) => {
                if items.iter().all(|v| v.is_string()) {
                    Ok(())
                } else {
                    Err("expected list of strings".into())
                }
            }
            _ => Err("expected list of strings".into()),
        },
    }
}

/// Extract an f64 from a JSON number or a numeric string.
pub fn number_of(value: &Value) -> std::result::Result<f64, String> {
    match value {
        Value::Number(n) => n.as_f64().ok_or_else(|| "non-finite number".into()),
        Value::String(s) => s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}")),
        _ => Err("expected number".into()),
    }
}

/// Extract a string list, treating a bare string as a singleton.
pub fn string_list_of(value: &Value) -> Vec<String> {
    match value {
        Value::String(s) => vec![s.clone()],
        Value::Array(items) => items
            .iter()
            .filter_map(|v| v.as_str().map(|s| s.to_string()))
            .collect(),
        _ => Vec::new(),
    }
}

/// Parse the wire form `{"tool": ..., "args": {...}}`. Malformed JSON is a
/// [`Error::Parse`]; well-formed JSON with the wrong shape (missing keys,
/// extra keys, wrong types) is a [`Error::Schema`].
pub fn parse_tool_call(text: &str) -> Result<ToolCall> {
    let value: Value =
        serde_json::from_str(text.trim()).map_err(|e| Error::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Schema("tool call must be a JSON object".into()))?;
    for key in obj.keys() {
        if key != "tool" && key != "args" {
            return Err(Error::Schema(format!("unexpected field {key:?}")));
        }
    }
    let tool = obj
        .get("tool")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Schema("missing \"tool\" key".into()))?;
    let args = obj
        .get("args")
        .ok_or_else(|| Error::Schema("missing \"args\" key (may be an empty object)".into()))?
        .as_object()
        .ok_or_else(|| Error::Schema("\"args\" must be an object".into()))?;
    Ok(ToolCall {
        tool: tool.to_string(),
        args: args.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
    })
}

/// Register the canonical simulated suite, one tool per semantic family.
pub fn register_builtin_tools() -> Result<ToolRegistry> {
    use ArgKind::*;
    use SemanticsId::*;
    use ToolCategory::*;

    let mut registry = ToolRegistry::new();
    let specs = vec![
        tool("db_load", Database, DbLoad, "Load a dataset's records into the session result set.",
            vec![ArgSpec::new("dataset", String, true)]),
        tool("filter_coords", Database, FilterCoords, "Keep results within a great-circle radius of a place or point.",
            vec![
                ArgSpec::new("place", String, false),
                ArgSpec::new("lat", Number, false),
                ArgSpec::new("lon", Number, false),
                ArgSpec::new("radius_km", Number, false),
            ]),
        tool("filter_bbox", Database, FilterBbox, "Keep results inside a latitude/longitude bounding box.",
            vec![
                ArgSpec::new("min_lat", Number, true),
                ArgSpec::new("min_lon", Number, true),
                ArgSpec::new("max_lat", Number, true),
                ArgSpec::new("max_lon", Number, true),
            ]),
        tool("filter_date", Database, FilterDate, "Keep results whose timestamp falls in an inclusive date range.",
            vec![ArgSpec::new("start", Date, true), ArgSpec::new("end", Date, true)]),
        tool("filter_class", Database, FilterClass, "Keep results whose detection classes intersect the given list.",
            vec![ArgSpec::new("classes", StringList, true)]),
        tool("filter_lccclass", Database, FilterLcc, "Keep results whose land-cover labels intersect the given list.",
            vec![ArgSpec::new("classes", StringList, true)]),
        tool("count_results", Data, CountResults, "Report the current result-set size.", vec![]),
        tool("scatter_plot", Map, ScatterPlot, "Plot the current result set as a scatter layer on the map.",
            vec![ArgSpec::new("label", String, false)]),
        tool("heatmap_plot", Map, HeatmapPlot, "Plot the current result set as a heatmap (or change-detection) layer.",
            vec![ArgSpec::new("mode", String, false)]),
        tool("zoom_map", Map, ZoomMap, "Center the map on a place or point and set the zoom level.",
            vec![
                ArgSpec::new("location", String, false),
                ArgSpec::new("lat", Number, false),
                ArgSpec::new("lon", Number, false),
                ArgSpec::new("zoom", Number, false),
            ]),
        tool("pan_map", Map, PanMap, "Move the map center without changing zoom.",
            vec![
                ArgSpec::new("location", String, false),
                ArgSpec::new("lat", Number, false),
                ArgSpec::new("lon", Number, false),
            ]),
        tool("display_images", Ui, DisplayImages, "Show the given record images in the viewer.",
            vec![ArgSpec::new("ids", StringList, true)]),
        tool("display_hover", Ui, DisplayHover, "Hover-highlight one displayed record.",
            vec![ArgSpec::new("id", String, true)]),
        tool("open_url", Web, OpenUrl, "Open a URL in a new tab.",
            vec![ArgSpec::new("url", String, true)]),
        tool("web_search", Web, WebSearch, "Search the web corpus; returns the top matching URLs.",
            vec![ArgSpec::new("query", String, true)]),
        tool("arxiv_search", Knowledge, ArxivSearch, "Retrieve matching arXiv abstracts.",
            vec![ArgSpec::new("query", String, true)]),
        tool("docs_RAG", Knowledge, DocsRag, "Retrieve matching passages from the document corpus.",
            vec![ArgSpec::new("query", String, true)]),
        tool("modelzoo_search", Knowledge, ModelzooSearch, "Retrieve matching model cards from the model wiki.",
            vec![ArgSpec::new("query", String, true)]),
        tool("wiki_RAG", Knowledge, WikiRag, "Retrieve matching wiki articles.",
            vec![ArgSpec::new("query", String, true)]),
        tool("answer_tools", Answer, AnswerTools, "Record the final textual reply to the user.",
            vec![ArgSpec::new("text", String, true)]),
        tool("export_results", Data, ExportResults, "Write the current result ids to a JSONL file.",
            vec![ArgSpec::new("path", String, true)]),
    ];
    for spec in specs {
        registry.register(spec)?;
    }
    Ok(registry)
}

fn tool(name: &str, category: ToolCategory, semantics_id: SemanticsId, doc: &str, args: Vec<ArgSpec>) -> ToolSpec {
    ToolSpec { name: name.into(), category, args, doc: doc.into(), semantics_id }
}

/// Deterministic, name-sorted tool catalog with one JSON call template per
/// tool. Every template line parses back through [`parse_tool_call`].
pub fn render_tool_docs(registry: &ToolRegistry) -> String {
    let mut out = String::new();
    for spec in registry.iter() {
        out.push_str(&format!("### {} ({})\n", spec.name, category_name(spec.category)));
        out.push_str(&spec.doc);
        out.push('\n');
        if spec.args.is_empty() {
            out.push_str("args: none\n");
        } else {
            let rendered: Vec<String> = spec
                .args
                .iter()
                .map(|a| {
                    format!(
                        "{} ({}{})",
                        a.name,
                        kind_name(a.kind),
                        if a.required { ", required" } else { "" }
                    )
                })
                .collect();
            out.push_str(&format!("args: {}\n", rendered.join(", ")));
        }
        let template = ToolCall {
            tool: spec.name.clone(),
            args: spec.args.iter().map(|a| (a.name.clone(), example_value(&spec.name, a))).collect(),
        };
        out.push_str(&format!("template: {}\n\n", template.to_wire()));
    }
    out
}

fn category_name(category: ToolCategory) -> &'static str {
    match category {
        ToolCategory::Database => "database",
        ToolCategory::Map => "map",
        ToolCategory::Ui => "ui",
        ToolCategory::Web => "web",
        ToolCategory::Knowledge => "knowledge",
        ToolCategory::Data => "data",
        ToolCategory::Answer => "answer",
    }
}

fn kind_name(kind: ArgKind) -> &'static str {
    match kind {
        ArgKind::String => "string",
        ArgKind::Number => "number",
        ArgKind::Date => "date",
        ArgKind::Coord => "coord",
        ArgKind::StringList => "string_list",
    }
}

fn example_value(tool: &str, arg: &ArgSpec) -> Value {
    match (tool, arg.name.as_str()) {
        (_, "dataset") => "xview1".into(),
        (_, "place") | (_, "location") => "Seattle, WA".into(),
        (_, "radius_km") => 50.into(),
        (_, "zoom") => 10.into(),
        (_, "lat") => 47.6062.into(),
        (_, "lon") => (-122.3321).into(),
        (_, "min_lat") => 40.0.into(),
        (_, "min_lon") => (-125.0).into(),
        (_, "max_lat") => 49.0.into(),
        (_, "max_lon") => (-110.0).into(),
        (_, "url") => "https://example.org/eo/open-datasets".into(),
        (_, "query") => "vessel detection on SAR imagery".into(),
        (_, "text") => "The requested images are now plotted.".into(),
        (_, "path") => "results.jsonl".into(),
        (_, "id") => "xview1-000001".into(),
        (_, "ids") => serde_json::json!(["xview1-000001", "xview1-000002"]),
        (_, "classes") => serde_json::json!(["truck", "small-car"]),
        (_, "mode") => "density".into(),
        (_, "label") => "results".into(),
        _ => match arg.kind {
            ArgKind::String => "value".into(),
            ArgKind::Number => 0.into(),
            ArgKind::Date => "2021-01-01".into(),
            ArgKind::Coord => serde_json::json!([0.0, 0.0]),
            ArgKind::StringList => serde_json::json!(["value"]),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry_contents() {
        let registry = register_builtin_tools().unwrap();
        assert!(registry.len() >= 20, "got {}", registry.len());
        for name in ["zoom_map", "db_load", "docs_RAG", "modelzoo_search", "answer_tools"] {
            assert!(registry.contains(name), "missing {name}");
        }
        // At least one tool per category.
        use std::collections::BTreeSet;
        let cats: BTreeSet<_> = registry.iter().map(|t| t.category).collect();
        assert_eq!(cats.len(), 7);
    }

    #[test]
    fn duplicate_registration_errors() {
        let mut registry = register_builtin_tools().unwrap();
        let dup = registry.get("db_load").unwrap().clone();
        assert!(registry.register(dup).is_err());
    }

    #[test]
    fn parse_happy_path() {
        let call = parse_tool_call(r#"{"tool":"zoom_map","args":{"location":"Seattle, WA"}}"#).unwrap();
        assert_eq!(call.tool, "zoom_map");
        assert_eq!(call.args["location"], Value::from("Seattle, WA"));
    }

    #[test]
    fn parse_rejects_missing_args_and_extras() {
        assert!(matches!(parse_tool_call(r#"{"tool":"x"}"#), Err(Error::Schema(_))));
        assert!(matches!(
            parse_tool_call(r#"{"tool":"x","args":{},"notes":1}"#),
            Err(Error::Schema(_))
        ));
        assert!(matches!(parse_tool_call("{nope"), Err(Error::Parse(_))));
    }

    #[test]
    fn roundtrip_is_canonical() {
        let messy = r#" {"args": {"zoom": 11, "location": "Vienna"}, "tool": "zoom_map"} "#;
        let canonical = parse_tool_call(messy).unwrap().to_wire();
        let again = parse_tool_call(&canonical).unwrap().to_wire();
        assert_eq!(canonical, again);
        assert_eq!(canonical, r#"{"tool":"zoom_map","args":{"location":"Vienna","zoom":11}}"#);
    }

    #[test]
    fn validate_unknown_tool_is_infeasible() {
        let registry = register_builtin_tools().unwrap();
        let result = registry.validate_call(&ToolCall::new("teleport"));
        assert_eq!(result, ValidationResult::InfeasibleAction { tool: "teleport".into() });
    }

    #[test]
    fn validate_flags_bad_date() {
        let registry = register_builtin_tools().unwrap();
        let call = ToolCall::new("filter_date")
            .with_arg("start", "2021-13-01")
            .with_arg("end", "2021-11-30");
        match registry.validate_call(&call) {
            ValidationResult::ArgSchemaViolation { violations } => {
                assert_eq!(violations.len(), 1);
                assert_eq!(violations[0].arg, "start");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_flags_missing_required_and_unknown_args() {
        let registry = register_builtin_tools().unwrap();
        let call = ToolCall::new("db_load").with_arg("dateset", "xview1");
        match registry.validate_call(&call) {
            ValidationResult::ArgSchemaViolation { violations } => {
                let args: Vec<&str> = violations.iter().map(|v| v.arg.as_str()).collect();
                assert_eq!(args, vec!["dataset", "dateset"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_valid_call_passes() {
        let registry = register_builtin_tools().unwrap();
        let call = ToolCall::new("filter_coords")
            .with_arg("place", "Madrid")
            .with_arg("radius_km", 100);
        assert!(registry.validate_call(&call).is_ok());
    }

    #[test]
    fn docs_are_stable_sorted_and_roundtrip() {
        let registry = register_builtin_tools().unwrap();
        let docs1 = render_tool_docs(&registry);
        let docs2 = render_tool_docs(&registry);
        assert_eq!(docs1, docs2);

        let names: Vec<&str> = docs1
            .lines()
            .filter(|l| l.starts_with("### "))
            .map(|l| l.trim_start_matches("### ").split_whitespace().next().unwrap())
            .collect();
        assert_eq!(names.len(), registry.len());
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);

        for line in docs1.lines().filter(|l| l.starts_with("template: ")) {
            let json = line.trim_start_matches("template: ");
            let call = parse_tool_call(json).unwrap();
            assert!(registry.validate_call(&call).is_ok(), "template fails own schema: {json}");
        }
    }
}
