//! Model checks: functional correctness of tool usage against the gold
//! trace, and task success of the final state against the gold state.
//!
//! Correctness and success fail independently: an agent may invoke an
//! unnecessary tool (a `FunctionError`) that leaves the final state intact,
//! so the task still succeeds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ToleranceConfig;
use crate::env::{fingerprint, jaccard, round6, Environment, EnvironmentState, StateFingerprint};
use crate::error::{Error, Result};
use crate::metrics::{rouge_l_recall, EvalKind, TaskRun};
use crate::tools::{number_of, ToolRegistry, Trace};

/// The three intent families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    LoadFilterPlot,
    UiWebNavigation,
    InformationSeeking,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 3] = [
        TaskCategory::LoadFilterPlot,
        TaskCategory::UiWebNavigation,
        TaskCategory::InformationSeeking,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskCategory::LoadFilterPlot => "load_filter_plot",
            TaskCategory::UiWebNavigation => "ui_web_navigation",
            TaskCategory::InformationSeeking => "information_seeking",
        }
    }
}

impl std::str::FromStr for TaskCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskCategory::ALL
            .iter()
            .find(|c| c.name() == s.trim())
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown category {s:?}")))
    }
}

/// One benchmark unit: the prompt, its gold solution, and the fingerprint
/// of the state that solution produces from the canonical initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub category: TaskCategory,
    pub prompt: String,
    pub gold_trace: Trace,
    pub gold_fingerprint: StateFingerprint,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

/// Typed correctness errors, mirroring the model-check failure column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorKind {
    InfeasibleAction,
    FunctionError,
    MissedFunction,
    ArgumentError,
}

impl ErrorKind {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorKind::InfeasibleAction => "InfeasibleAction",
            ErrorKind::FunctionError => "FunctionError",
            ErrorKind::MissedFunction => "MissedFunction",
            ErrorKind::ArgumentError => "ArgumentError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckErrorEntry {
    pub kind: ErrorKind,
    pub detail: String,
}

/// The four success clauses; the task succeeds only when all hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessBreakdown {
    pub reply_ok: bool,
    pub output_ok: bool,
    pub map_ok: bool,
    pub ui_ok: bool,
}

impl SuccessBreakdown {
    pub fn all(&self) -> bool {
        self.reply_ok && self.output_ok && self.map_ok && self.ui_ok
    }
}

/// Per-task checker output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub task_id: String,
    pub errors: Vec<CheckErrorEntry>,
    pub success: bool,
    pub success_breakdown: SuccessBreakdown,
    pub rouge_l: f64,
    pub n_errors: usize,
    pub n_tools: usize,
    pub correctness_rate: f64,
}

fn normalize_string_arg(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn values_match(a: &Value, b: &Value, epsilon: f64) -> bool {
    if let (Ok(na), Ok(nb)) = (number_of(a), number_of(b)) {
        return (na - nb).abs() <= epsilon;
    }
    match (a, b) {
        (Value::String(sa), Value::String(sb)) => {
            normalize_string_arg(sa) == normalize_string_arg(sb)
        }
        (Value::Array(xs), Value::Array(ys)) => {
            let norm = |items: &[Value]| -> BTreeSet<String> {
                items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => normalize_string_arg(s),
                        other => other.to_string(),
                    })
                    .collect()
            };
            norm(xs) == norm(ys)
        }
        _ => a == b,
    }
}

fn arg_mismatches(
    agent: &BTreeMap<String, Value>,
    gold: &BTreeMap<String, Value>,
    epsilon: f64,
) -> Vec<String> {
    let mut offending = Vec::new();
    let keys: BTreeSet<&String> = agent.keys().chain(gold.keys()).collect();
    for key in keys {
        match (agent.get(key), gold.get(key)) {
            (Some(a), Some(g)) if values_match(a, g, epsilon) => {}
            _ => offending.push(key.clone()),
        }
    }
    offending
}

/// Check the agent's tool usage against the gold trace.
///
/// Each agent call is classified in order: an unregistered tool is an
/// `InfeasibleAction`; a tool with no unmatched counterpart left in the gold
/// multiset is a `FunctionError`; otherwise the call greedily matches the
/// first unmatched gold call of the same tool, and any argument deviation
/// (strings after normalization, numbers within epsilon) is an
/// `ArgumentError`. Gold calls left unmatched become `MissedFunction`
/// entries, in gold order.
pub fn check_correctness(
    agent: &Trace,
    gold: &Trace,
    registry: &ToolRegistry,
    tol: &ToleranceConfig,
) -> Vec<CheckErrorEntry> {
    let mut matched = vec![false; gold.calls.len()];
    let mut errors = Vec::new();

    for call in &agent.calls {
        if !registry.contains(&call.tool) {
            errors.push(CheckErrorEntry {
                kind: ErrorKind::InfeasibleAction,
                detail: format!("tool {:?} is not in the tool space", call.tool),
            });
            continue;
        }
        let slot = gold
            .calls
            .iter()
            .enumerate()
            .find(|(i, g)| !matched[*i] && g.tool == call.tool);
        match slot {
            None => errors.push(CheckErrorEntry {
                kind: ErrorKind::FunctionError,
                detail: format!("tool {:?} was not required by the gold solution", call.tool),
            }),
            Some((i, g)) => {
                matched[i] = true;
                let offending = arg_mismatches(&call.args, &g.args, tol.numeric_epsilon);
                if !offending.is_empty() {
                    errors.push(CheckErrorEntry {
                        kind: ErrorKind::ArgumentError,
                        detail: format!("{}: args differ: {}", call.tool, offending.join(", ")),
                    });
                }
            }
        }
    }

    for (i, was_matched) in matched.iter().enumerate() {
        if !was_matched {
            errors.push(CheckErrorEntry {
                kind: ErrorKind::MissedFunction,
                detail: format!("gold tool {:?} missing from the agent solution", gold.calls[i].tool),
            });
        }
    }
    errors
}

fn lists_match(a: &[String], b: &[String], threshold: f64) -> bool {
    if threshold >= 1.0 {
        a == b
    } else {
        let sa: BTreeSet<String> = a.iter().cloned().collect();
        let sb: BTreeSet<String> = b.iter().cloned().collect();
        jaccard(&sa, &sb) >= threshold
    }
}

/// The four success clauses between an agent's final state and the gold
/// final state.
pub fn success_breakdown(
    agent: &EnvironmentState,
    gold: &EnvironmentState,
    tol: &ToleranceConfig,
) -> SuccessBreakdown {
    let th = tol.set_overlap_threshold;

    let gold_reply = gold.reply.as_deref().unwrap_or("");
    let reply_ok = if gold_reply.trim().is_empty() {
        true
    } else {
        rouge_l_recall(agent.reply.as_deref().unwrap_or(""), gold_reply) > tol.rouge_threshold
    };

    let output_ok = {
        let sets = jaccard(&agent.session_state.result_set, &gold.session_state.result_set) >= th;
        let layers = agent.map_state.layers.len() == gold.map_state.layers.len()
            && agent
                .map_state
                .layers
                .iter()
                .zip(&gold.map_state.layers)
                .all(|(a, g)| jaccard(&a.record_ids, &g.record_ids) >= th);
        sets && layers
    };

    let map_ok = {
        let lat_ok = (round6(agent.map_state.center_lat) - round6(gold.map_state.center_lat)).abs()
            <= tol.coord_epsilon;
        let lon_ok = (round6(agent.map_state.center_lon) - round6(gold.map_state.center_lon)).abs()
            <= tol.coord_epsilon;
        let kinds_a: Vec<_> = agent.map_state.layers.iter().map(|l| l.layer_kind).collect();
        let kinds_g: Vec<_> = gold.map_state.layers.iter().map(|l| l.layer_kind).collect();
        lat_ok && lon_ok && agent.map_state.zoom == gold.map_state.zoom && kinds_a == kinds_g
    };

    let ui_ok = lists_match(&agent.ui_state.open_tabs, &gold.ui_state.open_tabs, th)
        && lists_match(&agent.ui_state.displayed_images, &gold.ui_state.displayed_images, th);

    SuccessBreakdown { reply_ok, output_ok, map_ok, ui_ok }
}

/// Replay the gold trace and compare the agent's final state against it.
pub fn check_success(
    agent_final: &EnvironmentState,
    task: &Task,
    env: &Environment,
    tol: &ToleranceConfig,
) -> SuccessBreakdown {
    let (gold_final, _) = env.run_trace(&env.initial_state(), &task.gold_trace);
    success_breakdown(agent_final, &gold_final, tol)
}

/// Everything [`check_task`] computes, plus both final states for callers
/// that derive output-set metrics.
#[derive(Debug, Clone)]
pub struct TaskEvaluation {
    pub report: CheckReport,
    pub agent_final: EnvironmentState,
    pub gold_final: EnvironmentState,
}

fn correctness_rate(n_errors: usize, n_tools: usize) -> f64 {
    if n_tools == 0 {
        return if n_errors == 0 { 1.0 } else { 0.0 };
    }
    (1.0 - n_errors as f64 / n_tools as f64).max(0.0)
}

/// Run the agent trace from the canonical initial state, apply both checks,
/// and assemble the report. A gold trace that no longer reproduces its
/// recorded fingerprint marks the task as a benchmark defect.
pub fn evaluate_task(
    task: &Task,
    agent: &Trace,
    env: &Environment,
    registry: &ToolRegistry,
    tol: &ToleranceConfig,
) -> Result<TaskEvaluation> {
    let (gold_final, _) = env.run_trace(&env.initial_state(), &task.gold_trace);
    let replayed = fingerprint(&gold_final);
    if replayed != task.gold_fingerprint {
        return Err(Error::InvalidTask {
            task_id: task.id.clone(),
            detail: format!(
                "gold trace replays to {replayed}, benchmark records {}",
                task.gold_fingerprint
            ),
        });
    }

    let (agent_final, _) = env.run_trace(&env.initial_state(), agent);
    let errors = check_correctness(agent, &task.gold_trace, registry, tol);
    let breakdown = success_breakdown(&agent_final, &gold_final, tol);
    let rouge_l = rouge_l_recall(
        agent_final.reply.as_deref().unwrap_or(""),
        gold_final.reply.as_deref().unwrap_or(""),
    );

    let n_errors = errors.len();
    let n_tools = task.gold_trace.calls.len();
    let report = CheckReport {
        task_id: task.id.clone(),
        success: breakdown.all(),
        success_breakdown: breakdown,
        rouge_l,
        n_errors,
        n_tools,
        correctness_rate: correctness_rate(n_errors, n_tools),
        errors,
    };
    Ok(TaskEvaluation { report, agent_final, gold_final })
}

/// [`evaluate_task`] reduced to its report.
pub fn check_task(
    task: &Task,
    agent: &Trace,
    env: &Environment,
    registry: &ToolRegistry,
    tol: &ToleranceConfig,
) -> Result<CheckReport> {
    evaluate_task(task, agent, env, registry, tol).map(|e| e.report)
}

/// Which output metric the task feeds: explicit `meta.eval_kind` wins, else
/// inferred from the gold trace's filter tools.
pub fn eval_kind(task: &Task) -> EvalKind {
    if let Some(kind) = task.meta.get("eval_kind").and_then(Value::as_str) {
        return match kind {
            "detection" => EvalKind::Detection,
            "lcc" => EvalKind::Lcc,
            _ => EvalKind::None,
        };
    }
    if task.gold_trace.calls.iter().any(|c| c.tool == "filter_lccclass") {
        return EvalKind::Lcc;
    }
    if task.gold_trace.calls.iter().any(|c| c.tool == "filter_class") {
        return EvalKind::Detection;
    }
    EvalKind::None
}

/// Output id set for F1-style metrics: record ids by default, detection
/// instance ids when `meta.det_scope == "detections"`.
pub fn output_ids(env: &Environment, state: &EnvironmentState, task: &Task) -> BTreeSet<String> {
    let detections = task
        .meta
        .get("det_scope")
        .and_then(Value::as_str)
        .map(|s| s == "detections")
        .unwrap_or(false);
    if !detections {
        return state.session_state.result_set.clone();
    }
    state
        .session_state
        .result_set
        .iter()
        .filter_map(|id| env.catalog().record(id))
        .flat_map(|r| r.detections.iter().map(|d| d.det_id.clone()))
        .collect()
}

/// Assemble the aggregation artifact for one evaluated task.
pub fn build_task_run(
    task: &Task,
    trace: Trace,
    evaluation: &TaskEvaluation,
    env: &Environment,
) -> TaskRun {
    TaskRun {
        task_id: task.id.clone(),
        trace,
        report: evaluation.report.clone(),
        eval_kind: eval_kind(task),
        agent_output_ids: output_ids(env, &evaluation.agent_final, task),
        gold_output_ids: output_ids(env, &evaluation.gold_final, task),
    }
}
