//! Aggregate evaluation metrics: success rate, mean correctness, ROUGE-L
//! recall, set-based detection F1 and LCC recall, token accounting, and
//! per-category / per-complexity breakdowns.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::checker::{CheckReport, Task};
use crate::error::{Error, Result};
use crate::tools::Trace;

/// Lowercase tokens split on non-alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Longest-common-subsequence length, two-row dynamic program.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            curr[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L recall: `LCS(candidate, reference) / |reference|`, with an empty
/// reference defined as 1.0. No stemming, no stopword removal.
pub fn rouge_l_recall(candidate: &str, reference: &str) -> f64 {
    let ref_tokens = tokenize(reference);
    if ref_tokens.is_empty() {
        return 1.0;
    }
    let cand_tokens = tokenize(candidate);
    lcs_len(&cand_tokens, &ref_tokens) as f64 / ref_tokens.len() as f64
}

/// Fraction of successful reports. Undefined on empty input.
pub fn success_rate(reports: &[CheckReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::UndefinedMetric("success_rate over zero reports".into()));
    }
    let successes = reports.iter().filter(|r| r.success).count();
    Ok(successes as f64 / reports.len() as f64)
}

/// Precision / recall / F1 over id sets. An empty side yields zeros.
pub fn set_f1(retrieved: &BTreeSet<String>, gold: &BTreeSet<String>) -> (f64, f64, f64) {
    if retrieved.is_empty() || gold.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let hit = retrieved.intersection(gold).count() as f64;
    let precision = hit / retrieved.len() as f64;
    let recall = hit / gold.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Which set-based quality metric a task contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Detection,
    Lcc,
    #[default]
    None,
}

/// Per-task evaluation artifact: the agent trace, its check report, and the
/// output id sets feeding detection-F1 / LCC-recall aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRun {
    pub task_id: String,
    pub trace: Trace,
    pub report: CheckReport,
    #[serde(default)]
    pub eval_kind: EvalKind,
    #[serde(default)]
    pub agent_output_ids: BTreeSet<String>,
    #[serde(default)]
    pub gold_output_ids: BTreeSet<String>,
}

/// Complexity bins over gold-call counts, given as ascending lower edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityBins {
    pub edges: Vec<u32>,
}

impl Default for ComplexityBins {
    fn default() -> Self {
        Self { edges: vec![1, 2, 4, 6, 8] }
    }
}

impl ComplexityBins {
    pub fn new(edges: Vec<u32>) -> Self {
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        if edges.is_empty() {
            return Self::default();
        }
        Self { edges }
    }

    /// Label for the bin holding `n` gold calls. Counts below the first
    /// edge clamp into the first bin.
    pub fn label_for(&self, n: usize) -> String {
        let n = n as u32;
        let idx = match self.edges.iter().rposition(|&lo| lo <= n) {
            Some(i) => i,
            None => 0,
        };
        self.label_at(idx)
    }

    fn label_at(&self, idx: usize) -> String {
        let lo = self.edges[idx];
        match self.edges.get(idx + 1) {
            None => format!("{lo}+"),
            Some(&next) if next == lo + 1 => format!("{lo}"),
            Some(&next) => format!("{lo}-{}", next - 1),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.edges.len()).map(|i| self.label_at(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub tasks: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub tasks: usize,
    pub success_rate: f64,
    pub mean_correctness_rate: f64,
    pub mean_rouge_l: f64,
}

/// Benchmark-level aggregate over one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub tasks: usize,
    /// Tasks that never produced a report (execution failures); excluded
    /// from every rate below.
    pub failed_tasks: usize,
    pub success_rate: f64,
    pub mean_correctness_rate: f64,
    pub mean_rouge_l: f64,
    /// Mean per-task F1 over detection-bearing tasks; absent when none ran.
    pub det_f1: Option<f64>,
    /// Mean per-task recall over LCC-bearing tasks; absent when none ran.
    pub lcc_recall: Option<f64>,
    pub avg_tokens_per_task: f64,
    pub per_category: BTreeMap<String, CategorySummary>,
    pub per_complexity_bin: BTreeMap<String, BinSummary>,
    pub error_histogram: BTreeMap<String, usize>,
}

/// Whitespace token count used when an endpoint reports no usage.
pub fn fallback_token_count(trace: &Trace) -> u64 {
    let mut text = String::new();
    for call in &trace.calls {
        text.push_str(&call.to_wire());
        text.push(' ');
    }
    if let Some(reply) = &trace.reply {
        text.push_str(reply);
    }
    text.split_whitespace().count() as u64
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// Aggregate runs against their tasks. Every run must reference a known
/// task, no task may be reported twice; tasks without a run count as failed.
pub fn aggregate(tasks: &[Task], runs: &[TaskRun], bins: &ComplexityBins) -> Result<MetricsSummary> {
    let task_index: BTreeMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for run in runs {
        if !task_index.contains_key(run.task_id.as_str()) {
            return Err(Error::Aggregation(format!("run references unknown task {:?}", run.task_id)));
        }
        if !seen.insert(run.task_id.as_str()) {
            return Err(Error::Aggregation(format!("duplicate run for task {:?}", run.task_id)));
        }
    }
    if runs.is_empty() {
        return Err(Error::UndefinedMetric("aggregate over zero runs".into()));
    }

    let reports: Vec<&CheckReport> = runs.iter().map(|r| &r.report).collect();
    let overall_success =
        reports.iter().filter(|r| r.success).count() as f64 / reports.len() as f64;
    let mean_correctness = mean(reports.iter().map(|r| r.correctness_rate)).unwrap_or(0.0);
    let mean_rouge = mean(reports.iter().map(|r| r.rouge_l)).unwrap_or(0.0);

    let det_f1 = mean(
        runs.iter()
            .filter(|r| r.eval_kind == EvalKind::Detection)
            .map(|r| set_f1(&r.agent_output_ids, &r.gold_output_ids).2),
    );
    let lcc_recall = mean(
        runs.iter()
            .filter(|r| r.eval_kind == EvalKind::Lcc)
            .map(|r| set_f1(&r.agent_output_ids, &r.gold_output_ids).1),
    );

    let avg_tokens = mean(runs.iter().map(|r| {
        r.trace.transcript_tokens.unwrap_or_else(|| fallback_token_count(&r.trace)) as f64
    }))
    .unwrap_or(0.0);

    let mut per_category: BTreeMap<String, Vec<&TaskRun>> = BTreeMap::new();
    for run in runs {
        let task = task_index[run.task_id.as_str()];
        per_category.entry(task.category.name().to_string()).or_default().push(run);
    }
    let per_category = per_category
        .into_iter()
        .map(|(cat, cat_runs)| {
            let summary = CategorySummary {
                tasks: cat_runs.len(),
                success_rate: cat_runs.iter().filter(|r| r.report.success).count() as f64
                    / cat_runs.len() as f64,
                mean_correctness_rate: mean(cat_runs.iter().map(|r| r.report.correctness_rate))
                    .unwrap_or(0.0),
                mean_rouge_l: mean(cat_runs.iter().map(|r| r.report.rouge_l)).unwrap_or(0.0),
            };
            (cat, summary)
        })
        .collect();

    let mut per_bin: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for run in runs {
        let entry = per_bin.entry(bins.label_for(run.report.n_tools)).or_insert((0, 0));
        entry.0 += 1;
        if run.report.success {
            entry.1 += 1;
        }
    }
    let per_complexity_bin = per_bin
        .into_iter()
        .map(|(label, (total, ok))| {
            (label, BinSummary { tasks: total, success_rate: ok as f64 / total as f64 })
        })
        .collect();

    let mut error_histogram: BTreeMap<String, usize> = BTreeMap::new();
    for report in &reports {
        for err in &report.errors {
            *error_histogram.entry(err.kind.name().to_string()).or_insert(0) += 1;
        }
    }

    Ok(MetricsSummary {
        tasks: tasks.len(),
        failed_tasks: tasks.len().saturating_sub(runs.len()),
        success_rate: overall_success,
        mean_correctness_rate: mean_correctness,
        mean_rouge_l: mean_rouge,
        det_f1,
        lcc_recall,
        avg_tokens_per_task: avg_tokens,
        per_category,
        per_complexity_bin,
        error_histogram,
    })
}

/// "77.35%"-style percent cell.
pub fn format_pct(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

fn format_opt_pct(fraction: Option<f64>) -> String {
    fraction.map(format_pct).unwrap_or_else(|| "-".into())
}

fn format_tokens(tokens: f64) -> String {
    if tokens >= 1000.0 {
        format!("{:.1}k", tokens / 1000.0)
    } else {
        format!("{tokens:.0}")
    }
}

/// Render the headline results table as markdown.
pub fn render_markdown(summary: &MetricsSummary, label: &str) -> String {
    let mut out = String::new();
    out.push_str("| Method | Correctness Rate | Success Rate | Obj. Det F1 | LCC R | VQA Rouge-L | Avg. Tokens / Task |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    out.push_str(&format!(
        "| {label} | {} | {} | {} | {} | {} | {} |\n",
        format_pct(summary.mean_correctness_rate),
        format_pct(summary.success_rate),
        format_opt_pct(summary.det_f1),
        format_opt_pct(summary.lcc_recall),
        format_pct(summary.mean_rouge_l),
        format_tokens(summary.avg_tokens_per_task),
    ));
    out.push('\n');
    out.push_str("| Complexity bin | Tasks | Success Rate |\n|---|---|---|\n");
    for (bin, s) in &summary.per_complexity_bin {
        out.push_str(&format!("| {bin} | {} | {} |\n", s.tasks, format_pct(s.success_rate)));
    }
    out.push('\n');
    out.push_str("| Error kind | Count |\n|---|---|\n");
    for (kind, count) in &summary.error_histogram {
        out.push_str(&format!("| {kind} | {count} |\n"));
    }
    out
}

/// CSV of per-bin success rates for plotting.
pub fn render_bins_csv(summary: &MetricsSummary) -> String {
    let mut out = String::from("bin,tasks,success_rate\n");
    for (bin, s) in &summary.per_complexity_bin {
        out.push_str(&format!("{bin},{},{:.6}\n", s.tasks, s.success_rate));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rouge_identity_and_disjoint() {
        assert_eq!(rouge_l_recall("some reply text", "some reply text"), 1.0);
        assert_eq!(rouge_l_recall("alpha beta", "gamma delta"), 0.0);
        assert_eq!(rouge_l_recall("anything", ""), 1.0);
        assert_eq!(rouge_l_recall("", "reference words"), 0.0);
    }

    #[test]
    fn rouge_hand_case() {
        assert_eq!(rouge_l_recall("the cat sat", "the cat sat on the mat"), 0.5);
    }

    #[test]
    fn rouge_symmetric_lcs_property() {
        let a = "ships near the port of rotterdam";
        let b = "the port was busy with ships";
        let ta = tokenize(a).len() as f64;
        let tb = tokenize(b).len() as f64;
        let ab = rouge_l_recall(a, b) * tb;
        let ba = rouge_l_recall(b, a) * ta;
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn tokenizer_splits_on_non_alphanumerics() {
        assert_eq!(tokenize("Hello, world!  x2"), vec!["hello", "world", "x2"]);
        assert!(tokenize("--- ***").is_empty());
    }

    #[test]
    fn f1_cases() {
        let set = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(set_f1(&set(&["a", "b"]), &set(&["a", "b"])), (1.0, 1.0, 1.0));
        assert_eq!(set_f1(&set(&["a", "b"]), &set(&["b", "c"])), (0.5, 0.5, 0.5));
        assert_eq!(set_f1(&set(&[]), &set(&["a"])), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bins_label_and_clamp() {
        let bins = ComplexityBins::default();
        assert_eq!(bins.label_for(1), "1");
        assert_eq!(bins.label_for(0), "1");
        assert_eq!(bins.label_for(2), "2-3");
        assert_eq!(bins.label_for(3), "2-3");
        assert_eq!(bins.label_for(5), "4-5");
        assert_eq!(bins.label_for(7), "6-7");
        assert_eq!(bins.label_for(8), "8+");
        assert_eq!(bins.label_for(23), "8+");
        assert_eq!(bins.labels(), vec!["1", "2-3", "4-5", "6-7", "8+"]);
    }

    #[test]
    fn percent_formatting_matches_expected_shape() {
        assert_eq!(format_pct(0.7735), "77.35%");
        assert_eq!(format_pct(1.0), "100.00%");
    }

    #[test]
    fn success_rate_undefined_on_empty() {
        assert!(matches!(success_rate(&[]), Err(Error::UndefinedMetric(_))));
    }
}
