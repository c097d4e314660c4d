//! Benchmark generation: assemble generation prompts, elicit candidate
//! tasks, and accept a candidate as ground truth only when enough
//! independent solutions of its prompt converge on the same final state.

pub mod sampler;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{run_agent, AgentConfig, AgentEndpoint, ChatRequest, Message};
use crate::catalog::SchemaSummary;
use crate::checker::{Task, TaskCategory};
use crate::env::{fingerprint, Environment, StateFingerprint};
use crate::error::{Error, Result};
use crate::tools::{render_tool_docs, ToolCall, ToolRegistry, Trace};

/// A proposed-but-unverified task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTask {
    pub prompt: String,
    pub proposed_trace: Trace,
    pub category: TaskCategory,
}

/// Consensus sampling knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusConfig {
    pub n_samples: usize,
    pub quorum: usize,
    pub temperature: f64,
    pub max_parse_retries: u32,
    /// Whether the candidate's own proposed trace participates as sample 0.
    pub include_proposed: bool,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            n_samples: 10,
            quorum: 9,
            temperature: 0.7,
            max_parse_retries: 3,
            include_proposed: true,
        }
    }
}

/// Outcome of consensus sampling for one candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub samples: Vec<(Trace, StateFingerprint)>,
    pub quorum_fingerprint: Option<StateFingerprint>,
    pub quorum_size: usize,
    pub verified: bool,
    pub canonical_trace: Option<Trace>,
}

/// Anything that can produce a solution trace for a prompt. Sample indices
/// let deterministic solvers vary their output per sample.
pub trait PromptSolver: Sync {
    fn solve(&self, prompt: &str, sample_index: u32) -> Result<Trace>;
}

/// Solves prompts by driving an agent endpoint through [`run_agent`].
pub struct EndpointSolver<'a> {
    pub endpoint: &'a dyn AgentEndpoint,
    pub env: &'a Environment,
    pub registry: &'a ToolRegistry,
    pub agent_config: AgentConfig,
}

impl PromptSolver for EndpointSolver<'_> {
    fn solve(&self, prompt: &str, sample_index: u32) -> Result<Trace> {
        let mut config = self.agent_config.clone();
        config.request_seed = Some(config.request_seed.unwrap_or(0) ^ (sample_index as u64 + 1));
        Ok(run_agent(&config, self.endpoint, prompt, self.env, self.registry, &[])?.trace)
    }
}

/// Deterministic concatenation of tool docs, SQL-like schema text, worked
/// seed examples, and the creation instructions. Byte-stable for fixed
/// inputs.
pub fn build_generation_prompt(
    registry: &ToolRegistry,
    schema: &SchemaSummary,
    seeds: &[Task],
    instructions: &str,
) -> String {
    let mut out = String::from("You create benchmark tasks for a tool-augmented Earth-Observation agent.\n\n");
    out.push_str("## Tool templates\n\n");
    out.push_str(&render_tool_docs(registry));
    out.push_str("## Catalog schema (sampled)\n\n");
    out.push_str(&schema.render_sql_like());
    out.push_str("## Worked examples\n\n");
    for (i, task) in seeds.iter().enumerate() {
        out.push_str(&format!(
            "Example {} ({}):\nPrompt: {}\nSolution: {}\n\n",
            i + 1,
            task.category.name(),
            task.prompt,
            serde_json::json!({
                "calls": task.gold_trace.calls,
                "reply": task.gold_trace.reply.clone().unwrap_or_default(),
            }),
        ));
    }
    out.push_str("## Instructions\n\n");
    out.push_str(instructions);
    out.push('\n');
    out
}

#[derive(Deserialize)]
struct CandidateWire {
    prompt: String,
    category: String,
    calls: Vec<Value>,
    #[serde(default)]
    reply: Option<String>,
}

fn parse_candidate(content: &str) -> Result<CandidateTask> {
    let wire: CandidateWire =
        serde_json::from_str(content.trim()).map_err(|e| Error::Parse(e.to_string()))?;
    let category: TaskCategory = wire.category.parse()?;
    let mut calls = Vec::with_capacity(wire.calls.len());
    for value in &wire.calls {
        let tool = value
            .get("tool")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Schema("candidate call missing \"tool\"".into()))?;
        let args = value
            .get("args")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Schema("candidate call missing \"args\"".into()))?;
        calls.push(ToolCall {
            tool: tool.to_string(),
            args: args.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        });
    }
    if wire.prompt.trim().is_empty() {
        return Err(Error::Schema("candidate prompt is empty".into()));
    }
    Ok(CandidateTask {
        prompt: wire.prompt,
        proposed_trace: Trace::new(calls, Some(wire.reply.unwrap_or_default())),
        category,
    })
}

/// Ask the generator model for one candidate task, retrying malformed
/// output up to `max_parse_retries` total attempts.
pub fn propose_task(
    llm: &dyn AgentEndpoint,
    generation_prompt: &str,
    seed: u64,
    max_parse_retries: u32,
) -> Result<CandidateTask> {
    let attempts = max_parse_retries.max(1);
    let mut last_output = String::new();
    for attempt in 0..attempts {
        let response = llm.chat(&ChatRequest {
            messages: vec![
                Message::system(generation_prompt.to_string()),
                Message::user(
                    "Generate one new task now. Respond with one JSON object \
                     {\"prompt\": \"...\", \"category\": \"load_filter_plot|ui_web_navigation|information_seeking\", \
                     \"calls\": [{\"tool\": \"...\", \"args\": {...}}, ...], \"reply\": \"...\"}."
                        .to_string(),
                ),
            ],
            json_mode: true,
            temperature: 0.9,
            max_tokens: None,
            seed: Some(seed.wrapping_add(attempt as u64)),
        })?;
        match parse_candidate(&response.content) {
            Ok(candidate) => return Ok(candidate),
            Err(_) => last_output = response.content,
        }
    }
    Err(Error::Generation { attempts, last_output })
}

/// Sample `n` solutions of the candidate's prompt, execute each from the
/// canonical initial state, and group the final fingerprints. The candidate
/// is verified when the largest group reaches the quorum; its canonical
/// gold trace is the shortest trace in that group (ties broken by the
/// lexicographic order of the serialized calls).
pub fn self_consistency_verify(
    solver: &dyn PromptSolver,
    env: &Environment,
    candidate: &CandidateTask,
    cfg: &ConsensusConfig,
) -> Result<ConsensusResult> {
    assert!(
        cfg.n_samples >= cfg.quorum && cfg.quorum >= cfg.n_samples / 2 + 1,
        "quorum must be a majority no larger than the sample count"
    );

    let mut traces: Vec<Trace> = Vec::with_capacity(cfg.n_samples);
    if cfg.include_proposed {
        traces.push(candidate.proposed_trace.clone());
    }
    let retry_budget = cfg.max_parse_retries.max(1);
    while traces.len() < cfg.n_samples {
        let index = traces.len() as u32;
        let mut solved = None;
        let mut last_err = None;
        for attempt in 0..retry_budget {
            match solver.solve(&candidate.prompt, index + attempt * 1000) {
                Ok(trace) => {
                    solved = Some(trace);
                    break;
                }
                Err(err) => last_err = Some(err),
            }
        }
        match solved {
            Some(trace) => traces.push(trace),
            None => {
                return Err(Error::VerificationAborted(format!(
                    "sample {index} failed after {retry_budget} attempts: {}",
                    last_err.map(|e| e.to_string()).unwrap_or_default()
                )))
            }
        }
    }

    Ok(consensus_over(env, traces, cfg.quorum))
}

/// Pure consensus over already-solved traces; sample order never affects
/// the verdict or the canonical trace.
pub fn consensus_over(env: &Environment, traces: Vec<Trace>, quorum: usize) -> ConsensusResult {
    let samples: Vec<(Trace, StateFingerprint)> = traces
        .into_iter()
        .map(|trace| {
            let (state, _) = env.run_trace(&env.initial_state(), &trace);
            let fp = fingerprint(&state);
            (trace, fp)
        })
        .collect();

    let mut groups: BTreeMap<StateFingerprint, Vec<usize>> = BTreeMap::new();
    for (i, (_, fp)) in samples.iter().enumerate() {
        groups.entry(*fp).or_default().push(i);
    }
    // Largest group wins; fingerprint order breaks ties deterministically.
    let best = groups
        .iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| b.0.cmp(a.0)))
        .map(|(fp, idxs)| (*fp, idxs.clone()));

    let (quorum_size, verified, quorum_fingerprint, canonical_trace) = match best {
        None => (0, false, None, None),
        Some((fp, idxs)) => {
            let size = idxs.len();
            let verified = size >= quorum;
            let canonical = if verified {
                idxs.iter()
                    .map(|&i| &samples[i].0)
                    .min_by(|a, b| {
                        a.calls
                            .len()
                            .cmp(&b.calls.len())
                            .then_with(|| serialize_calls(a).cmp(&serialize_calls(b)))
                    })
                    .cloned()
            } else {
                None
            };
            (size, verified, verified.then_some(fp), canonical)
        }
    };

    ConsensusResult { samples, quorum_fingerprint, quorum_size, verified, canonical_trace }
}

fn serialize_calls(trace: &Trace) -> String {
    trace.calls.iter().map(|c| c.to_wire()).collect::<Vec<_>>().join(";")
}

impl ConsensusResult {
    /// Emit the verified task, or `None` when consensus failed. The gold
    /// reply comes from the canonical trace (empty when it carried none).
    pub fn into_task(&self, candidate: &CandidateTask, id: String) -> Option<Task> {
        if !self.verified {
            return None;
        }
        let mut gold_trace = self.canonical_trace.clone()?;
        if gold_trace.reply.is_none() {
            gold_trace.reply = Some(String::new());
        }
        gold_trace.transcript_tokens = None;
        let datasets: Vec<String> = gold_trace
            .calls
            .iter()
            .filter(|c| c.tool == "db_load")
            .filter_map(|c| c.args.get("dataset").and_then(Value::as_str).map(String::from))
            .collect();
        let mut meta = BTreeMap::new();
        meta.insert("num_gold_tools".into(), Value::from(gold_trace.calls.len()));
        meta.insert("quorum_size".into(), Value::from(self.quorum_size));
        if !datasets.is_empty() {
            meta.insert("datasets".into(), Value::from(datasets));
        }
        Some(Task {
            id,
            category: candidate.category,
            prompt: candidate.prompt.clone(),
            gold_fingerprint: self.quorum_fingerprint?,
            gold_trace,
            meta,
        })
    }
}

/// A stream of candidate tasks, LLM-driven or programmatic.
pub trait CandidateSource {
    fn next_candidate(&mut self) -> Result<CandidateTask>;
}

/// Proposes candidates from a generator endpoint with a fixed generation
/// prompt.
pub struct LlmCandidateSource<'a> {
    pub endpoint: &'a dyn AgentEndpoint,
    pub generation_prompt: String,
    pub max_parse_retries: u32,
    pub next_seed: u64,
}

impl CandidateSource for LlmCandidateSource<'_> {
    fn next_candidate(&mut self) -> Result<CandidateTask> {
        let seed = self.next_seed;
        self.next_seed = self.next_seed.wrapping_add(1);
        propose_task(self.endpoint, &self.generation_prompt, seed, self.max_parse_retries)
    }
}

/// Generation pipeline counters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GenerationStats {
    pub proposed: usize,
    pub rejected: usize,
    pub duplicate_prompts: usize,
}

/// Draw candidates, verify each by state consensus, and keep going until
/// `count` verified tasks exist. Prompts are deduplicated so every task is
/// addressable by its prompt.
pub fn generate_benchmark(
    source: &mut dyn CandidateSource,
    solver: &dyn PromptSolver,
    env: &Environment,
    cfg: &ConsensusConfig,
    count: usize,
    id_prefix: &str,
) -> Result<(Vec<Task>, GenerationStats)> {
    let mut tasks = Vec::with_capacity(count);
    let mut stats = GenerationStats::default();
    let mut seen_prompts = std::collections::BTreeSet::new();
    let attempt_budget = count.saturating_mul(25).max(32);
    let mut attempts = 0usize;

    while tasks.len() < count {
        attempts += 1;
        if attempts > attempt_budget {
            return Err(Error::Generation {
                attempts: attempts as u32,
                last_output: format!("only {} of {count} candidates verified", tasks.len()),
            });
        }
        let candidate = source.next_candidate()?;
        stats.proposed += 1;
        if !seen_prompts.insert(candidate.prompt.clone()) {
            stats.duplicate_prompts += 1;
            continue;
        }
        let consensus = self_consistency_verify(solver, env, &candidate, cfg)?;
        let id = format!("{id_prefix}{:06}", tasks.len());
        match consensus.into_task(&candidate, id) {
            Some(task) => tasks.push(task),
            None => stats.rejected += 1,
        }
    }
    Ok((tasks, stats))
}

#[derive(Serialize, Deserialize)]
struct TaskWire {
    id: String,
    category: String,
    prompt: String,
    gold_calls: Vec<ToolCall>,
    gold_reply: String,
    gold_fingerprint: String,
    #[serde(default)]
    meta: BTreeMap<String, Value>,
}

impl From<&Task> for TaskWire {
    fn from(task: &Task) -> Self {
        Self {
            id: task.id.clone(),
            category: task.category.name().to_string(),
            prompt: task.prompt.clone(),
            gold_calls: task.gold_trace.calls.clone(),
            gold_reply: task.gold_trace.reply.clone().unwrap_or_default(),
            gold_fingerprint: task.gold_fingerprint.to_hex(),
            meta: task.meta.clone(),
        }
    }
}

impl TryFrom<TaskWire> for Task {
    type Error = Error;

    fn try_from(wire: TaskWire) -> Result<Self> {
        Ok(Task {
            id: wire.id,
            category: wire.category.parse()?,
            prompt: wire.prompt,
            gold_trace: Trace::new(wire.gold_calls, Some(wire.gold_reply)),
            gold_fingerprint: StateFingerprint::from_hex(&wire.gold_fingerprint)?,
            meta: wire.meta,
        })
    }
}

/// Write a benchmark as JSONL, one task per line.
pub fn persist_benchmark(tasks: &[Task], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for task in tasks {
        serde_json::to_writer(&mut file, &TaskWire::from(task))?;
        writeln!(file)?;
    }
    Ok(())
}

/// Load a benchmark. With `verify_env` set, every gold trace is replayed
/// and compared against its recorded fingerprint; any mismatch aborts the
/// load naming the corrupt task ids.
pub fn load_benchmark(path: &Path, verify_env: Option<&Environment>) -> Result<Vec<Task>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut tasks = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: TaskWire = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        tasks.push(Task::try_from(wire)?);
    }
    if let Some(env) = verify_env {
        let corrupt: Vec<String> = tasks
            .iter()
            .filter(|task| {
                let (state, _) = env.run_trace(&env.initial_state(), &task.gold_trace);
                fingerprint(&state) != task.gold_fingerprint
            })
            .map(|task| task.id.clone())
            .collect();
        if !corrupt.is_empty() {
            return Err(Error::BenchmarkCorruption { task_ids: corrupt });
        }
    }
    Ok(tasks)
}

fn commafy(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// One-line benchmark size summary: task count and total tool calls, e.g.
/// `10,000 / 50,830`.
pub fn format_benchmark_stats(tasks: &[Task]) -> String {
    let calls: usize = tasks.iter().map(|t| t.gold_trace.calls.len()).sum();
    format!("{} / {}", commafy(tasks.len()), commafy(calls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::mock::MockEndpoint;
    use crate::catalog::{synth::synthetic_catalog, Catalog};
    use crate::config::EngineConfig;
    use crate::fixtures::synthetic_fixtures;

    fn test_env() -> Environment {
        Environment::new(
            Catalog::from_records(synthetic_catalog(400, 42)),
            synthetic_fixtures(),
            EngineConfig::default(),
        )
    }

    fn candidate() -> CandidateTask {
        CandidateTask {
            prompt: "Zoom the map to Vienna".into(),
            proposed_trace: Trace::new(
                vec![ToolCall::new("zoom_map").with_arg("location", "Vienna")],
                Some(String::new()),
            ),
            category: TaskCategory::UiWebNavigation,
        }
    }

    /// Solver that replays a fixed trace for correct samples and emits a
    /// unique divergent trace for the sample indices listed as wrong.
    struct FixedSolver {
        trace: Trace,
        wrong_indices: Vec<u32>,
    }

    impl PromptSolver for FixedSolver {
        fn solve(&self, _prompt: &str, sample_index: u32) -> Result<Trace> {
            if self.wrong_indices.contains(&sample_index) {
                Ok(Trace::new(
                    vec![ToolCall::new("open_url").with_arg("url", format!("https://x.test/{sample_index}"))],
                    Some(String::new()),
                ))
            } else {
                Ok(self.trace.clone())
            }
        }
    }

    fn verify_with_wrong(wrong: Vec<u32>) -> ConsensusResult {
        let env = test_env();
        let cand = candidate();
        let solver = FixedSolver { trace: cand.proposed_trace.clone(), wrong_indices: wrong };
        self_consistency_verify(&solver, &env, &cand, &ConsensusConfig::default()).unwrap()
    }

    #[test]
    fn unanimous_samples_verify() {
        let result = verify_with_wrong(vec![]);
        assert!(result.verified);
        assert_eq!(result.quorum_size, 10);
        assert!(result.canonical_trace.is_some());
    }

    #[test]
    fn nine_of_ten_verifies() {
        let result = verify_with_wrong(vec![4]);
        assert!(result.verified);
        assert_eq!(result.quorum_size, 9);
    }

    #[test]
    fn eight_of_ten_is_rejected() {
        let result = verify_with_wrong(vec![3, 7]);
        assert!(!result.verified);
        assert_eq!(result.quorum_size, 8);
        assert!(result.canonical_trace.is_none());
        assert!(result.quorum_fingerprint.is_none());
    }

    #[test]
    fn consensus_is_sample_order_invariant() {
        let env = test_env();
        let cand = candidate();
        let divergent = Trace::new(
            vec![ToolCall::new("open_url").with_arg("url", "https://x.test/a")],
            Some(String::new()),
        );
        let mut traces: Vec<Trace> = (0..9).map(|_| cand.proposed_trace.clone()).collect();
        traces.push(divergent);
        let forward = consensus_over(&env, traces.clone(), 9);
        traces.reverse();
        let backward = consensus_over(&env, traces, 9);
        assert_eq!(forward.verified, backward.verified);
        assert_eq!(forward.quorum_size, backward.quorum_size);
        assert_eq!(forward.quorum_fingerprint, backward.quorum_fingerprint);
        assert_eq!(forward.canonical_trace, backward.canonical_trace);
    }

    #[test]
    fn canonical_trace_is_shortest_in_quorum() {
        let env = test_env();
        let cand = candidate();
        // A longer trace that reaches the same state (idempotent repeat).
        let longer = Trace::new(
            vec![
                ToolCall::new("zoom_map").with_arg("location", "Vienna"),
                ToolCall::new("zoom_map").with_arg("location", "Vienna"),
            ],
            Some(String::new()),
        );
        let mut traces = vec![longer; 4];
        traces.extend(std::iter::repeat(cand.proposed_trace.clone()).take(6));
        let result = consensus_over(&env, traces, 9);
        assert!(result.verified, "all ten land on the same state");
        assert_eq!(result.canonical_trace.unwrap().calls.len(), 1);
    }

    #[test]
    fn verified_task_replays_to_its_fingerprint() {
        let env = test_env();
        let cand = candidate();
        let result = verify_with_wrong(vec![]);
        let task = result.into_task(&cand, "t-0".into()).unwrap();
        let (state, _) = env.run_trace(&env.initial_state(), &task.gold_trace);
        assert_eq!(fingerprint(&state), task.gold_fingerprint);
        assert_eq!(task.meta["num_gold_tools"], Value::from(1));
    }

    #[test]
    fn propose_task_parses_mock_output() {
        let body = serde_json::json!({
            "prompt": "Show fmow golf courses",
            "category": "load_filter_plot",
            "calls": [{"tool": "db_load", "args": {"dataset": "fmow"}}],
            "reply": "done"
        })
        .to_string();
        let endpoint = MockEndpoint::new("gen", vec![body]);
        let cand = propose_task(&endpoint, "generation prompt", 1, 3).unwrap();
        assert_eq!(cand.category, TaskCategory::LoadFilterPlot);
        assert_eq!(cand.proposed_trace.calls.len(), 1);
    }

    #[test]
    fn propose_task_retries_then_succeeds() {
        let good = serde_json::json!({
            "prompt": "p", "category": "ui_web_navigation",
            "calls": [{"tool": "zoom_map", "args": {"location": "Vienna"}}],
            "reply": ""
        })
        .to_string();
        let endpoint = MockEndpoint::new("gen", vec!["garbage".into(), good]);
        let cand = propose_task(&endpoint, "gp", 1, 3).unwrap();
        assert_eq!(cand.prompt, "p");
    }

    #[test]
    fn propose_task_exhausts_retries() {
        let endpoint = MockEndpoint::new("gen", vec![]).with_default("junk");
        let err = propose_task(&endpoint, "gp", 1, 3).unwrap_err();
        match err {
            Error::Generation { attempts, last_output } => {
                assert_eq!(attempts, 3);
                assert_eq!(last_output, "junk");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn benchmark_roundtrip_and_corruption_detection() {
        let env = test_env();
        let result = verify_with_wrong(vec![]);
        let task = result.into_task(&candidate(), "t-0".into()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.jsonl");
        persist_benchmark(&[task.clone()], &path).unwrap();

        let loaded = load_benchmark(&path, Some(&env)).unwrap();
        assert_eq!(loaded, vec![task.clone()]);

        // Tamper with a gold call.
        let text = std::fs::read_to_string(&path).unwrap().replace("Vienna", "Madrid");
        std::fs::write(&path, text).unwrap();
        assert!(load_benchmark(&path, None).is_ok(), "no verification, no error");
        let err = load_benchmark(&path, Some(&env)).unwrap_err();
        match err {
            Error::BenchmarkCorruption { task_ids } => assert_eq!(task_ids, vec!["t-0"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stats_line_format() {
        let result = verify_with_wrong(vec![]);
        let task = result.into_task(&candidate(), "t".into()).unwrap();
        let tasks: Vec<Task> = (0..1200)
            .map(|i| {
                let mut t = task.clone();
                t.id = format!("t{i}");
                t
            })
            .collect();
        assert_eq!(format_benchmark_stats(&tasks), "1,200 / 1,200");
        assert_eq!(commafy(50830), "50,830");
        assert_eq!(commafy(7), "7");
        assert_eq!(commafy(1000000), "1,000,000");
    }

    #[test]
    fn generation_prompt_is_stable_and_complete() {
        let env = test_env();
        let registry = crate::tools::register_builtin_tools().unwrap();
        let schema = env.catalog().sample_schema(200, 9);
        let result = verify_with_wrong(vec![]);
        let seed_task = result.into_task(&candidate(), "seed-0".into()).unwrap();
        let seeds = vec![seed_task.clone(), seed_task.clone(), seed_task];
        let a = build_generation_prompt(&registry, &schema, &seeds, "Make new tasks.");
        let b = build_generation_prompt(&registry, &schema, &seeds, "Make new tasks.");
        assert_eq!(a, b);
        assert_eq!(a.matches("template: ").count(), registry.len());
        assert_eq!(a.matches("Example ").count(), 3);
        assert!(a.contains("CREATE TABLE"));
    }
}
