//! Programmatic candidate-task sampler.
//!
//! Draws realistic task templates against the live catalog and fixtures:
//! every emitted candidate executes cleanly, its filters strictly narrow
//! the result set, and its prompt embeds the concrete parameters. With
//! `sensitive_only` set, the sampler additionally guarantees that dropping
//! any single gold call flips at least one success clause, so per-call
//! omission noise translates exactly into task failures.

use std::collections::BTreeSet;

use chrono::{Days, Months, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::checker::{success_breakdown, TaskCategory};
use crate::config::ToleranceConfig;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::fixtures::CorpusKind;
use crate::tools::{ToolCall, Trace};

use super::{CandidateSource, CandidateTask};

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Restrict to calls whose omission is always visible to the success
    /// checks, and verify that per call by replay.
    pub sensitive_only: bool,
    pub min_calls: usize,
    pub max_calls: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { sensitive_only: false, min_calls: 1, max_calls: 10 }
    }
}

pub struct SyntheticTaskSampler<'a> {
    env: &'a Environment,
    rng: ChaCha8Rng,
    config: SamplerConfig,
    tolerance: ToleranceConfig,
}

impl<'a> SyntheticTaskSampler<'a> {
    pub fn new(env: &'a Environment, seed: u64, config: SamplerConfig) -> Self {
        Self { env, rng: ChaCha8Rng::seed_from_u64(seed), config, tolerance: ToleranceConfig::default() }
    }

    fn place(&mut self) -> String {
        let names = self.env.fixtures().place_names();
        names[self.rng.gen_range(0..names.len())].to_string()
    }

    fn other_place(&mut self, not: &str) -> String {
        for _ in 0..16 {
            let p = self.place();
            if p != not {
                return p;
            }
        }
        not.to_string()
    }

    fn web_url(&mut self) -> String {
        let docs = self.env.fixtures().corpus(CorpusKind::Web);
        docs[self.rng.gen_range(0..docs.len())].id.clone()
    }

    fn datasets(&mut self, count: usize) -> Vec<String> {
        let mut all: Vec<String> =
            self.env.catalog().datasets().map(|d| d.name().to_string()).collect();
        all.shuffle(&mut self.rng);
        all.truncate(count);
        all
    }

    fn month_range(&mut self) -> (String, String) {
        let year = self.rng.gen_range(2014..=2022);
        let month = self.rng.gen_range(1..=12u32);
        let window = self.rng.gen_range(3..=30u64);
        let start = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
        let end = start + Months::new(window as u32) - Days::new(1);
        (start.format("%Y-%m-%d").to_string(), end.format("%Y-%m-%d").to_string())
    }

    /// Distinct class (or LCC) labels present in the given result set.
    fn labels_in(&self, ids: &BTreeSet<String>, lcc: bool) -> Vec<String> {
        let mut labels = BTreeSet::new();
        for id in ids {
            if let Some(record) = self.env.catalog().record(id) {
                let source = if lcc { &record.lcc_labels } else { &record.classes };
                labels.extend(source.iter().cloned());
            }
        }
        labels.into_iter().collect()
    }

    fn run_set(&self, calls: &[ToolCall]) -> BTreeSet<String> {
        let trace = Trace::new(calls.to_vec(), None);
        let (state, _) = self.env.run_trace(&self.env.initial_state(), &trace);
        state.session_state.result_set
    }

    /// Draw one filter call that strictly narrows `current` without
    /// emptying it. Returns the call, a prompt fragment, and the narrowed set.
    fn draw_filter(
        &mut self,
        prior_calls: &[ToolCall],
        current: &BTreeSet<String>,
        used_class: bool,
        used_lcc: bool,
    ) -> Option<(ToolCall, String, BTreeSet<String>, bool, bool)> {
        for _ in 0..14 {
            let choice = self.rng.gen_range(0..100);
            let (call, fragment, is_class, is_lcc) = if choice < 35 {
                let place = self.place();
                let radius = *[50.0, 100.0, 150.0, 200.0, 300.0, 400.0]
                    .choose(&mut self.rng)
                    .unwrap();
                (
                    ToolCall::new("filter_coords")
                        .with_arg("place", place.clone())
                        .with_arg("radius_km", radius),
                    format!("within {radius:.0} km of {place}"),
                    false,
                    false,
                )
            } else if choice < 65 {
                let (start, end) = self.month_range();
                (
                    ToolCall::new("filter_date")
                        .with_arg("start", start.clone())
                        .with_arg("end", end.clone()),
                    format!("acquired between {start} and {end}"),
                    false,
                    false,
                )
            } else if choice < 80 && !used_class {
                let labels = self.labels_in(current, false);
                if labels.is_empty() {
                    continue;
                }
                let k = self.rng.gen_range(1..=2.min(labels.len()));
                let picked: Vec<String> =
                    labels.choose_multiple(&mut self.rng, k).cloned().collect();
                (
                    ToolCall::new("filter_class").with_arg("classes", json!(picked)),
                    format!("for the {} categories", picked.join(", ")),
                    true,
                    false,
                )
            } else if choice < 90 && !used_lcc {
                let labels = self.labels_in(current, true);
                if labels.is_empty() {
                    continue;
                }
                let picked: Vec<String> =
                    labels.choose_multiple(&mut self.rng, 1).cloned().collect();
                (
                    ToolCall::new("filter_lccclass").with_arg("classes", json!(picked)),
                    format!("with {} land cover", picked.join(", ")),
                    false,
                    true,
                )
            } else {
                let place = self.place();
                let (lat, lon) = self.env.fixtures().resolve_place(&place)?;
                let dlat = self.rng.gen_range(0.8..2.5);
                let dlon = self.rng.gen_range(0.8..2.5);
                (
                    ToolCall::new("filter_bbox")
                        .with_arg("min_lat", (lat - dlat).max(-90.0))
                        .with_arg("min_lon", (lon - dlon).max(-180.0))
                        .with_arg("max_lat", (lat + dlat).min(90.0))
                        .with_arg("max_lon", (lon + dlon).min(180.0)),
                    format!("inside the box around {place}"),
                    false,
                    false,
                )
            };

            let mut calls = prior_calls.to_vec();
            calls.push(call.clone());
            let next = self.run_set(&calls);
            if !next.is_empty() && next.len() < current.len() {
                return Some((call, fragment, next, is_class, is_lcc));
            }
        }
        None
    }

    fn build_load_filter_plot(&mut self, target: usize) -> Option<(String, Vec<ToolCall>, String)> {
        let load_count = if target >= 4 && self.rng.gen_bool(0.4) { 2 } else { 1 };
        let load_count = load_count.min(target);
        let plot_count = usize::from(target > load_count);
        let mut budget = target - load_count - plot_count;
        let filter_count = budget.min(4);
        budget -= filter_count;
        // Remaining slots go to map/UI garnish, each at most once.
        let mut extras: Vec<&str> = Vec::new();
        for extra in ["zoom", "display", "pan", "open"] {
            if extras.len() < budget {
                extras.push(extra);
            }
        }
        if extras.len() < budget {
            return None; // target longer than this template supports
        }

        let datasets = self.datasets(load_count);
        if datasets.len() < load_count {
            return None;
        }
        let mut calls: Vec<ToolCall> = datasets
            .iter()
            .map(|d| ToolCall::new("db_load").with_arg("dataset", d.clone()))
            .collect();
        let mut current = self.run_set(&calls);
        if current.is_empty() {
            return None;
        }

        let mut fragments = Vec::new();
        let (mut used_class, mut used_lcc) = (false, false);
        for _ in 0..filter_count {
            let (call, fragment, next, is_class, is_lcc) =
                self.draw_filter(&calls, &current, used_class, used_lcc)?;
            calls.push(call);
            fragments.push(fragment);
            current = next;
            used_class |= is_class;
            used_lcc |= is_lcc;
        }

        let mut kind = "scatter";
        if plot_count == 1 {
            if self.rng.gen_bool(0.3) {
                kind = "heatmap";
                calls.push(ToolCall::new("heatmap_plot"));
            } else {
                calls.push(ToolCall::new("scatter_plot"));
            }
        }

        let mut zoom_place = None;
        for extra in &extras {
            match *extra {
                "zoom" => {
                    let place = self.place();
                    let zoom = *[6i64, 8, 10, 12].choose(&mut self.rng).unwrap();
                    calls.push(
                        ToolCall::new("zoom_map")
                            .with_arg("location", place.clone())
                            .with_arg("zoom", zoom),
                    );
                    zoom_place = Some(place);
                }
                "pan" => {
                    let anchor = zoom_place.clone().unwrap_or_else(|| self.place());
                    let place = self.other_place(&anchor);
                    calls.push(ToolCall::new("pan_map").with_arg("location", place));
                }
                "display" => {
                    let ids: Vec<String> = current.iter().take(3).cloned().collect();
                    calls.push(ToolCall::new("display_images").with_arg("ids", json!(ids)));
                }
                "open" => {
                    let url = self.web_url();
                    calls.push(ToolCall::new("open_url").with_arg("url", url));
                }
                _ => unreachable!(),
            }
        }

        let verb = if kind == "heatmap" { "build a heatmap of" } else { "plot" };
        let mut prompt = format!("Load the {} imagery and {verb} the records", datasets.join(" and "));
        if !fragments.is_empty() {
            prompt.push_str(&format!(" {}", fragments.join(", ")));
        }
        for extra in &extras {
            match *extra {
                "zoom" => prompt.push_str(&format!(
                    ", then zoom the map to {}",
                    zoom_place.clone().unwrap_or_default()
                )),
                "pan" => prompt.push_str(", then pan across"),
                "display" => prompt.push_str(", and display the first matches"),
                "open" => prompt.push_str(", and open the reference article"),
                _ => {}
            }
        }
        prompt.push('.');

        let reply = if self.config.sensitive_only || self.rng.gen_bool(0.5) {
            String::new()
        } else {
            format!("Plotted {} matching {} images on the map.", current.len(), datasets.join("+"))
        };
        Some((prompt, calls, reply))
    }

    fn build_ui_web(&mut self, target: usize) -> Option<(String, Vec<ToolCall>, String)> {
        if !(1..=4).contains(&target) {
            return None;
        }
        let mut calls = Vec::new();
        let mut pieces = Vec::new();
        let mut remaining = target;

        if remaining >= 2 || self.rng.gen_bool(0.6) {
            let place = self.place();
            let zoom = *[8i64, 10, 12].choose(&mut self.rng).unwrap();
            calls.push(
                ToolCall::new("zoom_map").with_arg("location", place.clone()).with_arg("zoom", zoom),
            );
            pieces.push(format!("zoom the map to {place}"));
            remaining -= 1;
            if remaining > 0 && self.rng.gen_bool(0.4) {
                let other = self.other_place(&place);
                calls.push(ToolCall::new("pan_map").with_arg("location", other.clone()));
                pieces.push(format!("then pan over to {other}"));
                remaining -= 1;
            }
        }
        if remaining > 0 && !self.config.sensitive_only && self.rng.gen_bool(0.5) {
            // Search first, then open the top hit; keeps the tab coherent.
            let docs = self.env.fixtures().corpus(CorpusKind::Web);
            let doc = &docs[self.rng.gen_range(0..docs.len())];
            let query = doc.title.clone();
            let top = self
                .env
                .fixtures()
                .retrieve(CorpusKind::Web, &query, self.env.config().retrieval_k)
                .first()
                .map(|d| d.id.clone())?;
            calls.push(ToolCall::new("web_search").with_arg("query", query.clone()));
            pieces.push(format!("search the web for \"{query}\""));
            remaining -= 1;
            if remaining > 0 {
                calls.push(ToolCall::new("open_url").with_arg("url", top));
                pieces.push("open the top result".to_string());
                remaining -= 1;
            }
        }
        let mut opened = BTreeSet::new();
        while remaining > 0 {
            let url = self.web_url();
            if !opened.insert(url.clone()) {
                continue;
            }
            calls.push(ToolCall::new("open_url").with_arg("url", url.clone()));
            pieces.push(format!("open {url}"));
            remaining -= 1;
        }
        if calls.len() != target {
            return None;
        }
        let mut prompt = format!("Can you {}?", pieces.join(", "));
        prompt.replace_range(0..1, "C");
        let reply = if self.config.sensitive_only { String::new() } else { "Done.".to_string() };
        Some((prompt, calls, reply))
    }

    fn build_information_seeking(&mut self, target: usize) -> Option<(String, Vec<ToolCall>, String)> {
        if self.config.sensitive_only || !(2..=4).contains(&target) {
            return None;
        }
        let kinds = [
            (CorpusKind::Documents, "docs_RAG", "our documents"),
            (CorpusKind::Wiki, "wiki_RAG", "the wiki"),
            (CorpusKind::Arxiv, "arxiv_search", "arxiv"),
            (CorpusKind::Modelzoo, "modelzoo_search", "the model wiki"),
        ];
        let retrievals = target - 1;
        let mut calls = Vec::new();
        let mut sources = Vec::new();
        let mut answer = String::new();
        let mut used = BTreeSet::new();
        for _ in 0..retrievals {
            let (corpus, tool, label) = loop {
                let pick = kinds[self.rng.gen_range(0..kinds.len())];
                if used.insert(pick.1) {
                    break pick;
                }
            };
            let docs = self.env.fixtures().corpus(corpus);
            let doc = &docs[self.rng.gen_range(0..docs.len())];
            let query = doc.title.clone();
            calls.push(ToolCall::new(tool).with_arg("query", query.clone()));
            sources.push((label, query.clone()));
            if answer.is_empty() {
                let top = self.env.fixtures().retrieve(corpus, &query, 1);
                let text = top.first().map(|d| d.text.as_str()).unwrap_or_default();
                answer = text.split_whitespace().take(18).collect::<Vec<_>>().join(" ");
            }
        }
        if answer.is_empty() {
            return None;
        }
        calls.push(ToolCall::new("answer_tools").with_arg("text", answer.clone()));
        let (label, query) = &sources[0];
        let prompt = format!("According to {label}, what do we know about {query}?");
        Some((prompt, calls, answer))
    }

    /// Reject candidates whose calls are not all individually load-bearing:
    /// dropping any one call must break at least one success clause.
    fn omission_sensitive(&self, calls: &[ToolCall], reply: &str) -> bool {
        let gold = Trace::new(calls.to_vec(), Some(reply.to_string()));
        let (gold_final, observations) = self.env.run_trace(&self.env.initial_state(), &gold);
        if observations.iter().any(|o| !o.ok) {
            return false;
        }
        for skip in 0..calls.len() {
            let mut reduced = calls.to_vec();
            reduced.remove(skip);
            let (state, _) = self
                .env
                .run_trace(&self.env.initial_state(), &Trace::new(reduced, Some(reply.to_string())));
            if success_breakdown(&state, &gold_final, &self.tolerance).all() {
                return false;
            }
        }
        true
    }

    fn try_build(&mut self) -> Option<CandidateTask> {
        let target = self.rng.gen_range(self.config.min_calls..=self.config.max_calls);
        let (category, built) = if target > 4 {
            (TaskCategory::LoadFilterPlot, self.build_load_filter_plot(target))
        } else {
            match self.rng.gen_range(0..10) {
                0..=4 => (TaskCategory::LoadFilterPlot, self.build_load_filter_plot(target)),
                5..=7 => (TaskCategory::UiWebNavigation, self.build_ui_web(target)),
                _ => (TaskCategory::InformationSeeking, self.build_information_seeking(target)),
            }
        };
        let (prompt, calls, reply) = built?;
        debug_assert_eq!(calls.len(), target);

        let gold = Trace::new(calls.clone(), Some(reply.clone()));
        let (_, observations) = self.env.run_trace(&self.env.initial_state(), &gold);
        if observations.iter().any(|o| !o.ok) {
            return None;
        }
        if self.config.sensitive_only && !self.omission_sensitive(&calls, &reply) {
            return None;
        }
        Some(CandidateTask {
            prompt,
            proposed_trace: gold,
            category,
        })
    }
}

impl CandidateSource for SyntheticTaskSampler<'_> {
    fn next_candidate(&mut self) -> Result<CandidateTask> {
        for _ in 0..400 {
            if let Some(candidate) = self.try_build() {
                return Ok(candidate);
            }
        }
        Err(Error::Generation {
            attempts: 400,
            last_output: "synthetic sampler could not satisfy its constraints".into(),
        })
    }
}

/// Replays a candidate's own gold trace for every sample: the perfect
/// solver for programmatic generation.
pub struct OracleSolver {
    prompts: std::sync::Mutex<std::collections::BTreeMap<String, Trace>>,
}

impl OracleSolver {
    pub fn new() -> Self {
        Self { prompts: std::sync::Mutex::new(Default::default()) }
    }

    pub fn learn(&self, candidate: &CandidateTask) {
        self.prompts
            .lock()
            .unwrap()
            .insert(candidate.prompt.clone(), candidate.proposed_trace.clone());
    }
}

impl Default for OracleSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl super::PromptSolver for OracleSolver {
    fn solve(&self, prompt: &str, _sample_index: u32) -> Result<Trace> {
        self.prompts
            .lock()
            .unwrap()
            .get(prompt)
            .cloned()
            .ok_or_else(|| Error::ScriptMiss(prompt.chars().take(120).collect()))
    }
}

/// Convenience pipeline: synthesize `count` verified tasks with the oracle
/// solver. The resulting benchmark always replays cleanly.
pub fn generate_synthetic_benchmark(
    env: &Environment,
    count: usize,
    seed: u64,
    config: SamplerConfig,
    consensus: &super::ConsensusConfig,
    id_prefix: &str,
) -> Result<Vec<crate::checker::Task>> {
    struct LearningSource<'a> {
        inner: SyntheticTaskSampler<'a>,
        solver: &'a OracleSolver,
    }
    impl CandidateSource for LearningSource<'_> {
        fn next_candidate(&mut self) -> Result<CandidateTask> {
            let candidate = self.inner.next_candidate()?;
            self.solver.learn(&candidate);
            Ok(candidate)
        }
    }

    let solver = OracleSolver::new();
    let mut source = LearningSource {
        inner: SyntheticTaskSampler::new(env, seed, config),
        solver: &solver,
    };
    let (tasks, _) = super::generate_benchmark(&mut source, &solver, env, consensus, count, id_prefix)?;
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::ConsensusConfig;
    use crate::catalog::{synth::synthetic_catalog, Catalog};
    use crate::config::EngineConfig;
    use crate::env::fingerprint;
    use crate::fixtures::synthetic_fixtures;

    fn test_env(records: usize) -> Environment {
        Environment::new(
            Catalog::from_records(synthetic_catalog(records, 42)),
            synthetic_fixtures(),
            EngineConfig::default(),
        )
    }

    #[test]
    fn sampler_is_deterministic() {
        let env = test_env(1200);
        let mut a = SyntheticTaskSampler::new(&env, 7, SamplerConfig::default());
        let mut b = SyntheticTaskSampler::new(&env, 7, SamplerConfig::default());
        for _ in 0..5 {
            assert_eq!(a.next_candidate().unwrap(), b.next_candidate().unwrap());
        }
    }

    #[test]
    fn candidates_execute_cleanly_with_exact_length() {
        let env = test_env(1200);
        let mut sampler = SyntheticTaskSampler::new(&env, 3, SamplerConfig::default());
        for _ in 0..20 {
            let candidate = sampler.next_candidate().unwrap();
            let (_, observations) =
                env.run_trace(&env.initial_state(), &candidate.proposed_trace);
            assert!(observations.iter().all(|o| o.ok), "candidate has failing call");
            assert!(!candidate.prompt.is_empty());
        }
    }

    #[test]
    fn sensitive_candidates_fail_on_any_single_omission() {
        let env = test_env(1500);
        let config = SamplerConfig { sensitive_only: true, min_calls: 2, max_calls: 8 };
        let mut sampler = SyntheticTaskSampler::new(&env, 11, config);
        let tol = ToleranceConfig::default();
        for _ in 0..10 {
            let candidate = sampler.next_candidate().unwrap();
            let calls = &candidate.proposed_trace.calls;
            let (gold_final, _) = env.run_trace(&env.initial_state(), &candidate.proposed_trace);
            for skip in 0..calls.len() {
                let mut reduced = calls.clone();
                reduced.remove(skip);
                let trace = Trace::new(reduced, candidate.proposed_trace.reply.clone());
                let (state, _) = env.run_trace(&env.initial_state(), &trace);
                assert!(
                    !success_breakdown(&state, &gold_final, &tol).all(),
                    "omitting call {skip} of {} went unnoticed",
                    calls.len()
                );
            }
        }
    }

    #[test]
    fn synthetic_benchmark_generates_and_replays() {
        let env = test_env(1200);
        let tasks = generate_synthetic_benchmark(
            &env,
            40,
            5,
            SamplerConfig::default(),
            &ConsensusConfig::default(),
            "syn-",
        )
        .unwrap();
        assert_eq!(tasks.len(), 40);
        let mut prompts = BTreeSet::new();
        for task in &tasks {
            assert!(prompts.insert(task.prompt.clone()), "duplicate prompt");
            let (state, _) = env.run_trace(&env.initial_state(), &task.gold_trace);
            assert_eq!(fingerprint(&state), task.gold_fingerprint);
        }
        // All three categories appear in a modest sample.
        let cats: BTreeSet<_> = tasks.iter().map(|t| t.category).collect();
        assert!(cats.len() >= 2, "got {cats:?}");
    }
}
