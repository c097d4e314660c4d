//! Deterministic test doubles: canned endpoints and scripted trace-playback
//! agents with seeded error injection.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::checker::Task;
use crate::error::{Error, Result};
use crate::tools::Trace;

use super::{AgentEndpoint, ChatRequest, ChatResponse};

/// Stable 64-bit hash mixing a seed with text; used to derive per-prompt
/// RNG streams that do not depend on scheduling order.
pub fn stable_hash64(seed: u64, text: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Returns canned bodies in order, then the default body forever (or an
/// error when none is set). Single-threaded test helper.
pub struct MockEndpoint {
    label: String,
    queue: Mutex<std::collections::VecDeque<String>>,
    default_body: Option<String>,
    usage_tokens: Option<u64>,
}

impl MockEndpoint {
    pub fn new(label: &str, bodies: Vec<String>) -> Self {
        Self {
            label: label.into(),
            queue: Mutex::new(bodies.into()),
            default_body: None,
            usage_tokens: None,
        }
    }

    pub fn with_default(mut self, body: &str) -> Self {
        self.default_body = Some(body.into());
        self
    }

    pub fn with_usage(mut self, tokens: u64) -> Self {
        self.usage_tokens = Some(tokens);
        self
    }
}

impl AgentEndpoint for MockEndpoint {
    fn name(&self) -> &str {
        &self.label
    }

    fn chat(&self, _request: &ChatRequest) -> Result<ChatResponse> {
        let next = self.queue.lock().unwrap().pop_front();
        match next.or_else(|| self.default_body.clone()) {
            Some(content) => Ok(ChatResponse { content, usage_tokens: self.usage_tokens }),
            None => Err(Error::Endpoint("mock endpoint exhausted".into())),
        }
    }
}

/// Error-injection knobs for scripted playback. All probabilities default
/// to zero (exact gold playback).
#[derive(Debug, Clone, Copy, Default)]
pub struct NoiseModel {
    /// Probability of silently dropping each call.
    pub omit_prob: f64,
    /// Probability of perturbing each call that carries lat/lon args.
    pub perturb_prob: f64,
    /// Max absolute perturbation, degrees, applied to lat/lon when hit.
    pub coord_delta: f64,
    /// Probability of dropping each reply token.
    pub reply_drop_prob: f64,
}

/// Plays back a scripted trace for each known prompt, as the JSON body a
/// direct-strategy agent would emit. Noise is derived from
/// `(seed, prompt, request seed)` only, so results are identical across
/// any scheduling or concurrency.
pub struct ScriptedAgent {
    label: String,
    exact: BTreeMap<String, Trace>,
    patterns: Vec<(String, Trace)>,
    noise: NoiseModel,
    seed: u64,
    latency: Duration,
}

impl ScriptedAgent {
    pub fn new(label: &str, seed: u64) -> Self {
        Self {
            label: label.into(),
            exact: BTreeMap::new(),
            patterns: Vec::new(),
            noise: NoiseModel::default(),
            seed,
            latency: Duration::ZERO,
        }
    }

    /// Gold-playback script over a benchmark: one exact-prompt entry per task.
    pub fn from_tasks(label: &str, tasks: &[Task], noise: NoiseModel, seed: u64) -> Self {
        let mut agent = Self::new(label, seed);
        agent.noise = noise;
        for task in tasks {
            agent.exact.insert(task.prompt.clone(), task.gold_trace.clone());
        }
        agent
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    /// Add a substring-pattern entry, matched after exact prompts.
    pub fn add_pattern(&mut self, pattern: &str, trace: Trace) {
        self.patterns.push((pattern.into(), trace));
    }

    fn lookup(&self, prompt: &str) -> Option<&Trace> {
        if let Some(trace) = self.exact.get(prompt) {
            return Some(trace);
        }
        self.patterns.iter().find(|(p, _)| prompt.contains(p)).map(|(_, t)| t)
    }

    fn apply_noise(&self, trace: &Trace, prompt: &str, request_seed: Option<u64>) -> Trace {
        let n = &self.noise;
        if n.omit_prob == 0.0 && n.perturb_prob == 0.0 && n.reply_drop_prob == 0.0 {
            return trace.clone();
        }
        let mix = stable_hash64(self.seed ^ request_seed.unwrap_or(0), prompt);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);

        let mut calls = Vec::with_capacity(trace.calls.len());
        for call in &trace.calls {
            if n.omit_prob > 0.0 && rng.gen_bool(n.omit_prob) {
                continue;
            }
            let mut call = call.clone();
            let has_coords = call.args.contains_key("lat") && call.args.contains_key("lon");
            if has_coords && n.perturb_prob > 0.0 && rng.gen_bool(n.perturb_prob) {
                for key in ["lat", "lon"] {
                    let delta = rng.gen_range(-n.coord_delta..=n.coord_delta);
                    if let Some(v) = call.args.get(key).and_then(Value::as_f64) {
                        call.args.insert(key.into(), json!(v + delta));
                    }
                }
            }
            calls.push(call);
        }

        let reply = trace.reply.as_ref().map(|r| {
            if n.reply_drop_prob == 0.0 {
                r.clone()
            } else {
                r.split_whitespace()
                    .filter(|_| !rng.gen_bool(n.reply_drop_prob))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        });
        Trace::new(calls, reply)
    }
}

impl AgentEndpoint for ScriptedAgent {
    fn name(&self) -> &str {
        &self.label
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse> {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let prompt = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        let trace = self
            .lookup(prompt)
            .ok_or_else(|| Error::ScriptMiss(prompt.chars().take(120).collect()))?;
        let noisy = self.apply_noise(trace, prompt, request.seed);
        let body = json!({
            "calls": noisy.calls,
            "reply": noisy.reply.unwrap_or_default(),
        });
        Ok(ChatResponse { content: body.to_string(), usage_tokens: None })
    }
}

/// Always fails with a transient error; used to exercise endpoint
/// redistribution in the orchestrator.
pub struct FailingEndpoint {
    label: String,
}

impl FailingEndpoint {
    pub fn new(label: &str) -> Self {
        Self { label: label.into() }
    }
}

impl AgentEndpoint for FailingEndpoint {
    fn name(&self) -> &str {
        &self.label
    }

    fn chat(&self, _request: &ChatRequest) -> Result<ChatResponse> {
        Err(Error::Endpoint(format!("transient: {} is down", self.label)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Message;

    fn request_for(prompt: &str, seed: Option<u64>) -> ChatRequest {
        ChatRequest {
            messages: vec![Message::system("tools"), Message::user(prompt)],
            json_mode: true,
            temperature: 0.7,
            max_tokens: None,
            seed,
        }
    }

    #[test]
    fn mock_returns_canned_then_default() {
        let mock = MockEndpoint::new("echo", vec!["first".into()]).with_default("rest");
        assert_eq!(mock.chat(&request_for("x", None)).unwrap().content, "first");
        assert_eq!(mock.chat(&request_for("x", None)).unwrap().content, "rest");
        assert_eq!(mock.chat(&request_for("x", None)).unwrap().content, "rest");
    }

    #[test]
    fn scripted_agent_plays_back_gold_json() {
        let mut agent = ScriptedAgent::new("gold", 1);
        let trace = Trace::new(
            vec![crate::tools::ToolCall::new("count_results")],
            Some("one result".into()),
        );
        agent.add_pattern("count things", trace);
        let body = agent.chat(&request_for("please count things now", None)).unwrap().content;
        let value: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(value["calls"][0]["tool"], "count_results");
        assert_eq!(value["reply"], "one result");
    }

    #[test]
    fn scripted_agent_misses_unknown_prompts() {
        let agent = ScriptedAgent::new("gold", 1);
        assert!(matches!(
            agent.chat(&request_for("mystery", None)),
            Err(Error::ScriptMiss(_))
        ));
    }

    #[test]
    fn noise_is_deterministic_per_prompt_and_seed() {
        let mut agent = ScriptedAgent::new("noisy", 9).with_noise(NoiseModel {
            omit_prob: 0.5,
            ..Default::default()
        });
        let calls = (0..6).map(|i| crate::tools::ToolCall::new("count_results").with_arg("i", i));
        agent.add_pattern("task", Trace::new(calls.collect(), Some("r".into())));

        let a = agent.chat(&request_for("the task", Some(3))).unwrap().content;
        let b = agent.chat(&request_for("the task", Some(3))).unwrap().content;
        assert_eq!(a, b);
        let c = agent.chat(&request_for("the task", Some(4))).unwrap().content;
        assert_ne!(a, c, "different request seeds give different samples");
    }

    #[test]
    fn stable_hash_is_stable() {
        assert_eq!(stable_hash64(1, "abc"), stable_hash64(1, "abc"));
        assert_ne!(stable_hash64(1, "abc"), stable_hash64(2, "abc"));
        assert_ne!(stable_hash64(1, "abc"), stable_hash64(1, "abd"));
    }
}
