//! Agent drivers: endpoint clients, prompting strategies, and the loop that
//! turns a task prompt into a [`Trace`].

pub mod http;
pub mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checker::Task;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::tools::{render_tool_docs, ToolCall, ToolRegistry, Trace};

/// Tool name recorded for model output that failed to parse; it is outside
/// the registry, so the checker classifies it as an infeasible action.
pub const UNPARSEABLE_TOOL: &str = "__unparseable__";

/// One chat message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

/// One chat-completion request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub json_mode: bool,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Sampling nonce forwarded to the backend (or mixed into mock noise);
    /// distinct values yield independent samples at nonzero temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One chat-completion response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub usage_tokens: Option<u64>,
}

/// A chat backend. Implementations are shared, thread-safe clients.
pub trait AgentEndpoint: Send + Sync {
    fn name(&self) -> &str;
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse>;
}

/// Capped exponential backoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_delay_ms: 100, max_delay_ms: 5_000 }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.min(20);
        Duration::from_millis((self.base_delay_ms.saturating_mul(factor)).min(self.max_delay_ms))
    }
}

/// Whether an error is worth another attempt. Transient endpoint failures
/// (timeouts, throttling, 5xx) are; everything else is not.
pub fn is_retryable(err: &Error) -> bool {
    match err {
        Error::EndpointTimeout(_) => true,
        Error::Endpoint(msg) => msg.starts_with("transient"),
        _ => false,
    }
}

/// Run `op` under the retry policy; `attempts_log` receives one entry per
/// attempt made.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    mut op: impl FnMut(u32) -> Result<T>,
    attempts_log: &mut Vec<u32>,
) -> Result<T> {
    let mut last_err = None;
    for attempt in 0..policy.max_attempts.max(1) {
        attempts_log.push(attempt + 1);
        match op(attempt) {
            Ok(value) => return Ok(value),
            Err(err) if is_retryable(&err) && attempt + 1 < policy.max_attempts.max(1) => {
                std::thread::sleep(policy.delay_for(attempt));
                last_err = Some(err);
            }
            Err(err) => return Err(err),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Endpoint("retry budget exhausted".into())))
}

/// Prompting strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Direct,
    Cot,
    React,
    PlanExecute,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Strategy::Direct),
            "cot" => Ok(Strategy::Cot),
            "react" => Ok(Strategy::React),
            "plan_execute" | "plan-execute" => Ok(Strategy::PlanExecute),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Direct => "direct",
            Strategy::Cot => "cot",
            Strategy::React => "react",
            Strategy::PlanExecute => "plan_execute",
        }
    }
}

/// Agent loop configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub strategy: Strategy,
    /// Few-shot example count; 0 means zero-shot.
    pub shots: usize,
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens_budget: Option<u64>,
    pub temperature: f64,
    /// Sampling nonce forwarded on every request; see [`ChatRequest::seed`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_seed: Option<u64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Direct,
            shots: 0,
            max_steps: 20,
            max_tokens_budget: None,
            temperature: 0.0,
            request_seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: String,
    pub content: String,
}

/// The assembled result of one agent run.
#[derive(Debug, Clone)]
pub struct AgentRun {
    pub trace: Trace,
    pub transcript: Vec<TranscriptEntry>,
    pub truncated: bool,
}

struct RunState<'a> {
    endpoint: &'a dyn AgentEndpoint,
    config: &'a AgentConfig,
    transcript: Vec<TranscriptEntry>,
    used_tokens: u64,
    any_usage_missing: bool,
    truncated: bool,
}

impl<'a> RunState<'a> {
    fn new(endpoint: &'a dyn AgentEndpoint, config: &'a AgentConfig) -> Self {
        Self {
            endpoint,
            config,
            transcript: Vec::new(),
            used_tokens: 0,
            any_usage_missing: false,
            truncated: false,
        }
    }

    fn record(&mut self, messages: &[Message]) {
        for m in messages {
            self.transcript.push(TranscriptEntry { role: m.role.clone(), content: m.content.clone() });
        }
    }

    fn complete(&mut self, messages: &[Message]) -> Result<String> {
        let response = self.endpoint.chat(&ChatRequest {
            messages: messages.to_vec(),
            json_mode: true,
            temperature: self.config.temperature,
            max_tokens: None,
            seed: self.config.request_seed,
        })?;
        match response.usage_tokens {
            Some(n) => self.used_tokens += n,
            None => {
                self.any_usage_missing = true;
                self.used_tokens += response.content.split_whitespace().count() as u64;
            }
        }
        self.transcript
            .push(TranscriptEntry { role: "assistant".into(), content: response.content.clone() });
        if let Some(budget) = self.config.max_tokens_budget {
            if self.used_tokens > budget {
                self.truncated = true;
            }
        }
        Ok(response.content)
    }
}

fn build_system_prompt(
    strategy: Strategy,
    registry: &ToolRegistry,
    few_shot: &[Task],
    shots: usize,
) -> String {
    let mut out = String::from(
        "You are an agent operating a simulated Earth-Observation workbench. \
         You act only by calling the tools below.\n\nAvailable tools:\n\n",
    );
    out.push_str(&render_tool_docs(registry));
    match strategy {
        Strategy::Direct => out.push_str(
            "Respond with exactly one JSON object of the form \
             {\"calls\": [{\"tool\": \"...\", \"args\": {...}}, ...], \"reply\": \"...\"} \
             giving the ordered tool calls that solve the task and the final reply to the user.\n",
        ),
        Strategy::Cot => out.push_str(
            "Think step by step. Respond with exactly one JSON object of the form \
             {\"reasoning\": \"...\", \"calls\": [{\"tool\": \"...\", \"args\": {...}}, ...], \"reply\": \"...\"}. \
             Work through the task in the reasoning field before committing to the calls.\n",
        ),
        Strategy::React => out.push_str(
            "Solve the task one step at a time. At each step respond with exactly one JSON object: \
             {\"thought\": \"...\", \"tool\": \"...\", \"args\": {...}} to take an action, or \
             {\"thought\": \"...\", \"final_answer\": \"...\"} when done. \
             After each action you will receive an observation.\n",
        ),
        Strategy::PlanExecute => out.push_str(
            "You will first produce a plan, then execute it one tool call per step as instructed.\n",
        ),
    }
    let k = shots.min(few_shot.len());
    for (i, task) in few_shot.iter().take(k).enumerate() {
        let solution = serde_json::json!({
            "calls": task.gold_trace.calls,
            "reply": task.gold_trace.reply.clone().unwrap_or_default(),
        });
        out.push_str(&format!("\nExample {}:\nTask: {}\nSolution: {}\n", i + 1, task.prompt, solution));
    }
    out
}

fn parse_call_value(value: &Value) -> ToolCall {
    let tool = value.get("tool").and_then(Value::as_str);
    let args = value.get("args").and_then(Value::as_object);
    match (tool, args) {
        (Some(tool), Some(args)) => ToolCall {
            tool: tool.to_string(),
            args: args.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        },
        (Some(tool), None) => ToolCall::new(tool),
        _ => ToolCall::new(UNPARSEABLE_TOOL).with_arg("raw", value.to_string()),
    }
}

fn parse_batch_output(content: &str) -> (Vec<ToolCall>, Option<String>) {
    let Ok(value) = serde_json::from_str::<Value>(content.trim()) else {
        return (
            vec![ToolCall::new(UNPARSEABLE_TOOL).with_arg("raw", content)],
            None,
        );
    };
    let calls = match value.get("calls").and_then(Value::as_array) {
        Some(items) => items.iter().map(parse_call_value).collect(),
        None => vec![ToolCall::new(UNPARSEABLE_TOOL).with_arg("raw", content)],
    };
    let reply = value.get("reply").and_then(Value::as_str).map(|s| s.to_string());
    (calls, reply)
}

/// Drive one task prompt through the configured strategy, returning the
/// assembled trace with token accounting and the full transcript.
pub fn run_agent(
    config: &AgentConfig,
    endpoint: &dyn AgentEndpoint,
    task_prompt: &str,
    env: &Environment,
    registry: &ToolRegistry,
    few_shot_pool: &[Task],
) -> Result<AgentRun> {
    let system = build_system_prompt(config.strategy, registry, few_shot_pool, config.shots);
    let mut run = RunState::new(endpoint, config);

    let (calls, reply) = match config.strategy {
        Strategy::Direct | Strategy::Cot => {
            let messages = vec![Message::system(system), Message::user(task_prompt)];
            run.record(&messages);
            let content = run.complete(&messages)?;
            parse_batch_output(&content)
        }
        Strategy::React => react_loop(&mut run, system, task_prompt, env)?,
        Strategy::PlanExecute => plan_execute(&mut run, system, task_prompt)?,
    };

    let mut trace = Trace::new(calls, reply);
    trace.transcript_tokens = Some(run.used_tokens);
    Ok(AgentRun { trace, transcript: run.transcript, truncated: run.truncated })
}

fn react_loop(
    run: &mut RunState,
    system: String,
    task_prompt: &str,
    env: &Environment,
) -> Result<(Vec<ToolCall>, Option<String>)> {
    let mut messages = vec![Message::system(system), Message::user(task_prompt)];
    run.record(&messages);

    let mut calls = Vec::new();
    let mut reply = None;
    let mut state = env.initial_state();

    for _ in 0..run.config.max_steps {
        let content = run.complete(&messages)?;
        messages.push(Message::assistant(content.clone()));

        let step: Value = match serde_json::from_str(content.trim()) {
            Ok(v) => v,
            Err(_) => {
                calls.push(ToolCall::new(UNPARSEABLE_TOOL).with_arg("raw", content));
                let note = Message::user("Observation: response was not valid JSON; emit one JSON object.");
                run.record(std::slice::from_ref(&note));
                messages.push(note);
                continue;
            }
        };
        if let Some(answer) = step.get("final_answer").and_then(Value::as_str) {
            reply = Some(answer.to_string());
            break;
        }
        let call = parse_call_value(&step);
        let observation = match env.apply_tool(&state, &call) {
            Ok((next, obs)) => {
                state = next;
                obs.message
            }
            Err(err) => format!("infeasible: {err}"),
        };
        calls.push(call);
        let note = Message::user(format!("Observation: {observation}"));
        run.record(std::slice::from_ref(&note));
        messages.push(note);

        if run.truncated {
            break;
        }
    }
    Ok((calls, reply))
}

fn plan_execute(
    run: &mut RunState,
    system: String,
    task_prompt: &str,
) -> Result<(Vec<ToolCall>, Option<String>)> {
    let plan_messages = vec![
        Message::system(system.clone()),
        Message::user(format!(
            "Task: {task_prompt}\n\nRespond with one JSON object {{\"plan\": [\"step\", ...]}} \
             decomposing the task, one tool call per step."
        )),
    ];
    run.record(&plan_messages);
    let plan_content = run.complete(&plan_messages)?;
    let plan: Vec<String> = serde_json::from_str::<Value>(plan_content.trim())
        .ok()
        .and_then(|v| v.get("plan").and_then(Value::as_array).cloned())
        .map(|steps| {
            steps
                .iter()
                .filter_map(|s| s.as_str().map(|s| s.to_string()))
                .collect()
        })
        .unwrap_or_default();

    let mut calls = Vec::new();
    if plan.is_empty() {
        calls.push(ToolCall::new(UNPARSEABLE_TOOL).with_arg("raw", plan_content.clone()));
    }

    for (i, step) in plan.iter().enumerate().take(run.config.max_steps) {
        if run.truncated {
            break;
        }
        let step_messages = vec![
            Message::system(system.clone()),
            Message::user(format!(
                "Task: {task_prompt}\nPlan: {plan:?}\n\nExecute step {}: {step}\n\
                 Respond with one JSON object {{\"tool\": \"...\", \"args\": {{...}}}}.",
                i + 1
            )),
        ];
        run.record(&step_messages);
        let content = run.complete(&step_messages)?;
        match serde_json::from_str::<Value>(content.trim()) {
            Ok(value) => calls.push(parse_call_value(&value)),
            Err(_) => calls.push(ToolCall::new(UNPARSEABLE_TOOL).with_arg("raw", content)),
        }
    }

    let reply = if run.truncated {
        None
    } else {
        let reply_messages = vec![
            Message::system(system),
            Message::user(format!(
                "Task: {task_prompt}\nAll plan steps are executed. Respond with one JSON object \
                 {{\"reply\": \"...\"}} containing the final reply to the user."
            )),
        ];
        run.record(&reply_messages);
        let content = run.complete(&reply_messages)?;
        serde_json::from_str::<Value>(content.trim())
            .ok()
            .and_then(|v| v.get("reply").and_then(Value::as_str).map(|s| s.to_string()))
    };

    Ok((calls, reply))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retry_contract_three_attempts() {
        let policy = RetryPolicy { max_attempts: 3, base_delay_ms: 1, max_delay_ms: 2 };
        let mut attempts = Vec::new();
        let mut failures = 2;
        let result = with_retries(
            &policy,
            |_| {
                if failures > 0 {
                    failures -= 1;
                    Err(Error::EndpointTimeout("slow".into()))
                } else {
                    Ok(42)
                }
            },
            &mut attempts,
        );
        assert_eq!(result.unwrap(), 42);
        assert_eq!(attempts, vec![1, 2, 3]);
    }

    #[test]
    fn retry_gives_up_after_budget() {
        let policy = RetryPolicy { max_attempts: 2, base_delay_ms: 1, max_delay_ms: 1 };
        let mut attempts = Vec::new();
        let result: Result<()> = with_retries(
            &policy,
            |_| Err(Error::EndpointTimeout("always".into())),
            &mut attempts,
        );
        assert!(matches!(result, Err(Error::EndpointTimeout(_))));
        assert_eq!(attempts.len(), 2);
    }

    #[test]
    fn non_retryable_errors_fail_fast() {
        let policy = RetryPolicy { max_attempts: 5, base_delay_ms: 1, max_delay_ms: 1 };
        let mut attempts = Vec::new();
        let result: Result<()> =
            with_retries(&policy, |_| Err(Error::Endpoint("status 401".into())), &mut attempts);
        assert!(result.is_err());
        assert_eq!(attempts.len(), 1);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("react".parse::<Strategy>().unwrap(), Strategy::React);
        assert_eq!("plan-execute".parse::<Strategy>().unwrap(), Strategy::PlanExecute);
        assert!("magic".parse::<Strategy>().is_err());
    }

    #[test]
    fn batch_parse_tolerates_garbage() {
        let (calls, reply) = parse_batch_output("not json");
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].tool, UNPARSEABLE_TOOL);
        assert!(reply.is_none());

        let (calls, reply) =
            parse_batch_output(r#"{"calls":[{"tool":"count_results","args":{}}],"reply":"done"}"#);
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].tool, "count_results");
        assert_eq!(reply.as_deref(), Some("done"));
    }
}
