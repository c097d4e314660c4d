//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Missing or unusable configuration input (fixture files, config keys).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input text is not valid JSON.
    #[error("parse error: {0}")]
    Parse(String),

    /// JSON is well-formed but violates the expected wire shape.
    #[error("schema error: {0}")]
    Schema(String),

    /// A tool call referencing a tool outside the registry, or with
    /// arguments the schema rejects.
    #[error("infeasible action: {0}")]
    Infeasible(String),

    /// Catalog ingestion failed outright (unreadable file, strict-mode abort).
    #[error("ingestion error: {0}")]
    Ingest(String),

    /// Candidate generation exhausted its parse-retry budget.
    #[error("generation error after {attempts} attempts; last output: {last_output}")]
    Generation { attempts: u32, last_output: String },

    /// Self-consistency verification could not complete (endpoint failures
    /// beyond the retry budget). The candidate is neither accepted nor rejected.
    #[error("verification aborted: {0}")]
    VerificationAborted(String),

    /// A persisted benchmark failed gold-trace replay validation.
    #[error("benchmark corruption in tasks: {}", task_ids.join(", "))]
    BenchmarkCorruption { task_ids: Vec<String> },

    /// A gold trace no longer reproduces its recorded fingerprint; the task
    /// is a benchmark defect and is excluded from aggregates.
    #[error("invalid task {task_id}: {detail}")]
    InvalidTask { task_id: String, detail: String },

    /// Non-retryable endpoint failure (HTTP status, protocol error).
    #[error("endpoint error: {0}")]
    Endpoint(String),

    /// Endpoint did not respond within the retry budget.
    #[error("endpoint timeout: {0}")]
    EndpointTimeout(String),

    /// A scripted agent received a prompt no script entry matches.
    #[error("scripted agent has no entry matching prompt: {0}")]
    ScriptMiss(String),

    /// Metric aggregation over misaligned inputs.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    /// A metric that is undefined on the given input (e.g. empty report set).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
