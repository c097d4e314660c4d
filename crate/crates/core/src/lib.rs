//! Deterministic Earth-Observation workbench simulation and agent
//! evaluation engine.
//!
//! The crate is organized around the evaluation pipeline:
//!
//! - [`catalog`]: satellite-image metadata records and the filter engine
//! - [`fixtures`]: gazetteer and document corpora behind the simulated tools
//! - [`tools`]: tool registry, call schemas, and wire parsing
//! - [`env`]: the deterministic state machine and state fingerprints
//! - [`checker`]: functional-correctness and task-success model checks
//! - [`metrics`]: ROUGE-L, set F1, and benchmark-level aggregation
//! - [`benchgen`]: benchmark generation with self-consistency verification
//! - [`agents`]: endpoint clients, prompting strategies, and scripted agents
//! - [`orchestrator`]: parallel, resumable benchmark execution and sweeps

pub mod agents;
pub mod benchgen;
pub mod catalog;
pub mod checker;
pub mod config;
pub mod env;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod tools;

pub use config::{EngineConfig, ToleranceConfig};
pub use env::{Environment, EnvironmentState, Observation, StateFingerprint};
pub use error::{Error, Result};
pub use tools::{ToolCall, ToolRegistry, Trace};
