//! Deterministic network simulator with an in-path adversary for the
//! vauth protocols.

pub mod authenticity;
pub mod config;
pub mod exec;
pub mod forgery;
pub mod knowledge;
pub mod matrix;
pub mod network;
pub mod scenario;
pub mod transcript;
pub mod vectors;
pub mod world;

pub use config::{load_config, parse_config, ConfigError, Overrides, ScenarioConfig, Strategy};
pub use knowledge::Knowledge;
pub use matrix::{emit_report, run_matrix, MatrixReport, ReportFormat};
pub use scenario::{impersonate_corrupted, run_honest, run_scenario, Criterion, HonestRun, ScenarioError, ScenarioResult};
