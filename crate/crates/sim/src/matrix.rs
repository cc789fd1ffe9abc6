//! Protocol × strategy grids and their reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use vauth_core::ProtocolMode;

use crate::config::{ScenarioConfig, Strategy};
use crate::exec;
use crate::scenario::{run_scenario, Criterion, ScenarioError, ScenarioResult};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub mode: ProtocolMode,
    pub strategy: Strategy,
    pub seed: u64,
    pub adversary_success: bool,
    pub criterion: Criterion,
    pub abort_reasons: Vec<String>,
    pub frame_count: usize,
    pub closure_contains_session_key: bool,
}

impl Cell {
    pub fn from_result(r: &ScenarioResult) -> Cell {
        Cell {
            mode: r.mode,
            strategy: r.strategy,
            seed: r.seed,
            adversary_success: r.adversary_success,
            criterion: r.criterion,
            abort_reasons: r.abort_reasons(),
            frame_count: r.frame_count,
            closure_contains_session_key: r.closure_contains_session_key,
        }
    }
}

/// One cell per requested (mode, strategy) pair, keyed so that assembly
/// order does not matter.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatrixReport {
    pub cells: BTreeMap<(ProtocolMode, Strategy), Cell>,
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("no protocol modes requested")]
    NoModes,
    #[error("no strategies requested")]
    NoStrategies,
    #[error("{mode} × {strategy}: {source}")]
    Scenario {
        mode: ProtocolMode,
        strategy: Strategy,
        #[source]
        source: ScenarioError,
    },
}

/// First eight octets of `SHA-256(seed ‖ mode ‖ strategy)`, big-endian.
pub fn derive_seed(base: u64, mode: ProtocolMode, strategy: Strategy) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_be_bytes());
    h.update(mode.as_str().as_bytes());
    h.update(strategy.as_str().as_bytes());
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("8 octets"))
}

/// The scenario each cell runs, in mode-major order.
pub fn cell_configs(
    modes: &[ProtocolMode],
    strategies: &[Strategy],
    base: &ScenarioConfig,
) -> Result<Vec<ScenarioConfig>, MatrixError> {
    if modes.is_empty() {
        return Err(MatrixError::NoModes);
    }
    if strategies.is_empty() {
        return Err(MatrixError::NoStrategies);
    }
    let mut out = Vec::new();
    for &mode in modes {
        for &strategy in strategies {
            let mut cfg = base.clone();
            cfg.mode = mode;
            cfg.strategy = strategy;
            cfg.seed = derive_seed(base.seed, mode, strategy);
            cfg.id = format!("{}-{mode}-{strategy}", base.id);
            out.push(cfg);
        }
    }
    Ok(out)
}

impl MatrixReport {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a ScenarioResult>) -> MatrixReport {
        MatrixReport {
            cells: results.into_iter().map(|r| ((r.mode, r.strategy), Cell::from_result(r))).collect(),
        }
    }
}

fn collect(results: Vec<Result<ScenarioResult, Box<(ScenarioConfig, ScenarioError)>>>) -> Result<MatrixReport, MatrixError> {
    let mut report = MatrixReport::default();
    for r in results {
        let r = r.map_err(|failed| {
            let (cfg, source) = *failed;
            MatrixError::Scenario {
            mode: cfg.mode,
                strategy: cfg.strategy,
                source,
            }
        })?;
        report.cells.insert((r.mode, r.strategy), Cell::from_result(&r));
    }
    Ok(report)
}

fn run_one(cfg: &ScenarioConfig) -> Result<ScenarioResult, Box<(ScenarioConfig, ScenarioError)>> {
    run_scenario(cfg).map_err(|e| Box::new((cfg.clone(), e)))
}

/// Runs every cell, in parallel when the `parallel` feature is on.
pub fn run_matrix(
    modes: &[ProtocolMode],
    strategies: &[Strategy],
    base: &ScenarioConfig,
) -> Result<MatrixReport, MatrixError> {
    let cfgs = cell_configs(modes, strategies, base)?;
    collect(exec::parallel_map(&cfgs, run_one))
}

pub fn run_matrix_sequential(
    modes: &[ProtocolMode],
    strategies: &[Strategy],
    base: &ScenarioConfig,
) -> Result<MatrixReport, MatrixError> {
    let cfgs = cell_configs(modes, strategies, base)?;
    collect(exec::sequential_map(&cfgs, run_one))
}

/// Full results of a batch of independent scenarios, in input order.
pub fn run_batch(cfgs: &[ScenarioConfig]) -> Vec<Result<ScenarioResult, ScenarioError>> {
    exec::parallel_map(cfgs, run_scenario)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    JsonLines,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::TextTable),
            "jsonl" => Ok(ReportFormat::JsonLines),
            _ => Err(format!("unknown format `{s}` (expected text or jsonl)")),
        }
    }
}

const COLUMNS: [&str; 7] = ["mode", "strategy", "success", "criterion", "frames", "closure_key", "aborts"];

pub fn emit_report(report: &MatrixReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::JsonLines => report
            .cells
            .values()
            .map(|c| serde_json::to_string(c).expect("cells serialize") + "\n")
            .collect(),
        ReportFormat::TextTable => text_table(report),
    }
}

fn text_table(report: &MatrixReport) -> String {
    let rows: Vec<[String; 7]> = report
        .cells
        .values()
        .map(|c| {
            [
                c.mode.to_string(),
                c.strategy.to_string(),
                c.adversary_success.to_string(),
                c.criterion.to_string(),
                c.frame_count.to_string(),
                c.closure_contains_session_key.to_string(),
                if c.abort_reasons.is_empty() {
                    "-".to_string()
                } else {
                    c.abort_reasons.join(",")
                },
            ]
        })
        .collect();
    let mut widths = COLUMNS.map(str::len);
    for row in &rows {
        for (w, v) in widths.iter_mut().zip(row) {
            *w = (*w).max(v.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let mut l = String::new();
        for (i, (v, w)) in cells.iter().zip(widths).enumerate() {
            if i + 1 == cells.len() {
                l.push_str(v);
            } else {
                let _ = write!(l, "{v:<w$}  ");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&mut out, &COLUMNS);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}

/// Inverse of the JSON-lines report.
pub fn parse_json_lines(text: &str) -> Result<MatrixReport, serde_json::Error> {
    let mut report = MatrixReport::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let c: Cell = serde_json::from_str(line)?;
        report.cells.insert((c.mode, c.strategy), c);
    }
    Ok(report)
}

/// Claimed outcomes, one `mode strategy true|false` per line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expectations {
    pub outcomes: BTreeMap<(ProtocolMode, Strategy), bool>,
}

impl Expectations {
    pub fn parse(text: &str) -> Result<Expectations, String> {
        let mut outcomes = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| format!("line {}: {m}", i + 1);
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [mode, strategy, outcome] = parts[..] else {
                return Err(at("expected `mode strategy true|false`".into()));
            };
            let mode: ProtocolMode = mode.parse().map_err(at)?;
            let strategy: Strategy = strategy.parse().map_err(at)?;
            let outcome = match outcome {
                "true" => true,
                "false" => false,
                other => return Err(at(format!("expected true or false, found `{other}`"))),
            };
            if outcomes.insert((mode, strategy), outcome).is_some() {
                return Err(at(format!("duplicate entry for {mode} {strategy}")));
            }
        }
        Ok(Expectations { outcomes })
    }

    pub fn modes(&self) -> Vec<ProtocolMode> {
        let mut m: Vec<_> = self.outcomes.keys().map(|(m, _)| *m).collect();
        m.dedup();
        m
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let mut s: Vec<_> = self.outcomes.keys().map(|(_, s)| *s).collect();
        s.sort();
        s.dedup();
        s
    }

    /// One line per cell whose outcome differs from, or is missing in,
    /// the report.
    pub fn diff(&self, report: &MatrixReport) -> Vec<String> {
        let mut out = Vec::new();
        for (&(mode, strategy), &expected) in &self.outcomes {
            match report.cells.get(&(mode, strategy)) {
                None => out.push(format!("{mode} {strategy}: expected {expected}, cell missing")),
                Some(c) if c.adversary_success != expected => out.push(format!(
                    "{mode} {strategy}: expected {expected}, got {} (aborts: {})",
                    c.adversary_success,
                    if c.abort_reasons.is_empty() { "-".to_string() } else { c.abort_reasons.join(",") }
                )),
                Some(_) => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_derivation_is_sha256_prefix() {
        let d = Sha256::digest([&7u64.to_be_bytes()[..], b"base", b"passive"].concat());
        assert_eq!(
            derive_seed(7, ProtocolMode::Base, Strategy::Passive),
            u64::from_be_bytes(d[..8].try_into().unwrap())
        );
        assert_ne!(
            derive_seed(7, ProtocolMode::Base, Strategy::Passive),
            derive_seed(7, ProtocolMode::Base, Strategy::MitmRelay)
        );
    }

    #[test]
    fn empty_lists_are_rejected() {
        let base = ScenarioConfig::new(ProtocolMode::Base, Strategy::Passive, 1);
        assert!(matches!(run_matrix(&[], &[Strategy::Passive], &base), Err(MatrixError::NoModes)));
        assert!(matches!(
            run_matrix(&[ProtocolMode::Base], &[], &base),
            Err(MatrixError::NoStrategies)
        ));
    }

    #[test]
    fn expectations_parse_and_diff() {
        let e = Expectations::parse("# claims\nbase passive false\nbase mitm_relay false # gated\n").unwrap();
        assert_eq!(e.outcomes.len(), 2);
        let mut report = MatrixReport::default();
        report.cells.insert(
            (ProtocolMode::Base, Strategy::Passive),
            Cell {
                mode: ProtocolMode::Base,
                strategy: Strategy::Passive,
                seed: 0,
                adversary_success: true,
                criterion: Criterion::SecrecyBreach,
                abort_reasons: vec![],
                frame_count: 2,
                closure_contains_session_key: true,
            },
        );
        let diff = e.diff(&report);
        assert_eq!(diff.len(), 2);
        assert!(diff[0].contains("cell missing") || diff[1].contains("cell missing"));
        assert!(Expectations::parse("base passive maybe").is_err());
        assert!(Expectations::parse("dh2 passive true").is_err());
    }

    #[test]
    fn criterion_names_match_json() {
        for strategy in Strategy::ALL {
            let c = Criterion::for_strategy(strategy);
            assert_eq!(serde_json::to_value(c).unwrap(), c.as_str());
        }
        let c = Criterion::ImpersonationAccepted;
        assert_eq!(serde_json::to_value(c).unwrap(), c.as_str());
    }
}
