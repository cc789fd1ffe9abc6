//! `vauth`: run scenarios, attack matrices and wire vectors from the shell.

mod explain;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vauth_core::suite::SuiteId;
use vauth_core::ProtocolMode;
use vauth_sim::matrix::{cell_configs, run_batch, Expectations};
use vauth_sim::{
    emit_report, load_config, vectors, MatrixReport, Overrides, ReportFormat, ScenarioConfig, ScenarioResult, Strategy,
};

#[derive(Parser)]
#[command(name = "vauth", version, about = "Attribute-coupled vehicle authentication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and report its outcome.
    Run(Common),
    /// Run every mode × strategy cell.
    Matrix(Common),
    /// Print the wire-format test vectors.
    Vectors {
        #[arg(long, default_value = "toy-v1")]
        suite: SuiteId,
    },
    /// Run one scenario and narrate it frame by frame.
    Explain(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file; flags given on the command line override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Protocol mode; a comma-separated list for `matrix`.
    #[arg(long, value_name = "M")]
    mode: Option<String>,
    /// Adversary strategy; a comma-separated list for `matrix`.
    #[arg(long, value_name = "S")]
    strategy: Option<String>,
    #[arg(long, default_value = "text", value_parser = parse_format)]
    format: ReportFormat,
    /// Claimed outcomes; the exit status is 1 when any differs.
    #[arg(long, value_name = "PATH")]
    expect: Option<PathBuf>,
    /// Write each scenario's transcript here.
    #[arg(long, value_name = "PATH")]
    transcript_dir: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

/// Failure that ends the process with status 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(&args),
        Command::Matrix(args) => matrix(&args),
        Command::Explain(args) => scenario(&args, false).map(|cfg| {
            print!("{}", explain::narrate(&cfg, args.verbose));
            true
        }),
        Command::Vectors { suite } => vectors::generate(suite)
            .map(|text| {
                print!("{text}");
                true
            })
            .map_err(Fatal::from),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// The scenario named by `--config` and the flags. With `lists` the mode
/// and strategy flags are left for the caller to expand.
fn scenario(args: &Common, lists: bool) -> Result<ScenarioConfig, Fatal> {
    let overrides = Overrides {
        seed: args.seed,
        mode: if lists { None } else { args.mode.clone() },
        strategy: if lists { None } else { args.strategy.clone() },
    };
    if let Some(path) = &args.config {
        return Ok(load_config(path, &overrides)?);
    }
    let mode: ProtocolMode = overrides.mode.as_deref().unwrap_or("base").parse()?;
    let strategy: Strategy = overrides.strategy.as_deref().unwrap_or("passive").parse()?;
    Ok(ScenarioConfig::new(mode, strategy, args.seed.unwrap_or(0)))
}

fn expectations(args: &Common) -> Result<Option<Expectations>, Fatal> {
    let Some(path) = &args.expect else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Fatal(format!("cannot read {}: {e}", path.display())))?;
    Expectations::parse(&text)
        .map(Some)
        .map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn write_transcripts(dir: &Path, results: &[ScenarioResult], verbose: bool) -> Result<(), Fatal> {
    std::fs::create_dir_all(dir).map_err(|e| Fatal(format!("cannot create {}: {e}", dir.display())))?;
    for r in results {
        let path = dir.join(format!("{}.transcript", r.scenario));
        std::fs::write(&path, r.transcript.export(verbose))
            .map_err(|e| Fatal(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Prints the report and any disagreement with the expectations. True when
/// there is none.
fn report(args: &Common, report: &MatrixReport, expected: Option<&Expectations>) -> bool {
    print!("{}", emit_report(report, args.format));
    let diff = expected.map(|e| e.diff(report)).unwrap_or_default();
    for line in &diff {
        eprintln!("mismatch: {line}");
    }
    diff.is_empty()
}

fn run(args: &Common) -> Result<bool, Fatal> {
    let cfg = scenario(args, false)?;
    let result = vauth_sim::run_scenario(&cfg)?;
    if let Some(dir) = &args.transcript_dir {
        write_transcripts(dir, std::slice::from_ref(&result), args.verbose)?;
    }
    let expected = expectations(args)?.map(|mut e| {
        e.outcomes.retain(|&k, _| k == (cfg.mode, cfg.strategy));
        e
    });
    if expected.as_ref().is_some_and(|e| e.outcomes.is_empty()) {
        return Err(Fatal(format!("no expectation for {} {}", cfg.mode, cfg.strategy)));
    }
    if args.verbose {
        for line in result.transcript.export(false).lines() {
            eprintln!("{line}");
        }
    }
    Ok(report(args, &MatrixReport::from_results([&result]), expected.as_ref()))
}

fn parse_list<T: std::str::FromStr<Err = String>>(list: &str) -> Result<Vec<T>, Fatal> {
    list.split(',').map(|s| s.trim().parse().map_err(Fatal)).collect()
}

fn matrix(args: &Common) -> Result<bool, Fatal> {
    let base = scenario(args, true)?;
    let expected = expectations(args)?;
    let modes = match (&args.mode, &expected) {
        (Some(list), _) => parse_list(list)?,
        (None, Some(e)) => e.modes(),
        (None, None) => ProtocolMode::ALL.to_vec(),
    };
    let strategies = match (&args.strategy, &expected) {
        (Some(list), _) => parse_list(list)?,
        (None, Some(e)) => e.strategies(),
        (None, None) => Strategy::ALL.to_vec(),
    };
    let cfgs = cell_configs(&modes, &strategies, &base)?;
    let results = run_batch(&cfgs).into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = &args.transcript_dir {
        write_transcripts(dir, &results, args.verbose)?;
    }
    Ok(report(args, &MatrixReport::from_results(&results), expected.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_parse_and_report_the_bad_entry() {
        let modes: Vec<ProtocolMode> = parse_list("base, sigma").unwrap_or_else(|Fatal(m)| panic!("{m}"));
        assert_eq!(modes, [ProtocolMode::Base, ProtocolMode::Sigma]);
        let Err(Fatal(msg)) = parse_list::<Strategy>("passive,nap") else { panic!() };
        assert!(msg.contains("nap"));
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from(["vauth", "matrix", "--mode", "base,tls", "--format", "jsonl", "--verbose"]).unwrap();
        let Command::Matrix(args) = cli.command else { panic!() };
        assert_eq!(args.format, ReportFormat::JsonLines);
        assert!(args.verbose);
        assert!(Cli::try_parse_from(["vauth", "run", "--format", "csv"]).is_err());
    }
}
