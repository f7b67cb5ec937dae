//! `kflow <scenario> --config <path> [--out <dir>] [--seed <int>]`
//!
//! Exit codes: 0 = success and zero audit violations, 2 = completed with
//! audit violations, 1 = runtime failure.

use std::process::ExitCode;

use kflow_cli::config::{parse_config, Scenario};
use kflow_cli::scenario::run_scenario;

const USAGE: &str = "usage: kflow <cap|flow|verify|exhaust|convergence> --config <path> [--out <dir>] [--seed <int>]

Scenarios read a JSON config (see README). `--out` overrides output.directory,
`--seed` overrides the config seed. KFLOW_THREADS caps sweep parallelism.
Exit codes: 0 success, 1 runtime failure, 2 completed with audit violations.";

fn parse_scenario(word: &str) -> Option<Scenario> {
    match word {
        "cap" => Some(Scenario::Cap),
        "flow" => Some(Scenario::Flow),
        "verify" => Some(Scenario::Verify),
        "exhaust" => Some(Scenario::Exhaust),
        "convergence" => Some(Scenario::Convergence),
        _ => None,
    }
}

fn run() -> anyhow::Result<i32> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        println!("{USAGE}");
        return Ok(0);
    }
    let scenario = parse_scenario(&args[0])
        .ok_or_else(|| anyhow::anyhow!("unknown scenario '{}'\n{USAGE}", args[0]))?;

    let mut config_path: Option<String> = None;
    let mut out_override: Option<String> = None;
    let mut seed_override: Option<u64> = None;
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--config" => {
                config_path = Some(
                    it.next()
                        .ok_or_else(|| anyhow::anyhow!("--config needs a path"))?
                        .clone(),
                )
            }
            "--out" => {
                out_override = Some(
                    it.next()
                        .ok_or_else(|| anyhow::anyhow!("--out needs a directory"))?
                        .clone(),
                )
            }
            "--seed" => {
                let raw = it
                    .next()
                    .ok_or_else(|| anyhow::anyhow!("--seed needs an integer"))?;
                seed_override = Some(
                    raw.parse()
                        .map_err(|_| anyhow::anyhow!("--seed: bad integer '{raw}'"))?,
                );
            }
            other => anyhow::bail!("unknown flag '{other}'\n{USAGE}"),
        }
    }
    let config_path =
        config_path.ok_or_else(|| anyhow::anyhow!("--config is required\n{USAGE}"))?;
    let text = std::fs::read_to_string(&config_path)
        .map_err(|e| anyhow::anyhow!("reading {config_path}: {e}"))?;
    let (mut config, warnings) = parse_config(&text)?;
    // the command line picks the scenario; the config's scenario field is
    // the default (so one config can drive a flow run and its verify pass)
    config.scenario = scenario;
    if let Some(dir) = out_override {
        config.output.directory = dir;
    }
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let outcome = run_scenario(&config, &warnings)?;
    for path in &outcome.artifacts {
        eprintln!("wrote {}", path.display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
