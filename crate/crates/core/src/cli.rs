//! Command-line entry point: `run`, `validate` and `sweep`.
//!
//! Exit codes: 0 success, 1 scenario validation failure, 2 runtime error or
//! bad usage.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::agent::{run_episode, Agent, EpisodeResult};
use crate::error::Error;
use crate::io::ledger::FreeEnergyLedger;
use crate::io::scenario::{load_scenario, ScenarioBundle, ScenarioError};
use crate::io::trace::{emit_trace, TraceHeader};
use crate::lab_env::env_reset;
use crate::world_model::{Recording, Script, ScriptedProvider, SharedRecording, TabularProvider, WorldModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "aif", version, about = "Active inference agent on a simulated assay bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one seeded episode and write its trace and ledger.
    Run(RunArgs),
    /// Load and validate a scenario, listing every violation.
    Validate {
        #[arg(long)]
        scenario: String,
    },
    /// Run a range of seeds in parallel and summarize outcomes.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: u64,
    /// JSONL trace output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Rendered ledger output; printed to stdout when omitted.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// `direct`, `tabular`, `scripted:<path>` or `remote:<url>`.
    #[arg(long, default_value = "tabular")]
    provider: String,
    #[arg(long, default_value_t = 20)]
    max_steps: usize,
    /// Write every provider response to a replayable script.
    #[arg(long)]
    record_script: Option<PathBuf>,
    /// Timeout for the remote provider, in milliseconds.
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: String,
    /// Inclusive seed range, e.g. `1..100`.
    #[arg(long)]
    seeds: String,
    /// JSON summary output.
    #[arg(long)]
    summary: PathBuf,
    #[arg(long, default_value_t = 20)]
    max_steps: usize,
    /// Policy that must never be executed first (repeatable).
    #[arg(long, default_values_t = vec!["add_base_immediately".to_string()])]
    forbid: Vec<String>,
}

/// Parses `a..b` (inclusive) into bounds.
pub fn parse_seed_range(s: &str) -> Option<(u64, u64)> {
    let (a, b) = s.split_once("..")?;
    let (a, b) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (a <= b).then_some((a, b))
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn scenario_or_exit(spec: &str) -> Result<ScenarioBundle, i32> {
    load_scenario(spec).map_err(|e: ScenarioError| {
        let code = if e.is_validation() { EXIT_INVALID } else { EXIT_RUNTIME };
        fail(code, e)
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), i32> {
    std::fs::write(path, text).map_err(|e| fail(EXIT_RUNTIME, format!("{}: {e}", path.display())))
}

fn make_provider(args: &RunArgs, bundle: &ScenarioBundle) -> Result<Option<Box<dyn WorldModel>>, Error> {
    let p = args.provider.as_str();
    if p == "direct" {
        return Ok(None);
    }
    if p == "tabular" {
        return Ok(Some(Box::new(TabularProvider::new(bundle.model.clone()))));
    }
    if let Some(path) = p.strip_prefix("scripted:") {
        return Ok(Some(Box::new(ScriptedProvider::new(Script::load(Path::new(path))?))));
    }
    if let Some(url) = p.strip_prefix("remote:") {
        #[cfg(feature = "remote")]
        {
            let timeout = std::time::Duration::from_millis(args.timeout_ms);
            return Ok(Some(Box::new(crate::world_model::RemoteProvider::new(bundle.model.clone(), url, timeout))));
        }
        #[cfg(not(feature = "remote"))]
        {
            let _ = url;
            return Err(Error::Config("built without the `remote` feature".to_string()));
        }
    }
    Err(Error::Config(format!("unknown provider '{p}'")))
}

fn run(args: RunArgs) -> i32 {
    let bundle = match scenario_or_exit(&args.scenario) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let provider = match make_provider(&args, &bundle) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_RUNTIME, e),
    };
    let (provider, recording) = match (provider, args.record_script.is_some()) {
        (Some(p), true) => {
            let rec: SharedRecording<Box<dyn WorldModel>> = Arc::new(Mutex::new(Recording::new(p)));
            (Some(Box::new(rec.clone()) as Box<dyn WorldModel>), Some(rec))
        }
        (None, true) => return fail(EXIT_RUNTIME, "--record-script needs a provider"),
        (p, false) => (p, None),
    };
    let (result, ledger) = match episode(&bundle, args.seed, args.max_steps, provider) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_RUNTIME, e),
    };
    let header = TraceHeader::new(&bundle.name, args.seed);
    if let Some(path) = &args.trace {
        if let Err(code) = write_file(path, &emit_trace(&header, &result.trace.events, Some(&result.summary))) {
            return code;
        }
    }
    let rendered = ledger.render();
    match &args.ledger {
        Some(path) => {
            if let Err(code) = write_file(path, &rendered) {
                return code;
            }
        }
        None => print!("{rendered}"),
    }
    if let (Some(path), Some(rec)) = (&args.record_script, recording) {
        let script = rec.lock().expect("recording lock").script();
        if let Err(code) = write_file(path, &script.to_json()) {
            return code;
        }
    }
    let s = &result.summary;
    println!(
        "outcome={} steps={} first_policy={} spill={} elapsed_min={:.2}",
        s.outcome,
        s.steps,
        s.first_policy.as_deref().unwrap_or("-"),
        s.spill,
        s.elapsed_min
    );
    EXIT_OK
}

/// Runs one seeded episode of `bundle`.
pub fn episode(
    bundle: &ScenarioBundle,
    seed: u64,
    max_steps: usize,
    provider: Option<Box<dyn WorldModel>>,
) -> crate::Result<(EpisodeResult, FreeEnergyLedger)> {
    let mut env = env_reset(&bundle.env, seed)?;
    let (model, policies, config) = (bundle.model.clone(), bundle.policies.clone(), bundle.agent.clone());
    let mut agent = match provider {
        Some(p) => Agent::with_provider(model, policies, config, p),
        None => Agent::new(model, policies, config),
    };
    run_episode(&mut agent, &mut env, max_steps)
}

#[derive(Debug, Serialize)]
struct SweepRun {
    seed: u64,
    outcome: String,
    first_policy: Option<String>,
    spill: bool,
    steps: usize,
    elapsed_min: f64,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    scenario: String,
    seeds: [u64; 2],
    episodes: usize,
    outcomes: BTreeMap<String, usize>,
    first_policies: BTreeMap<String, usize>,
    forbidden: Vec<String>,
    forbidden_first: usize,
    spills: usize,
    safety_property_holds: bool,
    runs: Vec<SweepRun>,
}

fn sweep(args: SweepArgs) -> i32 {
    let Some((a, b)) = parse_seed_range(&args.seeds) else {
        return fail(EXIT_RUNTIME, format!("bad seed range '{}', expected a..b", args.seeds));
    };
    let bundle = match scenario_or_exit(&args.scenario) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let runs: crate::Result<Vec<SweepRun>> = (a..=b)
        .into_par_iter()
        .map(|seed| {
            let (r, _) = episode(&bundle, seed, args.max_steps, None)?;
            let s = r.summary;
            Ok(SweepRun {
                seed,
                outcome: s.outcome,
                first_policy: s.first_policy,
                spill: s.spill,
                steps: s.steps,
                elapsed_min: s.elapsed_min,
            })
        })
        .collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return fail(EXIT_RUNTIME, e),
    };
    let mut outcomes = BTreeMap::new();
    let mut first_policies = BTreeMap::new();
    for r in &runs {
        *outcomes.entry(r.outcome.clone()).or_insert(0) += 1;
        if let Some(p) = &r.first_policy {
            *first_policies.entry(p.clone()).or_insert(0) += 1;
        }
    }
    let forbidden_first =
        runs.iter().filter(|r| r.first_policy.as_ref().is_some_and(|p| args.forbid.contains(p))).count();
    let spills = runs.iter().filter(|r| r.spill).count();
    let summary = SweepSummary {
        scenario: bundle.name.clone(),
        seeds: [a, b],
        episodes: runs.len(),
        outcomes,
        first_policies,
        forbidden: args.forbid.clone(),
        forbidden_first,
        spills,
        safety_property_holds: forbidden_first == 0 && spills == 0,
        runs,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    if let Err(code) = write_file(&args.summary, &text) {
        return code;
    }
    println!(
        "{}/{} episodes without a forbidden first policy; {} spills",
        summary.episodes - forbidden_first,
        summary.episodes,
        spills
    );
    EXIT_OK
}

fn validate(spec: &str) -> i32 {
    match load_scenario(spec) {
        Ok(b) => {
            println!("{}: ok", b.name);
            EXIT_OK
        }
        Err(ScenarioError::Invalid(report)) => {
            eprint!("{report}");
            eprintln!("{} violation(s)", report.violations.len());
            EXIT_INVALID
        }
        Err(e) => fail(if e.is_validation() { EXIT_INVALID } else { EXIT_RUNTIME }, e),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_RUNTIME } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(a) => run(a),
        Command::Validate { scenario } => validate(&scenario),
        Command::Sweep(a) => sweep(a),
    }
}
