//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 validation or
//! verification failure, 3 internal error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    decisions_for, emit_results, evaluate_candidate, format_table, generate_snapshot_sets, train, write_train_log,
    Candidate, EvalOptions, HarnessConfig, MetricsRow, RunMetadata, SnapshotRow,
};
use crate::env::state_len;
use crate::error::{Error, Result};
use crate::model::{load_scenario, save_scenario, Scenario};
use crate::presets::{random_scenario, Preset};
use crate::rl::{load_policy_for, save_policy, PolicyNetwork};
use crate::verify::{verify_decisions, Decisions};
use crate::workload::write_trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "EDGEPLACE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "edgeplace", version, about = "Serverless function placement and routing on edge topologies")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario JSON file, or a preset name (small-payload, large-payload).
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Trade-off weight(s) between delay (0) and cost (1), comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_value = "0")]
    pub alpha: Vec<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Harness configuration overrides: a JSON file or an inline JSON object.
    #[arg(long, global = true)]
    pub config: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Write a preset or random scenario file.
    GenScenario {
        #[arg(long, conflicts_with_all = ["nodes", "functions"])]
        preset: Option<String>,
        #[arg(long, requires = "functions")]
        nodes: Option<usize>,
        #[arg(long, requires = "nodes")]
        functions: Option<usize>,
    },
    /// Write generated workload snapshots as a trace CSV.
    GenWorkload {
        /// Which snapshot set to write.
        #[arg(long, value_parser = ["train", "eval"], default_value = "eval")]
        set: String,
    },
    /// Train one policy per α and seed.
    Train {
        #[arg(long)]
        timesteps: Option<usize>,
        /// Training seeds; defaults to the global seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Evaluate one trained policy on the evaluation snapshots.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Leave decision times at zero so outputs are reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Evaluate several candidates at every α and print a summary table.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "agent,neptune,vsvbp,creua")]
        candidates: Vec<String>,
        /// Directory holding `policy-alpha{α}-seed{seed}.json` checkpoints.
        #[arg(long, default_value = "checkpoints")]
        checkpoints: PathBuf,
        #[arg(long)]
        no_timing: bool,
        /// Also write every decision as a verifiable JSON file.
        #[arg(long)]
        emit_decisions: bool,
    },
    /// Re-check a decisions file against the scenario.
    Verify {
        #[arg(long)]
        decisions: PathBuf,
        /// Print nothing when the file passes.
        #[arg(long)]
        quiet: bool,
    },
}

/// Parse arguments, run, and return the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_threads();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Config(_)
        | Error::UnknownId(_)
        | Error::Dimension(_)
        | Error::PolicyFormat(_) => EXIT_USAGE,
        Error::Validation(_) => EXIT_INVALID,
        Error::NonFinite(_) | Error::TooLarge(_) | Error::Infeasible(_) | Error::Harness(_) => EXIT_INTERNAL,
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // a pool already built by an earlier call in this process is kept
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    let cfg = load_config(g.config.as_deref())?;
    for &a in &g.alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Config(format!("alpha {a} is outside [0, 1]")));
        }
    }
    match &cli.command {
        Cmd::GenScenario {
            preset,
            nodes,
            functions,
        } => cmd_gen_scenario(g, preset.as_deref(), *nodes, *functions),
        Cmd::GenWorkload { set } => cmd_gen_workload(g, &cfg, set),
        Cmd::Train { timesteps, seeds } => cmd_train(g, &cfg, *timesteps, seeds),
        Cmd::Evaluate { checkpoint, no_timing } => cmd_evaluate(g, &cfg, checkpoint, *no_timing),
        Cmd::Compare {
            candidates,
            checkpoints,
            no_timing,
            emit_decisions,
        } => cmd_compare(g, &cfg, candidates, checkpoints, *no_timing, *emit_decisions),
        Cmd::Verify { decisions, quiet } => cmd_verify(g, decisions, *quiet),
    }
}

/// Defaults overlaid with a JSON file or inline object.
pub fn load_config(source: Option<&str>) -> Result<HarnessConfig> {
    let Some(source) = source else {
        return Ok(HarnessConfig::default());
    };
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        fs::read_to_string(source).map_err(|e| Error::io(source, e))?
    };
    let cfg: HarnessConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: "config",
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// A preset name or a scenario file.
pub fn resolve_scenario(arg: Option<&str>) -> Result<Scenario> {
    let arg = arg.ok_or_else(|| Error::Config("--scenario is required for this subcommand".into()))?;
    if !Path::new(arg).exists() {
        if let Ok(p) = arg.parse::<Preset>() {
            return Ok(p.scenario());
        }
    }
    load_scenario(arg)
}

fn out_or(g: &GlobalArgs, default: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// `base/run-NNN` for the first unused NNN.
pub fn fresh_run_dir(base: &Path) -> Result<PathBuf> {
    fs::create_dir_all(base).map_err(|e| Error::io(base, e))?;
    for k in 1..100_000 {
        let dir = base.join(format!("run-{k:03}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    Err(Error::Config(format!("no free run directory under {}", base.display())))
}

pub fn checkpoint_name(alpha: f64, seed: u64) -> String {
    format!("policy-alpha{alpha}-seed{seed}.json")
}

pub fn train_log_name(alpha: f64, seed: u64) -> String {
    format!("train-alpha{alpha}-seed{seed}.csv")
}

fn git_commit() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn cmd_gen_scenario(g: &GlobalArgs, preset: Option<&str>, nodes: Option<usize>, functions: Option<usize>) -> Result<i32> {
    let scenario = match (preset, nodes, functions) {
        (Some(p), _, _) => p.parse::<Preset>()?.scenario(),
        (None, Some(n), Some(f)) => random_scenario(n, f, g.seed)?,
        _ => return Err(Error::Config("give --preset or both --nodes and --functions".into())),
    };
    let out = out_or(g, "scenario.json");
    save_scenario(&out, &scenario)?;
    println!(
        "wrote {} ({} nodes, {} functions)",
        out.display(),
        scenario.node_count(),
        scenario.function_count()
    );
    Ok(EXIT_OK)
}

fn cmd_gen_workload(g: &GlobalArgs, cfg: &HarnessConfig, set: &str) -> Result<i32> {
    let scenario = resolve_scenario(g.scenario.as_deref())?;
    let (train_w, eval_w) = generate_snapshot_sets(&scenario, cfg, g.seed)?;
    let snaps = if set == "train" { train_w } else { eval_w };
    let out = out_or(g, "workload.csv");
    write_trace(&out, &snaps)?;
    println!("wrote {} snapshots to {}", snaps.len(), out.display());
    Ok(EXIT_OK)
}

fn cmd_train(g: &GlobalArgs, cfg: &HarnessConfig, timesteps: Option<usize>, seeds: &[u64]) -> Result<i32> {
    let scenario = resolve_scenario(g.scenario.as_deref())?;
    let mut cfg = cfg.clone();
    if let Some(t) = timesteps {
        cfg.total_timesteps = t;
    }
    let seeds = if seeds.is_empty() { vec![g.seed] } else { seeds.to_vec() };
    let (train_w, _) = generate_snapshot_sets(&scenario, &cfg, g.seed)?;
    let dir = out_or(g, "checkpoints");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for &alpha in &g.alpha {
        for &seed in &seeds {
            let out = train(&scenario, &train_w, alpha, &cfg, seed)?;
            let every = (out.log.len() / 10).max(1);
            for row in &out.log {
                if row.iteration % every == 0 || row.iteration == out.log.len() {
                    eprintln!(
                        "alpha {alpha} seed {seed} iteration {} timesteps {} mean reward {:.4} invalid {}",
                        row.iteration, row.timesteps, row.mean_reward, row.invalid
                    );
                }
            }
            let ckpt = dir.join(checkpoint_name(alpha, seed));
            save_policy(&ckpt, &out.policy, Some(&out.optimizer), out.bounds.as_ref())?;
            let log = dir.join(train_log_name(alpha, seed));
            write_train_log(&log, &out.log)?;
            println!("wrote {} and {}", ckpt.display(), log.display());
        }
    }
    Ok(EXIT_OK)
}

struct Evaluation {
    rows: Vec<SnapshotRow>,
    summary: Vec<MetricsRow>,
}

fn load_checkpoint(path: &Path, scenario: &Scenario) -> Result<PolicyNetwork> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "checkpoint {} not found; run `edgeplace train` first",
            path.display()
        )));
    }
    let n = scenario.node_count();
    Ok(load_policy_for(path, state_len(n), n)?.policy)
}

fn write_outputs(g: &GlobalArgs, cfg: &HarnessConfig, scenario: &Scenario, ev: &Evaluation, timing: bool) -> Result<PathBuf> {
    let dir = fresh_run_dir(&out_or(g, "results"))?;
    let meta = RunMetadata::new(g.seed, &git_commit(), cfg, scenario, timing);
    emit_results(&dir, &ev.rows, &ev.summary, &meta)?;
    Ok(dir)
}

fn cmd_evaluate(g: &GlobalArgs, cfg: &HarnessConfig, checkpoint: &Path, no_timing: bool) -> Result<i32> {
    let scenario = resolve_scenario(g.scenario.as_deref())?;
    let policy = load_checkpoint(checkpoint, &scenario)?;
    let (_, eval_w) = generate_snapshot_sets(&scenario, cfg, g.seed)?;
    let opts = EvalOptions::from_config(cfg, !no_timing);
    let mut ev = Evaluation {
        rows: Vec::new(),
        summary: Vec::new(),
    };
    for &alpha in &g.alpha {
        let (rows, m) = evaluate_candidate(Candidate::Agent, &scenario, &eval_w, alpha, Some(&policy), &opts)?;
        ev.rows.extend(rows);
        ev.summary.push(m);
    }
    let dir = write_outputs(g, cfg, &scenario, &ev, !no_timing)?;
    print!("{}", format_table(&ev.summary));
    println!("results in {}", dir.display());
    Ok(EXIT_OK)
}

fn cmd_compare(
    g: &GlobalArgs,
    cfg: &HarnessConfig,
    candidates: &[String],
    checkpoints: &Path,
    no_timing: bool,
    emit_decisions: bool,
) -> Result<i32> {
    let scenario = resolve_scenario(g.scenario.as_deref())?;
    let candidates: Vec<Candidate> = candidates.iter().map(|c| c.parse()).collect::<Result<_>>()?;
    // every checkpoint is checked before any work starts
    let mut policies = Vec::new();
    for &alpha in &g.alpha {
        let p = if candidates.contains(&Candidate::Agent) {
            Some(load_checkpoint(&checkpoints.join(checkpoint_name(alpha, g.seed)), &scenario)?)
        } else {
            None
        };
        policies.push(p);
    }
    let (_, eval_w) = generate_snapshot_sets(&scenario, cfg, g.seed)?;
    let opts = EvalOptions::from_config(cfg, !no_timing);
    let mut ev = Evaluation {
        rows: Vec::new(),
        summary: Vec::new(),
    };
    for (&alpha, policy) in g.alpha.iter().zip(&policies) {
        for &c in &candidates {
            let (rows, m) = evaluate_candidate(c, &scenario, &eval_w, alpha, policy.as_ref(), &opts)?;
            ev.rows.extend(rows);
            ev.summary.push(m);
        }
    }
    let dir = write_outputs(g, cfg, &scenario, &ev, !no_timing)?;
    if emit_decisions {
        let ddir = dir.join("decisions");
        fs::create_dir_all(&ddir).map_err(|e| Error::io(&ddir, e))?;
        for (&alpha, policy) in g.alpha.iter().zip(&policies) {
            for &c in &candidates {
                for (k, w) in eval_w.iter().enumerate() {
                    if let Some(d) = decisions_for(c, &scenario, w, alpha, policy.as_ref(), &opts)? {
                        d.save(ddir.join(format!("{c}-alpha{alpha}-snapshot{k:03}.json")))?;
                    }
                }
            }
        }
    }
    print!("{}", format_table(&ev.summary));
    println!("results in {}", dir.display());
    Ok(EXIT_OK)
}

fn cmd_verify(g: &GlobalArgs, decisions: &Path, quiet: bool) -> Result<i32> {
    let scenario = resolve_scenario(g.scenario.as_deref())?;
    let d = match Decisions::load(decisions) {
        Ok(d) => d,
        Err(e @ Error::Parse { .. }) => {
            println!("FAIL: {e}");
            return Ok(EXIT_INVALID);
        }
        Err(e) => return Err(e),
    };
    let report = verify_decisions(&scenario, &d);
    let mut out = std::io::stdout().lock();
    if report.passed() {
        if quiet {
            return Ok(EXIT_OK);
        }
        let _ = writeln!(
            out,
            "PASS: total delay {:.6}, total cost {:.6}, served {:.6} req/s",
            report.total_delay, report.total_cost, report.served
        );
        Ok(EXIT_OK)
    } else {
        for issue in &report.issues {
            let _ = writeln!(out, "FAIL: {issue}");
        }
        Ok(EXIT_INVALID)
    }
}
