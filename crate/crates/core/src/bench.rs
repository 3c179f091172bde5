//! Training and evaluation harness.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{solve_creua, solve_joint_milp, solve_vsvbp, CriticalityTag, JointBudget, JointSolution};
use crate::env::{default_input_scale, run_episode, state_len, EnvConfig, PriorityMode, RewardBounds};
use crate::error::{Error, Result};
use crate::model::{Scenario, WorkloadMatrix};
use crate::rl::{ppo_update, ActMode, Adam, PolicyNetwork, PpoConfig, Trajectory, DEFAULT_HIDDEN};
use crate::verify::{verify_decisions, Decisions};
use crate::workload::{generate_workloads, WorkloadGenConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Candidate {
    Agent,
    Neptune,
    Vsvbp,
    Creua,
}

impl Candidate {
    pub const ALL: [Candidate; 4] = [Candidate::Agent, Candidate::Neptune, Candidate::Vsvbp, Candidate::Creua];

    pub fn name(self) -> &'static str {
        match self {
            Candidate::Agent => "agent",
            Candidate::Neptune => "neptune",
            Candidate::Vsvbp => "vsvbp",
            Candidate::Creua => "creua",
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Candidate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Candidate::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown candidate '{s}' (expected agent, neptune, vsvbp or creua)")))
    }
}

/// Every tunable of a training or evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub ppo: PpoConfig,
    pub hidden: Vec<usize>,
    /// Placement decisions to train for.
    pub total_timesteps: usize,
    pub train_snapshots: usize,
    pub eval_snapshots: usize,
    /// Generator settings; derived from the scenario's capacity when absent.
    pub workload: Option<WorkloadGenConfig>,
    /// Search-node cap for the exact joint solver.
    pub milp_node_limit: u64,
    /// Decisions run and discarded before timing starts.
    pub warmup_decisions: usize,
    pub priority: PriorityMode,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            total_timesteps: 100_000,
            train_snapshots: 50,
            eval_snapshots: 50,
            workload: None,
            milp_node_limit: 50_000,
            warmup_decisions: 30,
            priority: PriorityMode::Workload,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        if self.train_snapshots == 0 || self.eval_snapshots == 0 {
            return Err(Error::Config("snapshot counts must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Stable digest of the serialized configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed for a named random stream derived from the run seed.
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

/// Rates sized to the topology: each function's total demand is drawn
/// between 45% and 100% of an even half-share of all cores.
pub fn scaled_workload_config(scenario: &Scenario) -> WorkloadGenConfig {
    let share = scenario.topology.total_cores() / (2.0 * scenario.function_count().max(1) as f64);
    WorkloadGenConfig {
        rate_range: (0.45 * share, share),
        ..WorkloadGenConfig::default()
    }
}

/// Training and evaluation snapshot sets for a run seed.
pub fn generate_snapshot_sets(
    scenario: &Scenario,
    cfg: &HarnessConfig,
    seed: u64,
) -> Result<(Vec<WorkloadMatrix>, Vec<WorkloadMatrix>)> {
    let base = cfg.workload.clone().unwrap_or_else(|| scaled_workload_config(scenario));
    let gen = |name: &str, count: usize| {
        let c = WorkloadGenConfig {
            seed: substream(seed, name),
            n_snapshots: count,
            ..base.clone()
        };
        generate_workloads(&c, &scenario.topology, &scenario.functions)
    };
    Ok((gen("workload-train", cfg.train_snapshots)?, gen("workload-eval", cfg.eval_snapshots)?))
}

/// Column names of the training log, written even when there are no rows.
pub const TRAIN_LOG_HEADER: [&str; 11] = [
    "iteration",
    "timesteps",
    "episodes",
    "invalid",
    "cumulative_invalid",
    "invalid_rate",
    "mean_reward",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub timesteps: usize,
    pub episodes: usize,
    pub invalid: usize,
    pub cumulative_invalid: usize,
    pub invalid_rate: f64,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: PolicyNetwork,
    pub optimizer: Adam,
    pub bounds: Option<RewardBounds>,
    pub log: Vec<TrainLogRow>,
}

/// PPO on a set of training snapshots; one iteration per update.
pub fn train(
    scenario: &Scenario,
    workloads: &[WorkloadMatrix],
    alpha: f64,
    cfg: &HarnessConfig,
    seed: u64,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if workloads.is_empty() {
        return Err(Error::Config("no training workloads".into()));
    }
    let n = scenario.node_count();
    let mut init_rng = ChaCha8Rng::seed_from_u64(substream(seed, "policy-init"));
    let mut sample_rng = ChaCha8Rng::seed_from_u64(substream(seed, "sampling"));
    let mut update_rng = ChaCha8Rng::seed_from_u64(substream(seed, "minibatch"));
    let mut policy = PolicyNetwork::new(
        state_len(n),
        n,
        &cfg.hidden,
        default_input_scale(scenario, workloads),
        &mut init_rng,
    );
    let mut optimizer = Adam::new(policy.param_count());
    let env_cfg = EnvConfig {
        alpha,
        priority: cfg.priority,
    };
    let mut log = Vec::new();
    let mut bounds = None;
    let mut steps = 0usize;
    let mut cumulative = 0usize;
    while steps < cfg.total_timesteps {
        let mut buffer = Vec::with_capacity(cfg.ppo.update_interval + scenario.function_count());
        let (mut invalid, mut episodes, mut reward_sum) = (0usize, 0usize, 0.0);
        while buffer.len() < cfg.ppo.update_interval && steps + buffer.len() < cfg.total_timesteps {
            let w = &workloads[sample_rng.gen_range(0..workloads.len())];
            let ep = run_episode(&policy, scenario, w, env_cfg, ActMode::Sample, &mut sample_rng, Some(&mut buffer))?;
            invalid += ep.invalid_count;
            episodes += 1;
            reward_sum += ep.steps.iter().map(|s| s.reward).sum::<f64>();
            bounds = Some(ep.bounds);
        }
        if buffer.is_empty() {
            break;
        }
        steps += buffer.len();
        cumulative += invalid;
        let decisions = buffer.len();
        let traj = Trajectory {
            transitions: buffer,
            bootstrap_value: 0.0,
        };
        let stats = ppo_update(&mut policy, &mut optimizer, &traj, &cfg.ppo, &mut update_rng)?;
        log.push(TrainLogRow {
            iteration: log.len() + 1,
            timesteps: steps,
            episodes,
            invalid,
            cumulative_invalid: cumulative,
            invalid_rate: invalid as f64 / decisions as f64,
            mean_reward: reward_sum / decisions as f64,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
        });
    }
    Ok(TrainOutput {
        policy,
        optimizer,
        bounds,
        log,
    })
}

/// Independent training runs, one per seed, in parallel.
pub fn train_seeds(
    scenario: &Scenario,
    workloads: &[WorkloadMatrix],
    alpha: f64,
    cfg: &HarnessConfig,
    seeds: &[u64],
) -> Result<Vec<TrainOutput>> {
    seeds
        .par_iter()
        .map(|&s| train(scenario, workloads, alpha, cfg, s))
        .collect()
}

pub fn write_train_log(path: impl AsRef<Path>, rows: &[TrainLogRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(TRAIN_LOG_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        what: "csv output",
        message: format!("{}: {e}", path.display()),
    }
}

/// Per-snapshot outcome of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub candidate: String,
    pub alpha: f64,
    pub snapshot: usize,
    pub delay_ms_per_req: f64,
    pub total_delay: f64,
    pub cost: f64,
    pub decision_time_ms: f64,
    pub valid: bool,
}

/// Averages for one candidate at one α. Delay and cost average valid
/// snapshots only; decision time averages all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub candidate: String,
    pub alpha: f64,
    pub snapshots: usize,
    pub valid_snapshots: usize,
    pub invalid_rate: f64,
    pub avg_delay_ms_per_req: Option<f64>,
    pub avg_total_delay: Option<f64>,
    pub avg_cost: Option<f64>,
    pub avg_decision_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_snapshots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub record_timing: bool,
    pub warmup_decisions: usize,
    pub milp_budget: JointBudget,
    pub priority: PriorityMode,
}

impl EvalOptions {
    pub fn from_config(cfg: &HarnessConfig, record_timing: bool) -> Self {
        Self {
            record_timing,
            warmup_decisions: cfg.warmup_decisions,
            milp_budget: JointBudget::nodes(cfg.milp_node_limit),
            priority: cfg.priority,
        }
    }
}

struct Decided {
    decisions: Option<Decisions>,
    seconds: f64,
    fully_allocated: bool,
    optimal: bool,
}

fn decide(
    candidate: Candidate,
    scenario: &Scenario,
    workload: &WorkloadMatrix,
    alpha: f64,
    policy: Option<&PolicyNetwork>,
    opts: &EvalOptions,
) -> Result<Decided> {
    let from_joint = |r: Result<JointSolution>| -> Result<Decided> {
        match r {
            Ok(sol) => Ok(Decided {
                decisions: Some(Decisions::from_joint(&sol, workload)),
                seconds: sol.solve_time_ms / 1e3,
                fully_allocated: sol.fully_allocated(),
                optimal: sol.optimal,
            }),
            Err(Error::Infeasible(_)) => Ok(Decided {
                decisions: None,
                seconds: 0.0,
                fully_allocated: false,
                optimal: false,
            }),
            Err(e) => Err(e),
        }
    };
    match candidate {
        Candidate::Agent => {
            let policy = policy.ok_or_else(|| Error::Config("the agent candidate needs a trained policy".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let env_cfg = EnvConfig {
                alpha,
                priority: opts.priority,
            };
            let ep = run_episode(policy, scenario, workload, env_cfg, ActMode::Deterministic, &mut rng, None)?;
            Ok(Decided {
                decisions: Some(Decisions::from_episode(&ep, workload)),
                seconds: ep.decision_times.iter().sum(),
                fully_allocated: ep.is_valid(),
                optimal: false,
            })
        }
        Candidate::Neptune => from_joint(solve_joint_milp(scenario, workload, alpha, opts.milp_budget)),
        Candidate::Vsvbp => from_joint(Ok(solve_vsvbp(scenario, workload))),
        Candidate::Creua => from_joint(solve_creua(scenario, workload, &CriticalityTag::from_scenario(scenario))),
    }
}

/// One candidate's decisions for a single snapshot, labelled with the
/// candidate and α; `None` when it found no placement at all.
pub fn decisions_for(
    candidate: Candidate,
    scenario: &Scenario,
    workload: &WorkloadMatrix,
    alpha: f64,
    policy: Option<&PolicyNetwork>,
    opts: &EvalOptions,
) -> Result<Option<Decisions>> {
    let d = decide(candidate, scenario, workload, alpha, policy, opts)?;
    Ok(d.decisions.map(|dec| dec.with_label(candidate.name(), alpha)))
}

/// Run one candidate over every snapshot. Every decision is re-checked by
/// the verifier; a rejection is a harness bug and aborts the run.
pub fn evaluate_candidate(
    candidate: Candidate,
    scenario: &Scenario,
    workloads: &[WorkloadMatrix],
    alpha: f64,
    policy: Option<&PolicyNetwork>,
    opts: &EvalOptions,
) -> Result<(Vec<SnapshotRow>, MetricsRow)> {
    if opts.record_timing && !workloads.is_empty() {
        let per_snapshot = scenario.function_count().max(1);
        let warmups = opts.warmup_decisions.div_ceil(per_snapshot);
        for k in 0..warmups {
            decide(candidate, scenario, &workloads[k % workloads.len()], alpha, policy, opts)?;
        }
    }
    // timed runs stay sequential so measurements do not contend
    let decided: Vec<Decided> = if opts.record_timing {
        workloads
            .iter()
            .map(|w| decide(candidate, scenario, w, alpha, policy, opts))
            .collect::<Result<_>>()?
    } else {
        workloads
            .par_iter()
            .map(|w| decide(candidate, scenario, w, alpha, policy, opts))
            .collect::<Result<_>>()?
    };
    let mut rows = Vec::with_capacity(workloads.len());
    let mut optimal = 0usize;
    for (s, d) in decided.into_iter().enumerate() {
        let decision_time_ms = if opts.record_timing { d.seconds * 1e3 } else { 0.0 };
        let row = match &d.decisions {
            Some(dec) => {
                let report = verify_decisions(scenario, dec);
                if !report.passed() {
                    let msg: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
                    return Err(Error::Harness(format!(
                        "{candidate} snapshot {s} failed verification: {}",
                        msg.join("; ")
                    )));
                }
                if d.optimal {
                    optimal += 1;
                }
                SnapshotRow {
                    candidate: candidate.name().into(),
                    alpha,
                    snapshot: s,
                    delay_ms_per_req: if report.served > 0.0 {
                        report.total_delay / report.served
                    } else {
                        0.0
                    },
                    total_delay: report.total_delay,
                    cost: report.total_cost,
                    decision_time_ms,
                    valid: d.fully_allocated,
                }
            }
            None => SnapshotRow {
                candidate: candidate.name().into(),
                alpha,
                snapshot: s,
                delay_ms_per_req: 0.0,
                total_delay: 0.0,
                cost: 0.0,
                decision_time_ms,
                valid: false,
            },
        };
        rows.push(row);
    }
    let mut m = summarize(&rows, candidate, alpha);
    if candidate == Candidate::Neptune {
        m.optimal_snapshots = Some(optimal);
    }
    if matches!(candidate, Candidate::Vsvbp | Candidate::Creua) {
        m.label = Some(crate::baselines::SIMPLIFIED_LABEL.into());
    }
    Ok((rows, m))
}

pub fn summarize(rows: &[SnapshotRow], candidate: Candidate, alpha: f64) -> MetricsRow {
    let valid: Vec<&SnapshotRow> = rows.iter().filter(|r| r.valid).collect();
    let mean = |f: &dyn Fn(&SnapshotRow) -> f64| -> Option<f64> {
        (!valid.is_empty()).then(|| valid.iter().map(|r| f(r)).sum::<f64>() / valid.len() as f64)
    };
    let n = rows.len().max(1) as f64;
    MetricsRow {
        candidate: candidate.name().into(),
        alpha,
        snapshots: rows.len(),
        valid_snapshots: valid.len(),
        invalid_rate: (rows.len() - valid.len()) as f64 / n,
        avg_delay_ms_per_req: mean(&|r| r.delay_ms_per_req),
        avg_total_delay: mean(&|r| r.total_delay),
        avg_cost: mean(&|r| r.cost),
        avg_decision_time_ms: rows.iter().map(|r| r.decision_time_ms).sum::<f64>() / n,
        optimal_snapshots: None,
        label: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub commit: String,
    pub config_hash: String,
    pub scenario_hash: String,
    pub timing_recorded: bool,
    pub version: String,
}

impl RunMetadata {
    pub fn new(seed: u64, commit: &str, cfg: &HarnessConfig, scenario: &Scenario, timing_recorded: bool) -> Self {
        Self {
            seed,
            commit: commit.to_string(),
            config_hash: cfg.hash(),
            scenario_hash: hex(&Sha256::digest(scenario.to_json_string().as_bytes())),
            timing_recorded,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SummaryFile<'a> {
    metadata: &'a RunMetadata,
    rows: &'a [MetricsRow],
}

/// Write `results.csv` (one row per candidate, α and snapshot) and
/// `summary.json` into `dir`.
pub fn emit_results(dir: impl AsRef<Path>, rows: &[SnapshotRow], summary: &[MetricsRow], meta: &RunMetadata) -> Result<()> {
    if rows.is_empty() || summary.is_empty() {
        return Err(Error::Config("refusing to emit empty results".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_err(&csv_path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join("summary.json");
    let body = serde_json::to_string_pretty(&SummaryFile { metadata: meta, rows: summary }).expect("summary serializes");
    fs::write(&json_path, body + "\n").map_err(|e| Error::io(&json_path, e))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

/// Plain-text table, one column per (candidate, α).
pub fn format_table(summary: &[MetricsRow]) -> String {
    let mut out = String::new();
    let head: Vec<String> = summary.iter().map(|m| format!("{} α={}", m.candidate, m.alpha)).collect();
    let width = head.iter().map(|h| h.chars().count()).max().unwrap_or(0).max(10) + 2;
    let line = |label: &str, cells: Vec<String>| {
        let mut s = format!("{label:<28}");
        for c in cells {
            s.push_str(&format!("{c:>width$}"));
        }
        s.push('\n');
        s
    };
    out.push_str(&line("", head));
    out.push_str(&line(
        "Average delay (ms/req)",
        summary.iter().map(|m| fmt_opt(m.avg_delay_ms_per_req, 4)).collect(),
    ));
    out.push_str(&line("Average cost (cores)", summary.iter().map(|m| fmt_opt(m.avg_cost, 4)).collect()));
    out.push_str(&line(
        "Average decision time (ms)",
        summary.iter().map(|m| format!("{:.3}", m.avg_decision_time_ms)).collect(),
    ));
    out.push_str(&line(
        "Invalid snapshots",
        summary
            .iter()
            .map(|m| format!("{}/{}", m.snapshots - m.valid_snapshots, m.snapshots))
            .collect(),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    #[test]
    fn train_log_round_trips_with_its_header() {
        let rows = vec![TrainLogRow {
            iteration: 1,
            timesteps: 32,
            episodes: 8,
            invalid: 3,
            cumulative_invalid: 3,
            invalid_rate: 0.09375,
            mean_reward: -0.5,
            policy_loss: 0.1,
            value_loss: 0.2,
            entropy: 2.7,
            clip_fraction: 0.0,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_train_log(&path, &rows).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        assert_eq!(r.headers().unwrap(), &csv::StringRecord::from(TRAIN_LOG_HEADER.to_vec()));
        let back: Vec<TrainLogRow> = r.deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(back, rows);
    }

    fn tiny_cfg() -> HarnessConfig {
        HarnessConfig {
            hidden: vec![8],
            total_timesteps: 64,
            train_snapshots: 3,
            eval_snapshots: 2,
            ppo: PpoConfig {
                update_interval: 32,
                epochs_per_update: 2,
                ..PpoConfig::default()
            },
            ..HarnessConfig::default()
        }
    }

    #[test]
    fn zero_timesteps_gives_an_untrained_policy() {
        let s = Preset::SmallPayload.scenario();
        let cfg = HarnessConfig {
            total_timesteps: 0,
            ..tiny_cfg()
        };
        let (train_w, _) = generate_snapshot_sets(&s, &cfg, 1).unwrap();
        let out = train(&s, &train_w, 0.0, &cfg, 1).unwrap();
        assert!(out.log.is_empty());
        let (p, _) = out.policy.forward(&vec![1.0; state_len(5)]).unwrap();
        assert!(p.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn training_log_is_reproducible() {
        let s = Preset::SmallPayload.scenario();
        let cfg = tiny_cfg();
        let (train_w, _) = generate_snapshot_sets(&s, &cfg, 3).unwrap();
        let a = train(&s, &train_w, 0.0, &cfg, 3).unwrap();
        let b = train(&s, &train_w, 0.0, &cfg, 3).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.log.last().unwrap().timesteps, 64);
    }

    #[test]
    fn single_snapshot_average_equals_the_snapshot() {
        let s = Preset::SmallPayload.scenario();
        let opts = EvalOptions::from_config(&tiny_cfg(), false);
        let (rows, m) = evaluate_candidate(Candidate::Vsvbp, &s, std::slice::from_ref(&s.workload), 0.0, None, &opts).unwrap();
        assert_eq!(rows.len(), 1);
        if rows[0].valid {
            assert_eq!(m.avg_cost, Some(rows[0].cost));
        }
    }

    #[test]
    fn empty_rows_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let s = Preset::SmallPayload.scenario();
        let meta = RunMetadata::new(0, "x", &HarnessConfig::default(), &s, false);
        assert!(emit_results(dir.path(), &[], &[], &meta).is_err());
    }

    #[test]
    fn candidate_names_parse() {
        for c in Candidate::ALL {
            assert_eq!(c.name().parse::<Candidate>().unwrap(), c);
        }
    }

    #[test]
    fn substreams_differ_by_name() {
        assert_ne!(substream(1, "a"), substream(1, "b"));
        assert_eq!(substream(1, "a"), substream(1, "a"));
    }
}
