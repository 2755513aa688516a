//! Command-line front end: `run`, `eval` and `export`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 internal error.
//! A crashed episode is a normal result.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, EnvConfig};
use crate::env::{run_batch, run_batch_seeds, run_episode_with, Action, BatchReport, EpisodeRecord, NavEnv, Outcome};
use crate::exec::Exec;
use crate::flat::LAYOUT_VERSION;
use crate::mapping::GlobalGrid;
use crate::policies::by_name;
use crate::reward::RewardBreakdown;
use crate::vehicle::yaw_of;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "activenav", version, about = "Aerial navigation simulator with an actuated depth camera")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trajectory log, summary and map.
    Run(RunArgs),
    /// Evaluate a policy over obstacle-count conditions and write a metrics table.
    Eval(EvalArgs),
    /// Replay a trajectory log into pose CSV and a grid snapshot.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Environment config (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "static")]
    pub policy: String,
    /// Output directory.
    #[arg(long, default_value = "run-out")]
    pub out: PathBuf,
    /// Override the config's obstacle count.
    #[arg(long)]
    pub obstacles: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; episode seeds are derived from it per condition.
    #[arg(long, default_value_t = 0, conflicts_with = "seeds")]
    pub seed: u64,
    /// Explicit seed list shared by every condition.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, default_value = "static")]
    pub policy: String,
    /// Output directory for metrics.csv and episodes.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Obstacle counts, one table row each.
    #[arg(long, value_delimiter = ',', default_value = "0,10,20,30")]
    pub obstacles: Vec<usize>,
    /// Episodes per condition (ignored with --seeds).
    #[arg(long, default_value_t = 200)]
    pub episodes: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Trajectory log, or the directory holding trajectory.jsonl.
    #[arg(long)]
    pub log: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "export-out")]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

fn internal(context: &str) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("{context}: {e}"))
}

/// First line of a trajectory log.
#[derive(Debug, Serialize, Deserialize)]
pub struct LogHeader {
    pub kind: String,
    pub version: String,
    pub layout: String,
    pub seed: u64,
    pub policy: String,
    pub config: EnvConfig,
}

/// One control step of a trajectory log.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct LogStep {
    pub kind: String,
    pub step: usize,
    pub position: [f64; 3],
    /// `[w, x, y, z]`
    pub attitude: [f64; 4],
    pub velocity: [f64; 3],
    pub yaw: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Action as produced by the policy, before clamping.
    pub action: [f64; 6],
    pub reward: RewardBreakdown,
    pub transitions: usize,
    pub done: bool,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub record: EpisodeRecord,
}

fn log_step(env: &NavEnv, action: &Action, reward: RewardBreakdown, transitions: usize, done: bool, outcome: Option<Outcome>) -> LogStep {
    let s = env.state().expect("active episode");
    let m = env.mount().expect("active episode");
    let q = s.attitude.quaternion();
    LogStep {
        kind: "step".into(),
        step: env.step_count(),
        position: s.position.into(),
        attitude: [q.w, q.i, q.j, q.k],
        velocity: s.velocity.into(),
        yaw: yaw_of(&s.attitude),
        beta: m.beta,
        gamma: m.gamma,
        action: action.to_array(),
        reward,
        transitions,
        done,
        outcome,
    }
}

fn load_config(path: Option<&Path>) -> Result<EnvConfig, CliError> {
    match path {
        Some(p) => Ok(EnvConfig::load(p)?),
        None => Ok(EnvConfig::default()),
    }
}

fn write_grid(dir: &Path, grid: &GlobalGrid) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(dir.join("grid.bin")).map_err(internal("grid.bin"))?);
    grid.write_snapshot(&mut f).map_err(internal("grid.bin"))?;
    f.flush().map_err(internal("grid.bin"))?;
    let json = serde_json::to_string_pretty(&grid.summary()).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(dir.join("grid.json"), json + "\n").map_err(internal("grid.json"))
}

pub fn cmd_run(args: &RunArgs) -> Result<EpisodeRecord, CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(n) = args.obstacles {
        cfg.world.obstacle_count = n;
        cfg.validate()?;
    }
    let policy = by_name(&args.policy, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(internal("output directory"))?;

    let header = LogHeader {
        kind: "header".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        layout: LAYOUT_VERSION.into(),
        seed: args.seed,
        policy: args.policy.clone(),
        config: cfg.clone(),
    };
    let mut lines = vec![serde_json::to_string(&header).map_err(|e| CliError::Internal(e.to_string()))?];
    let mut env = NavEnv::new(cfg);
    let record = run_episode_with(&mut env, policy.as_ref(), args.seed, |env, action, result| {
        let row = log_step(env, action, result.reward, result.transitions, result.done, result.record.as_ref().map(|r| r.outcome));
        lines.push(serde_json::to_string(&row).expect("log row serialises"));
    })
    .map_err(|e| match e {
        crate::env::EpisodeError::Env(crate::env::EnvError::World(w)) => CliError::Usage(format!("world generation failed: {w}")),
        other => CliError::Internal(other.to_string()),
    })?;

    let mut log = lines.join("\n");
    log.push('\n');
    fs::write(args.out.join("trajectory.jsonl"), log).map_err(internal("trajectory.jsonl"))?;
    let summary = RunSummary { policy: args.policy.clone(), record: record.clone() };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(args.out.join("summary.json"), json + "\n").map_err(internal("summary.json"))?;
    let world = env.world().expect("episode ran");
    fs::write(args.out.join("world.json"), world.to_json() + "\n").map_err(internal("world.json"))?;
    write_grid(&args.out, env.grid().expect("episode ran"))?;
    Ok(record)
}

/// Metrics table as CSV text.
pub fn metrics_csv(report: &BatchReport) -> String {
    let mut out = String::from("condition,success,timeout,crash,exploration,errors\n");
    for r in &report.rows {
        writeln!(out, "{},{},{},{},{},{}", r.condition, r.success, r.timeout, r.crash, r.exploration, r.errors)
            .expect("write to string");
    }
    out
}

pub fn cmd_eval(args: &EvalArgs) -> Result<BatchReport, CliError> {
    let cfg = load_config(args.config.as_deref())?;
    if args.obstacles.is_empty() {
        return Err(CliError::Usage("--obstacles needs at least one condition".into()));
    }
    let mut probe = cfg.clone();
    for &n in &args.obstacles {
        probe.world.obstacle_count = n;
        probe.validate()?;
    }
    let policy = by_name(&args.policy, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let exec = Exec::from_workers(args.workers);
    let report = match &args.seeds {
        Some(seeds) if seeds.is_empty() => return Err(CliError::Usage("--seeds is empty".into())),
        Some(seeds) => run_batch_seeds(&cfg, policy.as_ref(), &args.obstacles, seeds, exec),
        None => {
            if args.episodes == 0 {
                return Err(CliError::Usage("--episodes must be at least 1".into()));
            }
            run_batch(&cfg, policy.as_ref(), &args.obstacles, args.episodes, args.seed, exec)
        }
    };
    let csv = metrics_csv(&report);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(internal("output directory"))?;
        fs::write(dir.join("metrics.csv"), &csv).map_err(internal("metrics.csv"))?;
        let mut jsonl = String::new();
        for e in &report.episodes {
            jsonl.push_str(&serde_json::to_string(e).map_err(|e| CliError::Internal(e.to_string()))?);
            jsonl.push('\n');
        }
        fs::write(dir.join("episodes.jsonl"), jsonl).map_err(internal("episodes.jsonl"))?;
    }
    Ok(report)
}

/// Replay a trajectory log, checking every logged state, and write
/// `poses.csv`, `grid.bin` and `grid.json`. Returns the number of pose rows.
pub fn cmd_export(args: &ExportArgs) -> Result<usize, CliError> {
    let path = if args.log.is_dir() { args.log.join("trajectory.jsonl") } else { args.log.clone() };
    let file = File::open(&path).map_err(|e| CliError::Usage(format!("cannot open log {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |n: usize, e: &dyn std::fmt::Display| CliError::Usage(format!("{}:{n}: malformed log: {e}", path.display()));

    let first = lines
        .next()
        .ok_or_else(|| bad(1, &"empty file"))?
        .map_err(internal("reading log"))?;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| bad(1, &e))?;
    header.config.validate()?;
    let policy = header.policy.clone();

    let mut env = NavEnv::new(header.config);
    env.reset(header.seed).map_err(|e| CliError::Internal(format!("replay reset failed: {e}")))?;
    let mut csv = String::from("step,x,y,z,qw,qx,qy,qz,yaw,beta,gamma\n");
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(internal("reading log"))?;
        if line.trim().is_empty() {
            continue;
        }
        let logged: LogStep = serde_json::from_str(&line).map_err(|e| bad(i + 2, &e))?;
        let action = Action::from_array(logged.action);
        let r = env
            .step(&action)
            .map_err(|e| CliError::Internal(format!("replay step {} failed: {e}", logged.step)))?;
        let replayed = log_step(&env, &action, r.reward, r.transitions, r.done, r.record.as_ref().map(|x| x.outcome));
        if replayed != logged {
            return Err(CliError::Internal(format!(
                "replay diverged from the log at step {} (policy {policy})",
                logged.step
            )));
        }
        let p = logged.position;
        let q = logged.attitude;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            logged.step, p[0], p[1], p[2], q[0], q[1], q[2], q[3], logged.yaw, logged.beta, logged.gamma
        )
        .expect("write to string");
        rows += 1;
    }
    fs::create_dir_all(&args.out).map_err(internal("output directory"))?;
    fs::write(args.out.join("poses.csv"), csv).map_err(internal("poses.csv"))?;
    write_grid(&args.out, env.grid().expect("episode replayed"))?;
    Ok(rows)
}

/// Parse `args` (including the program name) and execute; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|r| {
            println!(
                "outcome={} steps={} exploration={} reward={}",
                r.outcome.as_str(),
                r.steps,
                r.exploration,
                r.reward_sum
            );
        }),
        Command::Eval(a) => cmd_eval(a).map(|r| print!("{}", metrics_csv(&r))),
        Command::Export(a) => cmd_export(a).map(|n| println!("exported {n} poses")),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
