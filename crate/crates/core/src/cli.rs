//! Command-line front end.
//!
//! Precedence for every parameter, highest first: command-line flag, config
//! file, `GKBO_SEED` (seed only), built-in default.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::bench::{
    evaluate_success, run_experiment, write_results, ExperimentConfig, ExperimentSummary,
    SolverKind, Sweep, SweepVariable,
};
use crate::error::{Error, Result};
use crate::gkbo::Diffusion;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const SEED_ENV: &str = "GKBO_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "gkbo",
    version,
    about = "Leader-follower particle optimizer for functions with several global minima",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a single run and print its report.
    Run(Overrides),
    /// Execute a Monte Carlo experiment and write CSV + JSON results.
    Bench(Overrides),
    /// Matched GKBO and polarized CBO sweeps over the dimension.
    Compare(Overrides),
}

#[derive(Debug, Args, Default)]
struct Overrides {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Objective preset (rastrigin1|2|4, ackley1|2|4).
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_agents: Option<usize>,
    /// gkbo or pcbo.
    #[arg(long, value_parser = ["gkbo", "pcbo"])]
    solver: Option<String>,
    /// Follower diffusion σ_F (also σ for pcbo).
    #[arg(long)]
    sigma_f: Option<f64>,
    /// Leader count N_L (also J_c for pcbo).
    #[arg(long)]
    n_leaders: Option<usize>,
    /// Follower drift ν_F (also ν for pcbo).
    #[arg(long)]
    nu_f: Option<f64>,
    #[arg(long)]
    nu_l: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    j_stall: Option<usize>,
    #[arg(long)]
    delta_stall: Option<f64>,
    /// isotropic or anisotropic.
    #[arg(long, value_parser = ["isotropic", "anisotropic"])]
    diffusion: Option<String>,
    /// Base seed; repetition r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// none, dimension, n_leaders or sigma_f.
    #[arg(long, value_parser = ["none", "dimension", "n_leaders", "sigma_f"])]
    sweep: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Worker threads for bench/compare (default: all available).
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV (bench) or directory (compare).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config(SEED_ENV, format!("not an unsigned integer: `{s}`"))),
        Err(_) => Ok(None),
    }
}

/// Resolves the effective configuration from defaults, environment, an
/// optional file and flag overrides.
fn resolve(defaults: ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = defaults;
    if let Some(seed) = seed_from_env()? {
        cfg.base_seed = seed;
    }
    if let Some(path) = &o.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        let patch: Value = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let mut value = serde_json::to_value(&cfg).expect("config serializes");
        merge(&mut value, patch);
        cfg = serde_json::from_value(value).map_err(|e| Error::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }

    if let Some(v) = &o.objective {
        cfg.objective = v.clone();
    }
    if let Some(v) = o.dim {
        cfg.dim = v;
    }
    if let Some(v) = o.n_agents {
        cfg.n_agents = v;
    }
    if let Some(v) = &o.solver {
        cfg.solver = if v == "pcbo" {
            SolverKind::Pcbo
        } else {
            SolverKind::Gkbo
        };
    }
    if let Some(v) = o.sigma_f {
        cfg.gkbo.sigma_f = v;
        cfg.pcbo.sigma = v;
    }
    if let Some(v) = o.n_leaders {
        cfg.gkbo.n_leaders = v;
        cfg.pcbo.n_clusters = v;
    }
    if let Some(v) = o.nu_f {
        cfg.gkbo.nu_f = v;
        cfg.pcbo.nu = v;
    }
    if let Some(v) = o.nu_l {
        cfg.gkbo.nu_l = v;
    }
    if let Some(v) = o.eps {
        cfg.gkbo.eps = v;
    }
    if let Some(v) = o.alpha {
        cfg.gkbo.alpha = v;
        cfg.pcbo.alpha = v;
    }
    if let Some(v) = o.n_steps {
        cfg.gkbo.n_steps = v;
        cfg.pcbo.n_steps = v;
    }
    if let Some(v) = o.j_stall {
        cfg.gkbo.j_stall = v;
        cfg.pcbo.j_stall = v;
    }
    if let Some(v) = o.delta_stall {
        cfg.gkbo.delta_stall = v;
        cfg.pcbo.delta_stall = v;
    }
    if let Some(v) = &o.diffusion {
        let mode: Diffusion = v.parse()?;
        cfg.gkbo.diffusion = mode;
        cfg.pcbo.diffusion = mode;
    }
    if let Some(v) = o.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = o.repetitions {
        cfg.repetitions = v;
    }
    if let Some(v) = &o.sweep {
        cfg.sweep.variable = match v.as_str() {
            "dimension" => SweepVariable::Dimension,
            "n_leaders" => SweepVariable::NLeaders,
            "sigma_f" => SweepVariable::SigmaF,
            _ => SweepVariable::None,
        };
    }
    if let Some(v) = &o.values {
        cfg.sweep.values = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Defaults of the GKBO vs polarized CBO comparison: Ackley with two minima,
/// `σ_F = σ = 0.5`, `ν_F = ν = 1`, `N_L = J_c = 4`, `d = 1..10`.
pub fn compare_defaults() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        objective: "ackley2".to_owned(),
        sweep: Sweep {
            variable: SweepVariable::Dimension,
            values: (1..=10).map(f64::from).collect(),
        },
        ..ExperimentConfig::default()
    };
    cfg.gkbo.sigma_f = 0.5;
    cfg.gkbo.nu_f = 1.0;
    cfg.gkbo.n_leaders = 4;
    cfg.pcbo.sigma = 0.5;
    cfg.pcbo.nu = 1.0;
    cfg.pcbo.n_clusters = 4;
    cfg
}

fn print_config(cfg: &ExperimentConfig) {
    println!("effective configuration:");
    println!(
        "{}",
        serde_json::to_string_pretty(cfg).expect("config serializes")
    );
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    Ok(pool.install(f))
}

fn print_summary(summary: &ExperimentSummary) {
    println!("sweep_value  success_rate  mean_iterations  mean_detected");
    for row in &summary.rows {
        println!(
            "{:>11}  {:>12.3}  {:>15.1}  {:>13.3}",
            row.sweep_value, row.success_rate, row.mean_iterations, row.mean_detected_minima
        );
    }
}

fn cmd_run(o: &Overrides) -> Result<()> {
    let cfg = resolve(ExperimentConfig::default(), o)?;
    print_config(&cfg);
    let value = cfg.sweep_values()[0];
    let plan = cfg.plan(value)?;
    let report = plan.run(cfg.seed(0))?;
    let (success, detected) = evaluate_success(&report, plan.spec.minimizers());
    println!("run report:");
    println!("  seed:            {}", report.seed);
    println!("  iterations:      {}", report.iterations);
    println!("  stalled:         {}", report.stalled);
    println!("  evaluations:     {}", report.evaluations);
    println!("  leaders:         {}", report.leader_count);
    println!("  best value:      {}", report.best_value);
    println!("  detected minima: {}/{}", detected, plan.spec.n_minima());
    println!("  success:         {success}");
    println!("  consensus points ({}):", report.final_consensus.len());
    for p in &report.final_consensus {
        let coords: Vec<String> = p.iter().map(|v| format!("{v:.6}")).collect();
        println!("    [{}]", coords.join(", "));
    }
    Ok(())
}

fn cmd_bench(o: &Overrides) -> Result<()> {
    let cfg = resolve(ExperimentConfig::default(), o)?;
    print_config(&cfg);
    let summary = with_workers(o.workers, || run_experiment(&cfg))??;
    let out = o
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    write_results(&summary, &out)?;
    print_summary(&summary);
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_compare(o: &Overrides) -> Result<()> {
    let base = resolve(compare_defaults(), o)?;
    let dir = o.output.clone().unwrap_or_else(|| PathBuf::from("compare"));
    for (kind, name) in [(SolverKind::Gkbo, "gkbo"), (SolverKind::Pcbo, "pcbo")] {
        let cfg = ExperimentConfig {
            solver: kind,
            ..base.clone()
        };
        print_config(&cfg);
        let summary = with_workers(o.workers, || run_experiment(&cfg))??;
        let out = Path::new(&dir).join(format!("{name}.csv"));
        write_results(&summary, &out)?;
        println!("{name}:");
        print_summary(&summary);
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Format { .. } | Error::InvalidInput(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match &cli.command {
        Command::Run(o) => cmd_run(o),
        Command::Bench(o) => cmd_bench(o),
        Command::Compare(o) => cmd_compare(o),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
