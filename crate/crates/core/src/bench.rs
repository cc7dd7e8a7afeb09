//! Monte Carlo experiment harness: repeated seeded runs over a parameter
//! sweep, success/detection scoring and CSV + JSON persistence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gkbo::{run_gkbo, RunReport, SolverConfig};
use crate::objectives::ObjectiveSpec;
use crate::pcbo::{run_pcbo, PcboConfig};

/// Max-norm radius within which a consensus point detects a minimizer.
pub const SUCCESS_THRESHOLD: f64 = 0.25;

pub const CSV_HEADER: &str =
    "sweep_value,success_rate,mean_iterations,mean_detected_minima,repetitions,base_seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Gkbo,
    Pcbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    #[default]
    None,
    Dimension,
    /// `N_L` for GKBO, `J_c` for polarized CBO.
    NLeaders,
    /// `σ_F` for GKBO, `σ` for polarized CBO.
    SigmaF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Objective preset name, e.g. `rastrigin4`.
    pub objective: String,
    pub dim: usize,
    pub n_agents: usize,
    pub solver: SolverKind,
    pub gkbo: SolverConfig,
    pub pcbo: PcboConfig,
    pub repetitions: usize,
    pub sweep: Sweep,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            objective: "rastrigin2".to_owned(),
            dim: 2,
            n_agents: 600,
            solver: SolverKind::Gkbo,
            gkbo: SolverConfig::default(),
            pcbo: PcboConfig::default(),
            repetitions: 20,
            sweep: Sweep::default(),
            base_seed: 0,
        }
    }
}

/// Fully resolved parameters of one sweep point.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub spec: ObjectiveSpec,
    pub n_agents: usize,
    pub solver: SolverKind,
    pub gkbo: SolverConfig,
    pub pcbo: PcboConfig,
}

impl RunPlan {
    pub fn run(&self, seed: u64) -> Result<RunReport> {
        match self.solver {
            SolverKind::Gkbo => {
                let cfg = SolverConfig {
                    seed,
                    ..self.gkbo.clone()
                };
                run_gkbo(&self.spec, &cfg, self.n_agents)
            }
            SolverKind::Pcbo => {
                let cfg = PcboConfig {
                    seed,
                    ..self.pcbo.clone()
                };
                run_pcbo(&self.spec, &cfg, self.n_agents)
            }
        }
    }
}

fn whole_positive(key: &str, v: f64) -> Result<usize> {
    if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::config(
            key,
            format!("expected a positive integer, got {v}"),
        ))
    }
}

impl ExperimentConfig {
    /// Sweep values to iterate; a single `0` when nothing is swept.
    pub fn sweep_values(&self) -> Vec<f64> {
        match self.sweep.variable {
            SweepVariable::None => vec![0.0],
            _ => self.sweep.values.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.n_agents == 0 {
            return Err(Error::config("n_agents", "must be at least 1"));
        }
        if self.sweep.variable != SweepVariable::None {
            let values = &self.sweep.values;
            if values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
            if values
                .windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            {
                return Err(Error::config("sweep.values", "must be strictly increasing"));
            }
        }
        for v in self.sweep_values() {
            self.plan(v)?;
        }
        Ok(())
    }

    /// Resolves the objective and solver parameters at one sweep value.
    pub fn plan(&self, sweep_value: f64) -> Result<RunPlan> {
        let mut dim = self.dim;
        let mut gkbo = self.gkbo.clone();
        let mut pcbo = self.pcbo.clone();
        match self.sweep.variable {
            SweepVariable::None => {}
            SweepVariable::Dimension => dim = whole_positive("sweep.values", sweep_value)?,
            SweepVariable::NLeaders => {
                let n = whole_positive("sweep.values", sweep_value)?;
                gkbo.n_leaders = n;
                pcbo.n_clusters = n;
            }
            SweepVariable::SigmaF => {
                gkbo.sigma_f = sweep_value;
                pcbo.sigma = sweep_value;
            }
        }
        let spec = ObjectiveSpec::preset(&self.objective, dim).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::config("objective", msg),
            other => other,
        })?;
        match self.solver {
            SolverKind::Gkbo => gkbo
                .validate(self.n_agents)
                .map_err(|e| prefix_key(e, "gkbo"))?,
            SolverKind::Pcbo => pcbo.validate().map_err(|e| prefix_key(e, "pcbo"))?,
        }
        Ok(RunPlan {
            spec,
            n_agents: self.n_agents,
            solver: self.solver,
            gkbo,
            pcbo,
        })
    }

    pub fn seed(&self, repetition: usize) -> u64 {
        self.base_seed.wrapping_add(repetition as u64)
    }
}

fn prefix_key(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { key, message } => Error::Config {
            key: format!("{prefix}.{key}"),
            message,
        },
        other => other,
    }
}

/// Whether every minimizer has a consensus point within `threshold`
/// (max norm), and how many minimizers are covered.
pub fn evaluate_success_with(
    report: &RunReport,
    minimizers: &[Vec<f64>],
    threshold: f64,
) -> (bool, usize) {
    let detected = minimizers
        .iter()
        .filter(|m| {
            report.final_consensus.iter().any(|c| {
                c.len() == m.len()
                    && c.iter()
                        .zip(m.iter())
                        .all(|(a, b)| (a - b).abs() <= threshold)
            })
        })
        .count();
    (detected == minimizers.len(), detected)
}

pub fn evaluate_success(report: &RunReport, minimizers: &[Vec<f64>]) -> (bool, usize) {
    evaluate_success_with(report, minimizers, SUCCESS_THRESHOLD)
}

/// One repetition as recorded by the harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub success: bool,
    pub detected: usize,
    pub report: RunReport,
    /// Not part of equality: two otherwise identical runs differ here.
    pub wall_seconds: f64,
}

impl PartialEq for RunOutcome {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.success == other.success
            && self.detected == other.detected
            && self.report == other.report
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub success_rate: f64,
    pub mean_iterations: f64,
    pub mean_detected_minima: f64,
    pub repetitions: usize,
    pub base_seed: u64,
    pub runs: Vec<RunOutcome>,
}

impl SummaryRow {
    /// Pure fold over completed runs in repetition order.
    pub fn aggregate(sweep_value: f64, base_seed: u64, runs: Vec<RunOutcome>) -> Self {
        let m = runs.len() as f64;
        let successes = runs.iter().filter(|r| r.success).count() as f64;
        let iterations: f64 = runs.iter().map(|r| r.report.iterations as f64).sum();
        let detected: f64 = runs.iter().map(|r| r.detected as f64).sum();
        Self {
            sweep_value,
            success_rate: successes / m,
            mean_iterations: iterations / m,
            mean_detected_minima: detected / m,
            repetitions: runs.len(),
            base_seed,
            runs,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
}

/// Executes `repetitions` seeded runs per sweep value on the current rayon
/// pool. Output does not depend on the number of workers.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let values = cfg.sweep_values();
    let plans = values
        .iter()
        .map(|&v| cfg.plan(v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|s| (0..cfg.repetitions).map(move |r| (s, r)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(s, r)| {
            let seed = cfg.seed(r);
            let start = Instant::now();
            let report = plans[s].run(seed).map_err(|e| Error::Run {
                sweep_value: values[s],
                repetition: r,
                source: Box::new(e),
            })?;
            let (success, detected) = evaluate_success(&report, plans[s].spec.minimizers());
            Ok(RunOutcome {
                seed,
                success,
                detected,
                report,
                wall_seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outcomes = outcomes.into_iter();
    let rows = values
        .iter()
        .map(|&v| {
            let runs: Vec<RunOutcome> = outcomes.by_ref().take(cfg.repetitions).collect();
            let row = SummaryRow::aggregate(v, cfg.base_seed, runs);
            log::info!(
                "{} sweep value {}: success {:.3}, mean iterations {:.1}, mean detected {:.3}",
                cfg.objective,
                v,
                row.success_rate,
                row.mean_iterations,
                row.mean_detected_minima
            );
            row
        })
        .collect();
    Ok(ExperimentSummary {
        config: cfg.clone(),
        rows,
    })
}

/// One line of the results CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub sweep_value: f64,
    pub success_rate: f64,
    pub mean_iterations: f64,
    pub mean_detected_minima: f64,
    pub repetitions: usize,
    pub base_seed: u64,
}

impl From<&SummaryRow> for CsvRow {
    fn from(r: &SummaryRow) -> Self {
        Self {
            sweep_value: r.sweep_value,
            success_rate: r.success_rate,
            mean_iterations: r.mean_iterations,
            mean_detected_minima: r.mean_detected_minima,
            repetitions: r.repetitions,
            base_seed: r.base_seed,
        }
    }
}

/// Path of the JSON provenance file written next to a results CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the summary CSV (LF line endings, shortest round-trip floats) and
/// a JSON sidecar holding the experiment configuration.
pub fn write_results(summary: &ExperimentSummary, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (summary.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &summary.rows {
        let r = CsvRow::from(row);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.sweep_value,
            r.success_rate,
            r.mean_iterations,
            r.mean_detected_minima,
            r.repetitions,
            r.base_seed
        ));
    }
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, out).map_err(io_err(path))?;

    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&summary.config).map_err(|e| Error::Format {
        path: sidecar.clone(),
        message: e.to_string(),
    })?;
    let mut f = fs::File::create(&sidecar).map_err(io_err(&sidecar))?;
    f.write_all(json.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(io_err(&sidecar))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<CsvRow>> {
    let fmt_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| fmt_err(e.to_string()))?;
    let header = reader.headers().map_err(|e| fmt_err(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(fmt_err(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| fmt_err(e.to_string()))?;
        let f = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|e| fmt_err(format!("column {i}: {e}")))
        };
        rows.push(CsvRow {
            sweep_value: f(0)?,
            success_rate: f(1)?,
            mean_iterations: f(2)?,
            mean_detected_minima: f(3)?,
            repetitions: record[4]
                .parse()
                .map_err(|e| fmt_err(format!("column 4: {e}")))?,
            base_seed: record[5]
                .parse()
                .map_err(|e| fmt_err(format!("column 5: {e}")))?,
        });
    }
    Ok(rows)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
