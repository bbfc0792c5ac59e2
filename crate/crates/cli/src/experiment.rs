//! Macroreplication driver: every optimizer on seeds `seed + m`, metrics at
//! each budget checkpoint, and the `runs.csv` / `summary.csv` outputs.

use std::path::{Path, PathBuf};

use cglo::baselines::{gp_ei_optimize, random_search};
use cglo::cglo::run as run_cglo;
use cglo::objectives::{self, StochasticObjective};
use cglo::trace::RunTrace;
use rayon::prelude::*;

use crate::config::ExperimentSpec;
use crate::csvio::emit_trace_csv;
use crate::HarnessError;

/// Environment variable holding the number of concurrent macroreplications.
pub const WORKERS_ENV: &str = "CGLO_WORKERS";

/// Outcome of one optimizer run, in the minimization sign.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub optimizer: String,
    pub macrorep: usize,
    pub seed: u64,
    pub trace: RunTrace,
}

pub fn run_optimizer(
    name: &str,
    objective: &StochasticObjective,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<RunTrace, HarnessError> {
    let wrap = |error: cglo::Error| HarnessError::Run { optimizer: name.to_string(), seed, source: error };
    match name {
        "cglo" => run_cglo(objective, &spec.cglo_for(seed)).map(|r| r.trace).map_err(|e| wrap(e.error)),
        "rs" => random_search(objective, &spec.rs_for(seed)).map(|r| r.trace).map_err(wrap),
        "gp-ei-ocba" => gp_ei_optimize(objective, &spec.gp_for(seed)).map(|r| r.trace).map_err(wrap),
        other => Err(HarnessError::UnknownOptimizer(other.to_string())),
    }
}

/// Metrics of the incumbent at one budget checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub optimizer: String,
    pub macrorep: usize,
    pub seed: u64,
    pub checkpoint: u64,
    /// False when the run ended before spending `checkpoint` replications.
    pub complete: bool,
    pub consumed: u64,
    pub best_x: Vec<f64>,
    /// Incumbent sample mean in the problem's own sign.
    pub best_value: f64,
    /// Distance from the incumbent to the true optimizer.
    pub abs_dx: f64,
    /// Incumbent sample mean against the true optimal value.
    pub abs_dy: f64,
    /// True objective at the incumbent against the true optimal value.
    pub abs_dy_true: f64,
    pub wall_ms: f64,
}

pub fn checkpoint_record(
    objective: &StochasticObjective,
    outcome: &RunOutcome,
    checkpoint: u64,
) -> Option<CheckpointRecord> {
    let opt = objective.true_opt()?;
    let row = outcome.trace.incumbent_at(checkpoint)?;
    let last = outcome.trace.last()?;
    let abs_dx = row.best_x.iter().zip(&opt.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Some(CheckpointRecord {
        optimizer: outcome.optimizer.clone(),
        macrorep: outcome.macrorep,
        seed: outcome.seed,
        checkpoint,
        complete: last.consumed >= checkpoint,
        consumed: row.consumed,
        best_x: row.best_x.clone(),
        best_value: objective.report_value(row.best_mean),
        abs_dx,
        abs_dy: (row.best_mean - opt.value).abs(),
        abs_dy_true: (objective.mean(&row.best_x) - opt.value).abs(),
        wall_ms: row.wall_ms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub optimizer: String,
    pub checkpoint: u64,
    pub complete: usize,
    pub incomplete: usize,
    pub abs_dx: (f64, Option<f64>),
    pub abs_dy: (f64, Option<f64>),
    pub abs_dy_true: (f64, Option<f64>),
}

/// Mean and sample standard deviation (`None` for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Per optimizer and checkpoint, over the complete runs only.
pub fn summarize(spec: &ExperimentSpec, records: &[CheckpointRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for opt in &spec.optimizers {
        for &cp in &spec.checkpoints {
            let rows: Vec<&CheckpointRecord> =
                records.iter().filter(|r| &r.optimizer == opt && r.checkpoint == cp).collect();
            let done: Vec<&&CheckpointRecord> = rows.iter().filter(|r| r.complete).collect();
            let col = |f: fn(&CheckpointRecord) -> f64| mean_std(&done.iter().map(|r| f(r)).collect::<Vec<_>>());
            out.push(SummaryRow {
                optimizer: opt.clone(),
                checkpoint: cp,
                complete: done.len(),
                incomplete: rows.len() - done.len(),
                abs_dx: col(|r| r.abs_dx),
                abs_dy: col(|r| r.abs_dy),
                abs_dy_true: col(|r| r.abs_dy_true),
            });
        }
    }
    out
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub records: Vec<CheckpointRecord>,
    pub summary: Vec<SummaryRow>,
    pub output_dir: PathBuf,
}

/// Worker count from the environment (default 1).
pub fn workers_from_env() -> Result<usize, HarnessError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HarnessError::Environment(format!("{WORKERS_ENV} = {v:?} is not a positive integer"))),
        Err(_) => Ok(1),
    }
}

/// Runs every optimizer on every macroreplication and writes
/// `config.toml`, `runs.csv`, `summary.csv` and one trace per run.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentOutput, HarnessError> {
    let dir = spec.output_dir.clone();
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(|e| HarnessError::io(&traces, e))?;
    write_file(&dir.join("config.toml"), &spec.echo())?;
    let objective = objectives::by_name(&spec.objective, spec.seed)?;
    let dim = objective.dim();

    let jobs: Vec<(String, usize)> = spec
        .optimizers
        .iter()
        .flat_map(|o| (0..spec.macroreps).map(move |m| (o.clone(), m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Environment(format!("cannot start {workers} workers: {e}")))?;
    let outcomes: Vec<Result<RunOutcome, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(opt, m)| {
                let seed = spec.macrorep_seed(*m);
                let obj = objective.clone().with_seed(seed);
                let trace = run_optimizer(opt, &obj, spec, seed)?;
                Ok(RunOutcome { optimizer: opt.clone(), macrorep: *m, seed, trace })
            })
            .collect()
    });

    let mut records = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        let mut reported = outcome.trace.clone();
        reported.rows.iter_mut().for_each(|r| r.best_mean = objective.report_value(r.best_mean));
        emit_trace_csv(&reported, dim, &traces.join(format!("{}_m{:03}.csv", outcome.optimizer, outcome.macrorep)))?;
        let obj = objective.clone().with_seed(outcome.seed);
        for &cp in &spec.checkpoints {
            if let Some(r) = checkpoint_record(&obj, &outcome, cp) {
                records.push(r);
            }
        }
    }
    let summary = summarize(spec, &records);
    write_runs_csv(&dir.join("runs.csv"), &records, dim)?;
    write_summary_csv(&dir.join("summary.csv"), &summary)?;
    Ok(ExperimentOutput { records, summary, output_dir: dir })
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub const RUNS_FIXED: [&str; 6] = ["optimizer", "macrorep", "seed", "checkpoint", "complete", "consumed_reps"];

pub fn write_runs_csv(path: &Path, records: &[CheckpointRecord], dim: usize) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let mut header: Vec<String> = RUNS_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((1..=dim).map(|i| format!("best_x{i}")));
    header.extend(["best_value", "abs_dx", "abs_dy", "abs_dy_true", "wall_ms"].map(String::from));
    w.write_record(&header).map_err(|e| HarnessError::csv(path, e))?;
    for r in records {
        let mut rec = vec![
            r.optimizer.clone(),
            r.macrorep.to_string(),
            r.seed.to_string(),
            r.checkpoint.to_string(),
            r.complete.to_string(),
            r.consumed.to_string(),
        ];
        rec.extend(r.best_x.iter().map(f64::to_string));
        rec.extend([r.best_value, r.abs_dx, r.abs_dy, r.abs_dy_true, r.wall_ms].map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    w.write_record([
        "optimizer",
        "checkpoint",
        "complete",
        "incomplete",
        "mean_abs_dx",
        "std_abs_dx",
        "mean_abs_dy",
        "std_abs_dy",
        "mean_abs_dy_true",
        "std_abs_dy_true",
    ])
    .map_err(|e| HarnessError::csv(path, e))?;
    let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
    let sd = |v: Option<f64>| v.map(cell).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.optimizer.clone(),
            r.checkpoint.to_string(),
            r.complete.to_string(),
            r.incomplete.to_string(),
            cell(r.abs_dx.0),
            sd(r.abs_dx.1),
            cell(r.abs_dy.0),
            sd(r.abs_dy.1),
            cell(r.abs_dy_true.0),
            sd(r.abs_dy_true.1),
        ])
        .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
