use std::path::PathBuf;
use std::process::ExitCode;

use cglo::objectives::{self, grid_minimum};
use cglo_harness::config::{ExperimentSpec, OPTIMIZER_NAMES};
use cglo_harness::csvio::emit_trace_csv;
use cglo_harness::experiment::{run_experiment, run_optimizer, workers_from_env, WORKERS_ENV};
use cglo_harness::{load_spec, parse_spec, HarnessError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cglo", version, about = "Noisy black-box minimization with global/local Gaussian-process search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment described by a configuration file.
    #[command(after_help = format!("Concurrent macroreplications: set {WORKERS_ENV} (default 1)."))]
    Run { config: PathBuf },
    /// Run one optimizer once on a bundled objective.
    Optimize {
        /// paper1d or sun2d
        objective: String,
        /// cglo, rs or gp-ei-ocba
        optimizer: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Total replications (default: 3000 for paper1d, 5000 for sun2d).
        #[arg(long)]
        budget: Option<u64>,
        /// Directory for trace.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration file and print it with every default resolved.
    Validate { config: PathBuf },
    /// Estimate an objective's optimum on a dense grid.
    Oracle {
        objective: String,
        /// Points per axis.
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run { config } => {
            let spec = load_spec(&config)?;
            let workers = workers_from_env()?;
            let out = run_experiment(&spec, workers)?;
            for r in &out.summary {
                let f = |(m, s): (f64, Option<f64>)| match s {
                    Some(s) => format!("{m:.4} ± {s:.4}"),
                    None => format!("{m:.4}"),
                };
                println!(
                    "{:<11} T={:<6} |dx| {}  |dy| {}  |dy_true| {}  ({} complete, {} incomplete)",
                    r.optimizer,
                    r.checkpoint,
                    f(r.abs_dx),
                    f(r.abs_dy),
                    f(r.abs_dy_true),
                    r.complete,
                    r.incomplete
                );
            }
            println!("results written to {}", out.output_dir.display());
            Ok(())
        }
        Command::Optimize { objective, optimizer, seed, budget, out } => {
            if !OPTIMIZER_NAMES.contains(&optimizer.as_str()) {
                return Err(HarnessError::UnknownOptimizer(optimizer));
            }
            let obj = objectives::by_name(&objective, seed)?;
            let budget = budget.unwrap_or(if objective == "sun2d" { 5000 } else { 3000 });
            let src = format!(
                "[experiment]\nobjective = {objective:?}\noptimizers = [{optimizer:?}]\nmacroreps = 1\nbudget = {budget}\noutput_dir = \".\"\nseed = {seed}\n"
            );
            let spec: ExperimentSpec = parse_spec(&src)?;
            let trace = run_optimizer(&optimizer, &obj, &spec, seed)?;
            let last = trace.last().expect("every run records its initial state");
            println!("optimizer  {}", trace.optimizer);
            println!("iterations {}", trace.iterations());
            println!("consumed   {}", last.consumed);
            println!("best x     {:?}", last.best_x);
            println!("best mean  {}", obj.report_value(last.best_mean));
            if let Some(opt) = obj.true_opt() {
                println!("true f(x)  {}", obj.report_value(obj.mean(&last.best_x)));
                println!("optimum    {:?} -> {}", opt.x, obj.report_value(opt.value));
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Io { path: dir.clone(), source: e })?;
                let mut reported = trace.clone();
                reported.rows.iter_mut().for_each(|r| r.best_mean = obj.report_value(r.best_mean));
                let path = dir.join("trace.csv");
                emit_trace_csv(&reported, obj.dim(), &path)?;
                println!("trace      {}", path.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let spec = load_spec(&config)?;
            print!("{}", spec.echo());
            Ok(())
        }
        Command::Oracle { objective, grid } => {
            if grid < 2 {
                return Err(HarnessError::Environment(format!("--grid {grid} needs at least 2 points per axis")));
            }
            let obj = objectives::by_name(&objective, 0)?;
            let est = grid_minimum(&obj, grid);
            println!("grid       {grid} per axis");
            println!("grid best  {:?} -> {}", est.x, obj.report_value(est.value));
            if let Some(opt) = obj.true_opt() {
                println!("recorded   {:?} -> {}", opt.x, obj.report_value(opt.value));
                println!("difference {:.6}", (est.value - opt.value).abs());
            }
            Ok(())
        }
    }
}
