//! Comparison optimizers sharing the trace schema and budget accounting of
//! the main driver: uniform random search, and a full-GP expected-improvement
//! search with OCBA allocation over all design points.

use crate::acquisition::ei_closed;
use crate::allocation::{apply_plan, ocba_allocate, BudgetState};
use crate::cglo::CgloConfig;
use crate::dataset::{sq_dist, Dataset, Moments};
use crate::design::{derive_seed, latin_hypercube, rng_from, uniform_points};
use crate::gp::{fit_hyperparams, FitOptions, FullGp, HyperBounds, Structure};
use crate::kernel::GpHyperparams;
use crate::objectives::StochasticObjective;
use crate::trace::{RunTrace, Stopwatch, TraceRow};
use crate::{Error, Result};

const TAG_POINTS: u64 = 11;
const TAG_DESIGN: u64 = 12;
const TAG_GRID: u64 = 13;
const TAG_FIT: u64 = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub best_x: Vec<f64>,
    pub best_mean: f64,
    pub trace: RunTrace,
    pub data: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSearchConfig {
    pub points: usize,
    pub reps_per_point: u64,
    pub seed: u64,
    pub total_budget: u64,
}

impl RandomSearchConfig {
    /// Spends `total_budget` on points with `reps_per_point` replications each.
    pub fn for_budget(total_budget: u64, reps_per_point: u64, seed: u64) -> Self {
        let points = (total_budget / reps_per_point.max(1)) as usize;
        Self { points, reps_per_point, seed, total_budget }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || self.reps_per_point == 0 {
            return Err(Error::Config("random search needs at least one point and one replication".into()));
        }
        let need = self.points as u64 * self.reps_per_point;
        if self.total_budget < need {
            return Err(Error::Config(format!(
                "total budget {} is below points * reps_per_point = {} * {} = {need}",
                self.total_budget, self.points, self.reps_per_point
            )));
        }
        Ok(())
    }
}

/// Uniform points with a fixed replication count each; one trace row per
/// point (row 0 is the first point).
pub fn random_search(objective: &StochasticObjective, cfg: &RandomSearchConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let mut rng = rng_from(cfg.seed, &[TAG_POINTS]);
    let xs = uniform_points(cfg.points, objective.bounds(), &mut rng);
    let mut data = Dataset::new(objective.bounds().clone());
    let mut trace = RunTrace::new("rs");
    let mut consumed = 0;
    for (i, x) in xs.into_iter().enumerate() {
        let m = objective
            .evaluate(&x, cfg.reps_per_point)
            .map_err(|e| Error::Evaluation { point: i, source: Box::new(e) })?;
        data.push(x, m, 0)?;
        consumed += cfg.reps_per_point;
        trace.push(row(&data, i, consumed, 1, 0, &clock));
    }
    Ok(finish(data, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpEiConfig {
    pub n0: usize,
    pub init_reps: u64,
    pub r_min: u64,
    pub b2: u64,
    /// Fresh LHS grid size for the EI argmax; `None` means `100 d`.
    pub grid_size: Option<usize>,
    pub refit_every: usize,
    pub fit_starts: usize,
    pub total_budget: u64,
    pub seed: u64,
    pub max_iterations: Option<usize>,
    pub noise_prior: Option<f64>,
}

impl GpEiConfig {
    /// Same initial design sizes, replications and budget as a driver config.
    pub fn from_cglo(cfg: &CgloConfig) -> Self {
        Self {
            n0: cfg.n0,
            init_reps: cfg.init_reps,
            r_min: cfg.r_min,
            b2: cfg.b2,
            grid_size: cfg.local_grid_size,
            refit_every: cfg.refit_every,
            fit_starts: cfg.fit_starts,
            total_budget: cfg.total_budget,
            seed: cfg.seed,
            max_iterations: cfg.max_iterations,
            noise_prior: cfg.noise_prior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::Config(format!("n0 = {} is below the 2 points a model needs", self.n0)));
        }
        if self.init_reps == 0 || self.r_min == 0 || self.b2 == 0 {
            return Err(Error::Config("init_reps, r_min and B2 must be at least 1".into()));
        }
        if self.refit_every == 0 || self.fit_starts == 0 || self.grid_size == Some(0) {
            return Err(Error::Config("refit_every, fit_starts and grid_size must be positive".into()));
        }
        let need = self.n0 as u64 * self.init_reps;
        if self.total_budget < need {
            return Err(Error::Config(format!(
                "total budget {} is below n0 * init_reps = {} * {} = {need}",
                self.total_budget, self.n0, self.init_reps
            )));
        }
        Ok(())
    }
}

/// Full GP on every design point; each iteration adds the EI maximizer of a
/// fresh LHS grid with `r_min` replications, then spreads `B2` replications
/// over all points by OCBA.
pub fn gp_ei_optimize(objective: &StochasticObjective, cfg: &GpEiConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let bounds = objective.bounds().clone();
    let dim = objective.dim();
    let grid_size = cfg.grid_size.unwrap_or(100 * dim);
    let mut budget = BudgetState::new(cfg.total_budget, cfg.r_min, cfg.b2, 0.1)?;

    let mut rng = rng_from(cfg.seed, &[TAG_DESIGN]);
    let mut data = Dataset::new(bounds.clone());
    for x in latin_hypercube(cfg.n0, &bounds, &mut rng) {
        let m = evaluate(objective, &x, cfg.init_reps, data.len())?;
        data.push(x, m, 0)?;
    }
    budget.consume(cfg.n0 as u64 * cfg.init_reps)?;
    let mut trace = RunTrace::new("gp-ei-ocba");
    trace.push(row(&data, 0, budget.consumed(), 0, 0, &clock));

    let mut hp: Option<GpHyperparams> = None;
    let mut since_fit = usize::MAX;
    let mut iter = 0;
    while budget.remaining() >= cfg.r_min && cfg.max_iterations.is_none_or(|m| iter < m) {
        iter += 1;
        let unit: Vec<Vec<f64>> = data.xs().iter().map(|x| bounds.to_unit(x)).collect();
        let y = data.means();
        let noise = data.mean_noise_variances(cfg.noise_prior);
        if since_fit >= cfg.refit_every {
            let opts = FitOptions {
                starts: cfg.fit_starts,
                seed: derive_seed(cfg.seed, &[TAG_FIT, iter as u64]),
                warm_start: hp.clone(),
                ..FitOptions::default()
            };
            let hb = HyperBounds::default_for(&y, dim, None);
            hp = Some(fit_hyperparams(&unit, &y, &noise, Structure::Full, &hb, None, &opts)?);
            since_fit = 0;
        }
        let gp = FullGp::new(unit.clone(), &y, &noise, hp.clone().expect("fitted above"))?;
        let best = unit.iter().map(|u| gp.predict(u).mean).fold(f64::INFINITY, f64::min);

        let mut grid_rng = rng_from(cfg.seed, &[TAG_GRID, iter as u64]);
        let grid = latin_hypercube(grid_size, &bounds, &mut grid_rng);
        let mut scored: Vec<(usize, f64)> = grid
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let p = gp.predict(&bounds.to_unit(x));
                (i, ei_closed(best, p.mean, p.sd()))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let fresh = scored
            .iter()
            .map(|&(i, _)| &grid[i])
            .find(|x| data.points().iter().all(|p| sq_dist(&p.x, x) > 1e-18));
        let mut n_new = 0;
        if let Some(x) = fresh.cloned() {
            let m = evaluate(objective, &x, cfg.r_min, data.len())?;
            budget.consume(cfg.r_min)?;
            data.push(x, m, 0)?;
            since_fit += 1;
            n_new = 1;
        }

        let b2 = cfg.b2.min(budget.remaining());
        let mut spent = 0;
        if b2 > 0 {
            let fallback = data.median_sample_var().or(cfg.noise_prior).unwrap_or(0.0);
            let pts: Vec<(f64, f64, usize)> = data
                .points()
                .iter()
                .enumerate()
                .map(|(i, p)| (p.sample_mean(), p.sample_var().unwrap_or(fallback).sqrt(), i))
                .collect();
            let plan = ocba_allocate(&pts, b2)?;
            spent = apply_plan(objective, &mut data, &plan, &mut budget)?;
        }
        trace.push(row(&data, iter, budget.consumed(), n_new, spent, &clock));
        if n_new == 0 && spent == 0 {
            break;
        }
    }
    Ok(finish(data, trace))
}

fn evaluate(objective: &StochasticObjective, x: &[f64], reps: u64, id: usize) -> Result<Moments> {
    objective.evaluate(x, reps).map_err(|e| Error::Evaluation { point: id, source: Box::new(e) })
}

fn row(data: &Dataset, iter: usize, consumed: u64, n_new: usize, b2: u64, clock: &Stopwatch) -> TraceRow {
    let b = data.best().expect("at least one point");
    let p = data.point(b);
    TraceRow {
        iter,
        consumed,
        region: None,
        n_new,
        b1: 0,
        b2,
        best_x: p.x.clone(),
        best_mean: p.sample_mean(),
        wall_ms: clock.elapsed_ms(),
        n_points: data.len(),
        n_region: 0,
        min_reps: data.points().iter().map(|p| p.reps()).min().unwrap_or(0),
        required_reps: 0,
    }
}

fn finish(data: Dataset, trace: RunTrace) -> BaselineResult {
    let b = data.best().expect("at least one point");
    let p = data.point(b);
    BaselineResult { best_x: p.x.clone(), best_mean: p.sample_mean(), trace, data }
}
