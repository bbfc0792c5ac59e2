//! The combined global/local optimizer: pick a promising region with the
//! global criterion, search inside it with the local criterion until the
//! switching rule fires, then spend replications on existing points.

use crate::acquisition::{default_clamps, AcquisitionContext, GeiScorer, MeiScorer};
use crate::aglgp::{AglgpModel, AglgpOptions, LooReport};
use crate::allocation::{apply_plan, min_rep_topup, ocba_allocate, BudgetState};
use crate::dataset::{sq_dist, Dataset};
use crate::design::{derive_seed, latin_hypercube, rng_from, uniform_points};
use crate::gp::FitOptions;
use crate::inducing::{select_inducing, InducingOptions, InducingSet};
use crate::objectives::StochasticObjective;
use crate::partition::Partition;
use crate::trace::{RunTrace, Stopwatch, TraceRow};
use crate::{Error, Result};

const TAG_DESIGN: u64 = 1;
const TAG_PARTITION: u64 = 2;
const TAG_INDUCING: u64 = 3;
const TAG_CANDIDATES: u64 = 4;
const TAG_LOCAL_GRID: u64 = 5;
const TAG_FIT: u64 = 6;

const DEDUP_TOL: f64 = 1e-9;
const REJECTION_ROUNDS: usize = 50;
const MAX_CV_DOUBLINGS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CgloConfig {
    /// Initial design size.
    pub n0: usize,
    /// Number of regions; 0 picks `floor(n0 / 4d)` clamped to `[2, 10]`.
    pub k: usize,
    pub init_reps: u64,
    /// Replications for each new design point.
    pub r_min: u64,
    /// Replications handed out by OCBA per iteration.
    pub b2: u64,
    /// `c` in the minimum-replication schedule `kappa_k = c k`.
    pub kappa_coef: f64,
    /// Steepness of the density penalty.
    pub v: f64,
    pub mean_lo: Option<f64>,
    pub mean_hi: Option<f64>,
    /// Global candidate count; `None` means `20 K`.
    pub candidate_count: Option<usize>,
    /// Local discretization size; `None` means `100 d`.
    pub local_grid_size: Option<usize>,
    /// Hyperparameters are re-estimated after this many new points.
    pub refit_every: usize,
    /// Optimizer starts for the initial fit.
    pub fit_starts: usize,
    /// Optimizer starts for refits, in addition to the previous estimate.
    pub refit_starts: usize,
    pub max_local_points: Option<usize>,
    pub total_budget: u64,
    pub seed: u64,
    pub max_iterations: Option<usize>,
    /// Noise variance of one replication for single-replication points.
    pub noise_prior: Option<f64>,
    /// Check the replication invariants after every allocation.
    pub check_invariants: bool,
}

impl Default for CgloConfig {
    fn default() -> Self {
        Self {
            n0: 12,
            k: 0,
            init_reps: 20,
            r_min: 20,
            b2: 20,
            kappa_coef: 0.1,
            v: 1.0,
            mean_lo: None,
            mean_hi: None,
            candidate_count: None,
            local_grid_size: None,
            refit_every: 5,
            fit_starts: 10,
            refit_starts: 10,
            max_local_points: None,
            total_budget: 3000,
            seed: 0,
            max_iterations: None,
            noise_prior: None,
            check_invariants: true,
        }
    }
}

impl CgloConfig {
    /// One-dimensional setup: 12 initial points, 3 regions, 20 replications.
    pub fn paper_1d(seed: u64, total_budget: u64) -> Self {
        Self { n0: 12, k: 3, init_reps: 20, r_min: 20, b2: 20, seed, total_budget, ..Self::default() }
    }

    /// Two-dimensional setup: 40 initial points, 5 regions, 10 replications
    /// per new point, 20 per initial point.
    pub fn sun_2d(seed: u64, total_budget: u64) -> Self {
        Self { n0: 40, k: 5, init_reps: 20, r_min: 10, b2: 10, seed, total_budget, ..Self::default() }
    }

    pub fn resolved_k(&self, dim: usize) -> usize {
        if self.k > 0 {
            self.k
        } else {
            (self.n0 / (4 * dim.max(1))).clamp(2, 10)
        }
    }

    pub fn resolved_candidate_count(&self, dim: usize) -> usize {
        self.candidate_count.unwrap_or(20 * self.resolved_k(dim))
    }

    pub fn resolved_local_grid_size(&self, dim: usize) -> usize {
        self.local_grid_size.unwrap_or(100 * dim)
    }

    /// Minimum candidates per region.
    pub fn min_candidates_per_region(&self, dim: usize) -> usize {
        let k = self.resolved_k(dim);
        (self.resolved_candidate_count(dim) / (2 * k)).max(3)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let k = self.resolved_k(dim);
        if dim == 0 {
            return Err(Error::Config("the domain needs at least one dimension".into()));
        }
        if self.n0 < 3 {
            return Err(Error::Config(format!("n0 = {} is below the 3 points a model needs", self.n0)));
        }
        if self.n0 < 2 * k {
            return Err(Error::Config(format!("n0 = {} is smaller than 2K = {} (K = {k})", self.n0, 2 * k)));
        }
        if self.init_reps == 0 || self.r_min == 0 || self.b2 == 0 {
            return Err(Error::Config("init_reps, r_min and B2 must be at least 1".into()));
        }
        let need = self.n0 as u64 * self.init_reps;
        if self.total_budget < need {
            return Err(Error::Config(format!(
                "total budget {} is below n0 * init_reps = {} * {} = {need}",
                self.total_budget, self.n0, self.init_reps
            )));
        }
        if !(self.kappa_coef > 0.0 && self.kappa_coef.is_finite()) {
            return Err(Error::Config(format!("kappa_coef = {} must be positive", self.kappa_coef)));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::Config(format!("v = {} must be positive", self.v)));
        }
        if let (Some(lo), Some(hi)) = (self.mean_lo, self.mean_hi) {
            if !(lo < hi) {
                return Err(Error::Config(format!("mean_lo = {lo} must be below mean_hi = {hi}")));
            }
        }
        if self.resolved_candidate_count(dim) < k {
            return Err(Error::Config(format!(
                "candidate_count = {} cannot cover K = {k} regions",
                self.resolved_candidate_count(dim)
            )));
        }
        if self.resolved_local_grid_size(dim) == 0 {
            return Err(Error::Config("local_grid_size must be positive".into()));
        }
        if self.refit_every == 0 || self.fit_starts == 0 {
            return Err(Error::Config("refit_every and fit_starts must be positive".into()));
        }
        if self.max_local_points == Some(0) {
            return Err(Error::Config("max_local_points must be positive when set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalStepResult {
    pub x_g0: Vec<f64>,
    pub candidate: usize,
    pub region: usize,
    pub gei_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocalOutcome {
    pub n_new: usize,
    /// Whether the switching rule (rather than a cap or the budget) ended it.
    pub switched: bool,
    pub exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AllocationOutcome {
    pub b1: u64,
    pub b2: u64,
    pub exhausted: bool,
}

/// Everything the optimizer carries between steps.
#[derive(Debug, Clone)]
pub struct CgloState {
    pub data: Dataset,
    pub partition: Partition,
    pub inducing: InducingSet,
    pub model: AglgpModel,
    pub budget: BudgetState,
    pub ctx: AcquisitionContext,
    pub trace: RunTrace,
    pub cv: LooReport,
    /// Replications per initial point after any cross-validation doublings.
    pub init_reps_used: u64,
    pub warnings: Vec<String>,
    pub iteration: usize,
    points_since_refit: usize,
    refits: u64,
}

impl CgloState {
    pub fn best(&self) -> (usize, &[f64], f64) {
        let b = self.data.best().expect("the design is never empty");
        let p = self.data.point(b);
        (b, &p.x, p.sample_mean())
    }

    fn record(&mut self, region: Option<usize>, n_new: usize, b1: u64, b2: u64, clock: &Stopwatch) {
        let (_, x, mean) = self.best();
        let row = TraceRow {
            iter: self.iteration,
            consumed: self.budget.consumed(),
            region,
            n_new,
            b1,
            b2,
            best_x: x.to_vec(),
            best_mean: mean,
            wall_ms: clock.elapsed_ms(),
            n_points: self.data.len(),
            n_region: region.map_or(0, |r| self.data.region_members(r).len()),
            min_reps: self.data.points().iter().map(|p| p.reps()).min().unwrap_or(0),
            required_reps: self.budget.kappa_ceil(self.data.len()),
        };
        self.trace.push(row);
    }

    fn fit_options(&self, cfg: &CgloConfig, starts: usize) -> AglgpOptions {
        AglgpOptions {
            fit: FitOptions {
                starts,
                seed: derive_seed(cfg.seed, &[TAG_FIT, self.refits]),
                ..FitOptions::default()
            },
            noise_prior: cfg.noise_prior,
        }
    }

    /// Recomputes the model for changed data: a warm-started refit when
    /// enough new points arrived, otherwise a cache refresh.
    fn update_model(&mut self, cfg: &CgloConfig, force_refit: bool) -> Result<()> {
        if force_refit || self.points_since_refit >= cfg.refit_every {
            self.refits += 1;
            let opts = self.fit_options(cfg, cfg.refit_starts);
            self.model = AglgpModel::fit_warm(&self.data, &self.partition, &self.inducing, &opts, Some(&self.model))?;
            self.points_since_refit = 0;
            return Ok(());
        }
        match self.model.refresh(&self.data, &self.inducing) {
            Ok(m) => {
                self.model = m;
                Ok(())
            }
            Err(_) => self.update_model(cfg, true),
        }
    }

    fn check_invariants(&self) -> Result<()> {
        if self.budget.consumed() != self.data.total_reps() {
            return Err(Error::InvariantViolated(format!(
                "budget ledger {} differs from the dataset's {} replications",
                self.budget.consumed(),
                self.data.total_reps()
            )));
        }
        let need = self.budget.kappa_ceil(self.data.len());
        if let Some((i, p)) = self.data.points().iter().enumerate().find(|(_, p)| p.reps() < need) {
            return Err(Error::InvariantViolated(format!(
                "point {i} has {} replications, below the required {need} at N = {}",
                p.reps(),
                self.data.len()
            )));
        }
        Ok(())
    }
}

/// Region-constrained Latin hypercube: fresh LHS batches in the cell's
/// bounding box, keeping points whose nearest center is `region`.
pub fn region_lhs(partition: &Partition, region: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let cell = &partition.region(region).cell_box;
    let mut out = Vec::with_capacity(n);
    for round in 0..REJECTION_ROUNDS {
        let mut rng = rng_from(seed, &[round as u64]);
        for x in latin_hypercube(n, cell, &mut rng) {
            if partition.nearest(&x) == region {
                out.push(x);
                if out.len() == n {
                    return out;
                }
            }
        }
    }
    out
}

/// Fixed global candidate set: an LHS over the domain, with regions short
/// of `min_per_region` topped up by rejection sampling inside their cells.
pub fn build_candidates(partition: &Partition, count: usize, min_per_region: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed, &[TAG_CANDIDATES]);
    let mut cands = latin_hypercube(count, partition.bounds(), &mut rng);
    let mut per = vec![0usize; partition.len()];
    cands.iter().for_each(|c| per[partition.nearest(c)] += 1);
    for r in 0..partition.len() {
        let cell = &partition.region(r).cell_box;
        let mut round = 0;
        while per[r] < min_per_region && round < REJECTION_ROUNDS {
            let mut rng = rng_from(seed, &[TAG_CANDIDATES, r as u64, round as u64]);
            for x in uniform_points(4 * min_per_region, cell, &mut rng) {
                if per[r] < min_per_region && partition.nearest(&x) == r {
                    cands.push(x);
                    per[r] += 1;
                }
            }
            round += 1;
        }
        if per[r] == 0 {
            cands.push(partition.region(r).center.clone());
        }
    }
    cands
}

/// Step 1: space-filling design, regions, inducing points, first fit and
/// a leave-one-out check (doubling the initial replications on failure).
pub fn initialize(objective: &StochasticObjective, cfg: &CgloConfig) -> Result<CgloState> {
    let clock = Stopwatch::start();
    let dim = objective.dim();
    cfg.validate(dim)?;
    let bounds = objective.bounds().clone();
    let k = cfg.resolved_k(dim);
    let mut budget = BudgetState::new(cfg.total_budget, cfg.r_min, cfg.b2, cfg.kappa_coef)?;

    let mut rng = rng_from(cfg.seed, &[TAG_DESIGN]);
    let xs = latin_hypercube(cfg.n0, &bounds, &mut rng);
    let partition =
        Partition::build(&xs, k, derive_seed(cfg.seed, &[TAG_PARTITION]), &bounds).map_err(|e| Error::Stage {
            stage: "partition",
            region: None,
            source: Box::new(e),
        })?;
    let mut data = Dataset::new(bounds.clone());
    for x in xs {
        let m = objective
            .evaluate(&x, cfg.init_reps)
            .map_err(|e| Error::Evaluation { point: data.len(), source: Box::new(e) })?;
        let r = partition.nearest(&x);
        data.push(x, m, r)?;
    }
    budget.consume(cfg.n0 as u64 * cfg.init_reps)?;

    let ind_opts = InducingOptions { seed: derive_seed(cfg.seed, &[TAG_INDUCING]), ..InducingOptions::default() };
    let fit_opts = AglgpOptions {
        fit: FitOptions { starts: cfg.fit_starts, seed: derive_seed(cfg.seed, &[TAG_FIT, 0]), ..FitOptions::default() },
        noise_prior: cfg.noise_prior,
    };
    let mut warnings = Vec::new();
    let mut reps = cfg.init_reps;
    let mut doublings = 0;
    let (inducing, model, cv) = loop {
        let inducing = select_inducing(&data, &partition, &ind_opts)?;
        let model = AglgpModel::fit(&data, &partition, &inducing, &fit_opts)?;
        let cv = model.loo_cross_validate(&data, &inducing)?;
        let extra = cfg.n0 as u64 * reps;
        if cv.passed || doublings == MAX_CV_DOUBLINGS || extra > budget.remaining() {
            if !cv.passed {
                warnings.push(format!(
                    "cross-validation failed (max |z| = {:.3}) with {reps} initial replications; continuing",
                    cv.max_abs
                ));
            }
            break (inducing, model, cv);
        }
        let plan: Vec<(usize, u64)> = (0..data.len()).map(|i| (i, reps)).collect();
        apply_plan(objective, &mut data, &plan, &mut budget)?;
        reps *= 2;
        doublings += 1;
    };

    let (lo, hi) = default_clamps(&data.means());
    let clamps = (cfg.mean_lo.unwrap_or(lo), cfg.mean_hi.unwrap_or(hi));
    let cands = build_candidates(
        &partition,
        cfg.resolved_candidate_count(dim),
        cfg.min_candidates_per_region(dim),
        cfg.seed,
    );
    let ctx = AcquisitionContext::new(cfg.v, inducing.min_pairwise_distance(), clamps, cands, &partition)?;
    let mut state = CgloState {
        data,
        partition,
        inducing,
        model,
        budget,
        ctx,
        trace: RunTrace::new("cglo"),
        cv,
        init_reps_used: reps,
        warnings,
        iteration: 0,
        points_since_refit: 0,
        refits: 0,
    };
    state.record(None, 0, 0, 0, &clock);
    Ok(state)
}

/// Step 2.1: the candidate with the largest global criterion.
pub fn global_step(state: &CgloState) -> GlobalStepResult {
    let scorer = GeiScorer::new(&state.model, &state.ctx, &state.data);
    let (i, value) = scorer.argmax();
    GlobalStepResult {
        x_g0: state.ctx.candidates()[i].clone(),
        candidate: i,
        region: state.ctx.candidate_regions()[i],
        gei_value: value,
    }
}

/// Step 2.2: add local-criterion maximizers in the promising region until
/// `gEI(x_g0) <= G*`, the effort cap, or the budget stops it.
pub fn local_step(
    objective: &StochasticObjective,
    state: &mut CgloState,
    cfg: &CgloConfig,
    step: &GlobalStepResult,
) -> Result<LocalOutcome> {
    let region = step.region;
    let grid_size = cfg.resolved_local_grid_size(objective.dim());
    let mut out = LocalOutcome::default();
    loop {
        if state.budget.remaining() < cfg.r_min {
            out.exhausted = true;
            break;
        }
        let seed = derive_seed(cfg.seed, &[TAG_LOCAL_GRID, state.iteration as u64, out.n_new as u64]);
        let grid = region_lhs(&state.partition, region, grid_size, seed);
        let Some(x) = best_new_point(state, region, &grid)? else {
            break;
        };
        let moments = objective
            .evaluate(&x, cfg.r_min)
            .map_err(|e| Error::Evaluation { point: state.data.len(), source: Box::new(e) })?;
        state.budget.consume(cfg.r_min)?;
        state.data.push(x, moments, region)?;
        out.n_new += 1;
        state.points_since_refit += 1;

        state.inducing.reselect_region(&state.data, &state.partition, region)?;
        state.ctx = state.ctx.clone().with_kappa(state.inducing.min_pairwise_distance());
        state.update_model(cfg, false)?;

        let scorer = GeiScorer::new(&state.model, &state.ctx, &state.data);
        let g0 = scorer.score_in(region, &step.x_g0);
        let g_star = scorer.threshold_excluding(region)?;
        if g0 <= g_star {
            out.switched = true;
            break;
        }
        if cfg.max_local_points.is_some_and(|cap| out.n_new >= cap) {
            break;
        }
    }
    Ok(out)
}

/// Grid point with the largest local criterion that is not already a
/// design point (ties to the lowest grid index).
fn best_new_point(state: &CgloState, region: usize, grid: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let scorer = MeiScorer::new(&state.model, &state.ctx, &state.data, region)?;
    let mut scored: Vec<(usize, f64)> = grid.iter().enumerate().map(|(i, x)| (i, scorer.score(x))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let tol = DEDUP_TOL * DEDUP_TOL;
    Ok(scored
        .into_iter()
        .map(|(i, _)| &grid[i])
        .find(|x| state.data.points().iter().all(|p| sq_dist(&p.x, x) > tol))
        .cloned())
}

/// Step 3: minimum-replication top-up everywhere, then OCBA inside the
/// promising region.
pub fn allocation_step(
    objective: &StochasticObjective,
    state: &mut CgloState,
    cfg: &CgloConfig,
    region: usize,
) -> Result<AllocationOutcome> {
    let mut out = AllocationOutcome::default();
    let topup = min_rep_topup(&state.data, &state.budget);
    out.b1 = apply_plan(objective, &mut state.data, &topup.plan, &mut state.budget)?;
    if topup.truncated {
        out.exhausted = true;
    } else {
        let b2 = cfg.b2.min(state.budget.remaining());
        if b2 > 0 {
            let fallback = state.data.median_sample_var().or(cfg.noise_prior).unwrap_or(0.0);
            let pts: Vec<(f64, f64, usize)> = state
                .data
                .region_members(region)
                .into_iter()
                .map(|i| {
                    let p = state.data.point(i);
                    (p.sample_mean(), p.sample_var().unwrap_or(fallback).sqrt(), i)
                })
                .collect();
            if !pts.is_empty() {
                let plan = ocba_allocate(&pts, b2)?;
                out.b2 = apply_plan(objective, &mut state.data, &plan, &mut state.budget)?;
            }
        }
        out.exhausted = state.budget.exhausted();
        if cfg.check_invariants {
            state.check_invariants()?;
        }
    }
    if out.b1 + out.b2 > 0 {
        state.update_model(cfg, false)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best_x: Vec<f64>,
    /// Lowest sample mean over all design points.
    pub best_mean: f64,
    pub trace: RunTrace,
    pub state: CgloState,
}

/// A failed run with the trace of the iterations that completed.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunError {
    #[source]
    pub error: Error,
    pub trace: RunTrace,
}

/// Stepwise driver, one search iteration per call to [`Session::step`].
#[derive(Debug, Clone)]
pub struct Session {
    objective: StochasticObjective,
    cfg: CgloConfig,
    state: CgloState,
    clock: Stopwatch,
    done: bool,
}

/// Summary of one completed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub global: GlobalStepResult,
    pub local: LocalOutcome,
    pub allocation: AllocationOutcome,
}

impl Session {
    pub fn new(objective: StochasticObjective, cfg: CgloConfig) -> Result<Self> {
        let clock = Stopwatch::start();
        let state = initialize(&objective, &cfg)?;
        let done = state.budget.exhausted() || cfg.max_iterations == Some(0);
        Ok(Self { objective, cfg, state, clock, done })
    }

    pub fn state(&self) -> &CgloState {
        &self.state
    }

    pub fn config(&self) -> &CgloConfig {
        &self.cfg
    }

    pub fn objective(&self) -> &StochasticObjective {
        &self.objective
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Runs one global/local/allocation iteration; `None` once finished.
    pub fn step(&mut self) -> Result<Option<Iteration>> {
        if self.done {
            return Ok(None);
        }
        let before = self.state.budget.consumed();
        self.state.iteration += 1;
        let global = global_step(&self.state);
        let local = local_step(&self.objective, &mut self.state, &self.cfg, &global)?;
        let allocation = allocation_step(&self.objective, &mut self.state, &self.cfg, global.region)?;
        self.state.record(Some(global.region), local.n_new, allocation.b1, allocation.b2, &self.clock);
        let stalled = self.state.budget.consumed() == before;
        self.done = self.state.budget.exhausted()
            || allocation.exhausted
            || stalled
            || self.cfg.max_iterations.is_some_and(|m| self.state.iteration >= m);
        Ok(Some(Iteration { global, local, allocation }))
    }

    pub fn finish(self) -> RunResult {
        let (_, x, mean) = self.state.best();
        RunResult { best_x: x.to_vec(), best_mean: mean, trace: self.state.trace.clone(), state: self.state }
    }
}

/// Algorithm loop until the budget (or the iteration cap) is spent.
pub fn run(objective: &StochasticObjective, cfg: &CgloConfig) -> std::result::Result<RunResult, RunError> {
    let mut session =
        Session::new(objective.clone(), cfg.clone()).map_err(|error| RunError { error, trace: RunTrace::new("cglo") })?;
    loop {
        match session.step() {
            Ok(Some(_)) => {}
            Ok(None) => break,
            Err(error) => return Err(RunError { error, trace: session.state.trace.clone() }),
        }
    }
    Ok(session.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Bounds;
    use crate::objectives::{make_1d_paper, StochasticObjective};

    #[test]
    fn region_count_rule() {
        let c = CgloConfig { n0: 12, k: 0, ..CgloConfig::default() };
        assert_eq!(c.resolved_k(1), 3);
        let c = CgloConfig { n0: 40, k: 0, ..CgloConfig::default() };
        assert_eq!(c.resolved_k(2), 5);
        let c = CgloConfig { n0: 8, k: 0, ..CgloConfig::default() };
        assert_eq!(c.resolved_k(3), 2);
        let c = CgloConfig { n0: 1000, k: 0, ..CgloConfig::default() };
        assert_eq!(c.resolved_k(1), 10);
    }

    #[test]
    fn config_validation_messages() {
        let c = CgloConfig { n0: 5, k: 3, ..CgloConfig::default() };
        let e = c.validate(1).unwrap_err().to_string();
        assert!(e.contains("n0 = 5") && e.contains("2K = 6"), "{e}");
        let c = CgloConfig { total_budget: 100, ..CgloConfig::paper_1d(0, 100) };
        assert!(matches!(c.validate(1), Err(Error::Config(_))));
    }

    #[test]
    fn region_lhs_stays_in_region() {
        let b = Bounds::unit(2);
        let p = Partition::from_centers(vec![vec![0.2, 0.2], vec![0.8, 0.3], vec![0.5, 0.9]], &b, None).unwrap();
        for r in 0..3 {
            let pts = region_lhs(&p, r, 200, 9);
            assert_eq!(pts.len(), 200);
            assert!(pts.iter().all(|x| p.nearest(x) == r));
        }
    }

    #[test]
    fn candidates_cover_every_region() {
        let b = Bounds::unit(2);
        // one tiny cell squeezed between two others
        let p = Partition::from_centers(vec![vec![0.5, 0.5], vec![0.52, 0.5], vec![0.1, 0.1]], &b, None).unwrap();
        let c = build_candidates(&p, 30, 5, 1);
        let mut per = [0; 3];
        c.iter().for_each(|x| per[p.nearest(x)] += 1);
        assert!(per.iter().all(|&n| n >= 5), "{per:?}");
    }

    #[test]
    fn zero_search_budget_returns_the_initial_best() {
        let obj = make_1d_paper(1);
        let cfg = CgloConfig { total_budget: 240, ..CgloConfig::paper_1d(1, 240) };
        let r = run(&obj, &cfg).unwrap();
        assert_eq!(r.trace.rows.len(), 1);
        let best = r.state.data.best().unwrap();
        assert_eq!(r.best_mean, r.state.data.point(best).sample_mean());
    }

    #[test]
    fn effort_cap_limits_local_points() {
        let obj = make_1d_paper(2);
        let cfg = CgloConfig { max_local_points: Some(1), max_iterations: Some(3), ..CgloConfig::paper_1d(2, 3000) };
        let r = run(&obj, &cfg).unwrap();
        assert_eq!(r.trace.iterations(), 3);
        assert!(r.trace.rows[1..].iter().all(|row| row.n_new == 1));
    }

    #[test]
    fn global_step_picks_the_region_with_the_lowest_trend() {
        let obj = StochasticObjective::new("ramp", Bounds::unit(1), |x: &[f64]| 20.0 * x[0], |_: &[f64]| 0.1, 3);
        let cfg = CgloConfig { max_iterations: Some(1), ..CgloConfig::paper_1d(3, 3000) };
        let state = initialize(&obj, &cfg).unwrap();
        let g = global_step(&state);
        let lowest = (0..state.partition.len())
            .min_by(|&a, &b| state.partition.region(a).center[0].total_cmp(&state.partition.region(b).center[0]))
            .unwrap();
        assert_eq!(g.region, lowest);
        assert_eq!(g.region, state.partition.nearest(&g.x_g0));
        assert_eq!(state.ctx.candidates()[g.candidate], g.x_g0);
    }

    #[test]
    fn long_1d_run_visits_several_regions() {
        let obj = make_1d_paper(0);
        let cfg = CgloConfig { max_iterations: Some(15), ..CgloConfig::paper_1d(0, 100_000) };
        let r = run(&obj, &cfg).unwrap();
        let mut regions: Vec<usize> = r.trace.rows.iter().filter_map(|row| row.region).collect();
        regions.sort_unstable();
        regions.dedup();
        assert!(regions.len() >= 2, "{regions:?}");
        let min = r.state.data.means().into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_mean, min);
    }

    #[test]
    fn short_run_keeps_invariants_and_is_deterministic() {
        let obj = make_1d_paper(5);
        let cfg = CgloConfig { max_iterations: Some(4), ..CgloConfig::paper_1d(5, 2000) };
        let a = run(&obj, &cfg).unwrap();
        let b = run(&obj, &cfg).unwrap();
        assert_eq!(a.trace.without_wall_time(), b.trace.without_wall_time());
        assert_eq!(a.state.budget.consumed(), a.state.data.total_reps());
        for w in a.trace.rows.windows(2) {
            assert!(w[1].consumed >= w[0].consumed && w[1].n_points >= w[0].n_points);
        }
        for row in &a.trace.rows[1..] {
            assert!(row.min_reps >= row.required_reps);
        }
        // every new point lies in the region chosen for its iteration
        let mut seen = cfg.n0;
        for row in &a.trace.rows[1..] {
            for i in seen..seen + row.n_new {
                assert_eq!(a.state.partition.nearest(&a.state.data.point(i).x), row.region.unwrap());
            }
            seen += row.n_new;
        }
    }
}
