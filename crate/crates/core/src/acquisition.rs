//! Expected-improvement criteria: the density-penalized global criterion,
//! the modified local criterion, and the switching threshold.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

use crate::aglgp::AglgpModel;
use crate::dataset::{sq_dist, Dataset};
use crate::partition::Partition;
use crate::{Error, Result};

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `E[max(best - Y, 0)]` for `Y ~ N(mean, sd^2)`.
pub fn ei_closed(best: f64, mean: f64, sd: f64) -> f64 {
    let diff = best - mean;
    if !(sd > 0.0) {
        return diff.max(0.0);
    }
    let z = diff / sd;
    (diff * norm_cdf(z) + sd * norm_pdf(z)).max(0.0)
}

/// Logistic density penalty `1 / (1 + exp(n_a / v - 5))`.
pub fn penalty(n_a: usize, v: f64) -> f64 {
    1.0 / (1.0 + (n_a as f64 / v - 5.0).exp())
}

/// Design points of `region` strictly closer than `radius` to `x`.
pub fn count_neighbors(data: &Dataset, region: usize, x: &[f64], radius: f64) -> usize {
    let r2 = radius * radius;
    data.points()
        .iter()
        .filter(|p| p.region == region && sq_dist(&p.x, x) < r2)
        .count()
}

/// Mean clamps from the initial sample means: `(min - 5 range, max + 5 range)`.
pub fn default_clamps(means: &[f64]) -> (f64, f64) {
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1e6, 1e6);
    }
    let range = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
    (lo - 5.0 * range, hi + 5.0 * range)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionContext {
    /// Penalty steepness.
    pub v: f64,
    /// Neighborhood radius for the density count.
    pub kappa_radius: f64,
    pub mean_lo: f64,
    pub mean_hi: f64,
    candidates: Vec<Vec<f64>>,
    candidate_regions: Vec<usize>,
}

impl AcquisitionContext {
    /// Checks the parameters and that every region holds a candidate.
    pub fn new(
        v: f64,
        kappa_radius: f64,
        (mean_lo, mean_hi): (f64, f64),
        candidates: Vec<Vec<f64>>,
        partition: &Partition,
    ) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("penalty steepness v = {v} must be positive")));
        }
        if !(kappa_radius > 0.0 && kappa_radius.is_finite()) {
            return Err(Error::invalid(format!("neighborhood radius {kappa_radius} must be positive")));
        }
        if !(mean_lo < mean_hi) {
            return Err(Error::invalid(format!("mean clamps [{mean_lo}, {mean_hi}] are not ordered")));
        }
        let candidate_regions: Vec<usize> = candidates.iter().map(|c| partition.nearest(c)).collect();
        let mut covered = vec![false; partition.len()];
        candidate_regions.iter().for_each(|&r| covered[r] = true);
        if let Some(r) = covered.iter().position(|c| !c) {
            return Err(Error::invalid(format!("no global candidate lies in region {r}")));
        }
        Ok(Self { v, kappa_radius, mean_lo, mean_hi, candidates, candidate_regions })
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn candidate_regions(&self) -> &[usize] {
        &self.candidate_regions
    }

    pub fn with_kappa(mut self, kappa_radius: f64) -> Self {
        self.kappa_radius = kappa_radius;
        self
    }

    fn clamp(&self, m: f64) -> f64 {
        m.clamp(self.mean_lo, self.mean_hi)
    }
}

/// Global criterion with the incumbent `y_gmin` computed once.
#[derive(Debug, Clone, Copy)]
pub struct GeiScorer<'a> {
    model: &'a AglgpModel,
    ctx: &'a AcquisitionContext,
    data: &'a Dataset,
    y_gmin: f64,
}

impl<'a> GeiScorer<'a> {
    pub fn new(model: &'a AglgpModel, ctx: &'a AcquisitionContext, data: &'a Dataset) -> Self {
        let y_gmin = model.global_min_at_inducing(ctx.mean_lo, ctx.mean_hi);
        Self { model, ctx, data, y_gmin }
    }

    pub fn y_gmin(&self) -> f64 {
        self.y_gmin
    }

    /// EI factor of the criterion, before the density penalty.
    pub fn ei_term(&self, x: &[f64]) -> f64 {
        let p = self.model.predict_global(x);
        ei_closed(self.y_gmin, self.ctx.clamp(p.mean), p.sd())
    }

    pub fn score_in(&self, region: usize, x: &[f64]) -> f64 {
        let n_a = count_neighbors(self.data, region, x, self.ctx.kappa_radius);
        self.ei_term(x) * penalty(n_a, self.ctx.v)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.score_in(self.model.partition().nearest(x), x)
    }

    pub fn score_candidate(&self, i: usize) -> f64 {
        self.score_in(self.ctx.candidate_regions[i], &self.ctx.candidates[i])
    }

    /// Largest criterion value among candidates outside `region`.
    pub fn threshold_excluding(&self, region: usize) -> Result<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.ctx.candidates.len() {
            if self.ctx.candidate_regions[i] != region {
                let s = self.score_candidate(i);
                best = Some(best.map_or(s, |b: f64| b.max(s)));
            }
        }
        best.ok_or_else(|| Error::InvalidState(format!("every global candidate lies in region {region}")))
    }

    /// Candidate index with the largest criterion, ties to the lowest index.
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.ctx.candidates.len() {
            let s = self.score_candidate(i);
            if s > best.1 {
                best = (i, s);
            }
        }
        best
    }
}

pub fn gei(model: &AglgpModel, ctx: &AcquisitionContext, data: &Dataset, x: &[f64]) -> f64 {
    GeiScorer::new(model, ctx, data).score(x)
}

/// `G*`: the best global criterion value among other regions' candidates.
pub fn switch_threshold(model: &AglgpModel, ctx: &AcquisitionContext, data: &Dataset, region: usize) -> Result<f64> {
    GeiScorer::new(model, ctx, data).threshold_excluding(region)
}

/// Local criterion for one region, with `y_min` computed once.
#[derive(Debug, Clone, Copy)]
pub struct MeiScorer<'a> {
    model: &'a AglgpModel,
    ctx: &'a AcquisitionContext,
    region: usize,
    y_min: f64,
}

impl<'a> MeiScorer<'a> {
    pub fn new(model: &'a AglgpModel, ctx: &'a AcquisitionContext, data: &Dataset, region: usize) -> Result<Self> {
        if region >= model.partition().len() {
            return Err(Error::invalid(format!("unknown region {region}")));
        }
        let y_min = data
            .points()
            .iter()
            .filter(|p| p.region == region)
            .map(|p| ctx.clamp(model.predict_overall_in(region, &p.x).mean))
            .fold(f64::INFINITY, f64::min);
        if !y_min.is_finite() {
            return Err(Error::InvalidState(format!("region {region} has no design points")));
        }
        Ok(Self { model, ctx, region, y_min })
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    /// Criterion value without the region membership check.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mean = self.ctx.clamp(self.model.predict_overall_in(self.region, x).mean);
        let sd = self.model.spatial_variance(self.region, x).sqrt();
        ei_closed(self.y_min, mean, sd)
    }
}

pub fn mei(model: &AglgpModel, ctx: &AcquisitionContext, data: &Dataset, region: usize, x: &[f64]) -> Result<f64> {
    let owner = model.partition().nearest(x);
    if owner != region {
        return Err(Error::invalid(format!("point {x:?} lies in region {owner}, not {region}")));
    }
    Ok(MeiScorer::new(model, ctx, data, region)?.score(x))
}
