//! The additive global/local GP surrogate, fitted in two stages: a FITC
//! global trend over the inducing points, then one residual GP per region.
//!
//! Inputs are rescaled to the unit box before any kernel evaluation, so the
//! fitted lengthscales refer to unit-box coordinates.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{sq_dist, Bounds, Dataset};
use crate::gp::{fit_hyperparams, FitOptions, FitcFactor, HyperBounds, Prediction, Structure};
use crate::inducing::InducingSet;
use crate::kernel::{build_cov, cov_vector, cross_cov, CovMatrix, GpHyperparams, Lengthscales, VARIANCE_FLOOR};
use crate::partition::Partition;
use crate::{Error, Result};

/// Squared unit-box distance below which a query counts as a sampled point.
const SAMPLED_TOL_SQ: f64 = 1e-24;

#[derive(Debug, Clone, Default)]
pub struct AglgpOptions {
    pub fit: FitOptions,
    /// Noise variance of one replication for points with a single replication;
    /// `None` uses the median of the available sample variances.
    pub noise_prior: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GlobalModel {
    hp: GpHyperparams,
    inducing: Vec<Vec<f64>>,
    factor: FitcFactor,
    /// `A^{-1} V D^{-1} (Y - mu)`.
    weights: DVector<f64>,
}

impl GlobalModel {
    fn new(xs: &[Vec<f64>], y: &[f64], noise: &[f64], inducing: Vec<Vec<f64>>, hp: GpHyperparams) -> Result<Self> {
        let factor = FitcFactor::new(xs, &inducing, &hp, noise)?;
        let r = DVector::from_iterator(y.len(), y.iter().map(|v| v - hp.mean));
        let weights = factor.a.solve(&(&factor.v * r.component_div(&factor.d)));
        Ok(Self { hp, inducing, factor, weights })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    /// Inducing points in unit-box coordinates.
    pub fn inducing(&self) -> &[Vec<f64>] {
        &self.inducing
    }

    /// Largest amount by which a negative diagonal correction was raised to 0.
    pub fn lambda_clamp(&self) -> f64 {
        self.factor.lambda_clamp
    }

    fn predict_unit(&self, u: &[f64]) -> Prediction {
        let g = cov_vector(u, &self.inducing, &self.hp);
        let k = self.factor.g_m.solve_lower(&g);
        let mean = self.hp.mean + k.dot(&self.weights);
        let variance = self.hp.variance - k.norm_squared() + k.dot(&self.factor.a.solve(&k));
        Prediction { mean, variance: variance.clamp(0.0, self.hp.variance) }
    }
}

#[derive(Debug, Clone)]
pub struct LocalModel {
    region: usize,
    hp: GpHyperparams,
    /// Region members in unit-box coordinates.
    points: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    caches: Option<LocalCaches>,
}

#[derive(Debug, Clone)]
struct LocalCaches {
    noisy: CovMatrix,
    /// `L_k` alone; `None` when it cannot be factorized even with jitter.
    spatial: Option<CovMatrix>,
    alpha: DVector<f64>,
}

impl LocalModel {
    fn new(region: usize, points: Vec<Vec<f64>>, residuals: Vec<f64>, noise: &[f64], hp: GpHyperparams) -> Result<Self> {
        let caches = if points.is_empty() {
            None
        } else {
            let noisy = build_cov(&points, &hp, Some(noise))?;
            let spatial = build_cov(&points, &hp, None).ok();
            let alpha = noisy.solve(&DVector::from_column_slice(&residuals));
            Some(LocalCaches { noisy, spatial, alpha })
        };
        Ok(Self { region, hp, points, residuals, caches })
    }

    pub fn region(&self) -> usize {
        self.region
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    /// Residuals `Y - y_g` at the region's design points.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    fn predict_unit(&self, u: &[f64]) -> Prediction {
        let Some(c) = &self.caches else {
            return Prediction { mean: 0.0, variance: self.hp.variance };
        };
        let l = cov_vector(u, &self.points, &self.hp);
        let w = c.noisy.solve_lower(&l);
        Prediction {
            mean: l.dot(&c.alpha),
            variance: (self.hp.variance - w.norm_squared()).clamp(0.0, self.hp.variance),
        }
    }

    fn spatial_variance_unit(&self, u: &[f64]) -> f64 {
        let Some(c) = &self.caches else {
            return self.hp.variance;
        };
        if self.points.iter().any(|p| sq_dist(p, u) <= SAMPLED_TOL_SQ) {
            return 0.0;
        }
        let l = cov_vector(u, &self.points, &self.hp);
        let w = c.spatial.as_ref().unwrap_or(&c.noisy).solve_lower(&l);
        (self.hp.variance - w.norm_squared()).clamp(0.0, self.hp.variance)
    }
}

/// A fitted model. Immutable; refits and refreshes build new values.
#[derive(Debug, Clone)]
pub struct AglgpModel {
    bounds: Bounds,
    partition: Partition,
    global: GlobalModel,
    locals: Vec<LocalModel>,
    noise_prior: Option<f64>,
}

fn stage(stage: &'static str, region: Option<usize>) -> impl FnOnce(Error) -> Error {
    move |e| Error::Stage { stage, region, source: Box::new(e) }
}

impl AglgpModel {
    /// Two-stage fit: global FITC hyperparameters by maximum likelihood on
    /// the sample means, then per-region residual models with lengthscales
    /// bounded below by the global ones.
    pub fn fit(data: &Dataset, partition: &Partition, inducing: &InducingSet, opts: &AglgpOptions) -> Result<Self> {
        Self::fit_warm(data, partition, inducing, opts, None)
    }

    /// Like [`AglgpModel::fit`], adding the hyperparameters of `previous` as
    /// extra optimizer starts.
    pub fn fit_warm(
        data: &Dataset,
        partition: &Partition,
        inducing: &InducingSet,
        opts: &AglgpOptions,
        previous: Option<&AglgpModel>,
    ) -> Result<Self> {
        check_inputs(data, partition, inducing)?;
        if data.len() < 3 {
            return Err(Error::invalid(format!("the model needs at least 3 design points, got {}", data.len())));
        }
        if let Some(r) = (0..partition.len()).find(|&r| data.region_members(r).is_empty()) {
            return Err(Error::invalid(format!("region {r} has no design points")));
        }
        let bounds = data.bounds().clone();
        let xs: Vec<Vec<f64>> = data.points().iter().map(|p| bounds.to_unit(&p.x)).collect();
        let y = data.means();
        let noise = data.mean_noise_variances(opts.noise_prior);
        let ind_unit: Vec<Vec<f64>> = inducing.points().iter().map(|p| bounds.to_unit(p)).collect();

        let mut fit = opts.fit.clone();
        fit.warm_start = previous.map(|m| m.global.hp.clone());
        let global_hp = fit_hyperparams(
            &xs,
            &y,
            &noise,
            Structure::Fitc { inducing: &ind_unit },
            &HyperBounds::default_for(&y, bounds.dim(), None),
            None,
            &fit,
        )
        .map_err(stage("global", None))?;
        let global = GlobalModel::new(&xs, &y, &noise, ind_unit, global_hp).map_err(stage("global", None))?;

        let mut local_hps = Vec::with_capacity(partition.len());
        for r in 0..partition.len() {
            let members = data.region_members(r);
            let pts: Vec<Vec<f64>> = members.iter().map(|&i| xs[i].clone()).collect();
            let res: Vec<f64> = members.iter().map(|&i| y[i] - global.predict_unit(&xs[i]).mean).collect();
            let nz: Vec<f64> = members.iter().map(|&i| noise[i]).collect();
            let mut fit = opts.fit.clone();
            fit.seed = crate::design::derive_seed(opts.fit.seed, &[0x6c6f63, r as u64]);
            fit.warm_start = previous.and_then(|m| m.locals.get(r)).map(|l| l.hp.clone());
            let hp = fit_local(&pts, &res, &nz, &global.hp.lengthscales, &fit).map_err(stage("local", Some(r)))?;
            local_hps.push(hp);
        }
        Self::assemble(data, partition, global, local_hps, opts.noise_prior)
    }

    /// Builds a model with every hyperparameter given; nothing is estimated.
    pub fn from_hyperparams(
        data: &Dataset,
        partition: &Partition,
        inducing: &InducingSet,
        global_hp: GpHyperparams,
        local_hps: Vec<GpHyperparams>,
        noise_prior: Option<f64>,
    ) -> Result<Self> {
        check_inputs(data, partition, inducing)?;
        if local_hps.len() != partition.len() {
            return Err(Error::invalid(format!(
                "{} local hyperparameter sets for {} regions",
                local_hps.len(),
                partition.len()
            )));
        }
        if data.is_empty() {
            return Err(Error::invalid("no design points"));
        }
        let bounds = data.bounds();
        let xs: Vec<Vec<f64>> = data.points().iter().map(|p| bounds.to_unit(&p.x)).collect();
        let noise = data.mean_noise_variances(noise_prior);
        let ind_unit = inducing.points().iter().map(|p| bounds.to_unit(p)).collect();
        let global =
            GlobalModel::new(&xs, &data.means(), &noise, ind_unit, global_hp).map_err(stage("global", None))?;
        Self::assemble(data, partition, global, local_hps, noise_prior)
    }

    /// Same hyperparameters, recomputed residuals and factorizations for new
    /// data or a new inducing set.
    pub fn refresh(&self, data: &Dataset, inducing: &InducingSet) -> Result<Self> {
        Self::from_hyperparams(
            data,
            &self.partition,
            inducing,
            self.global.hp.clone(),
            self.locals.iter().map(|l| l.hp.clone()).collect(),
            self.noise_prior,
        )
    }

    fn assemble(
        data: &Dataset,
        partition: &Partition,
        global: GlobalModel,
        local_hps: Vec<GpHyperparams>,
        noise_prior: Option<f64>,
    ) -> Result<Self> {
        let bounds = data.bounds().clone();
        let noise = data.mean_noise_variances(noise_prior);
        let locals = local_hps
            .into_iter()
            .enumerate()
            .map(|(r, hp)| {
                let members = data.region_members(r);
                let pts: Vec<Vec<f64>> = members.iter().map(|&i| bounds.to_unit(&data.point(i).x)).collect();
                let res = members
                    .iter()
                    .zip(&pts)
                    .map(|(&i, u)| data.point(i).sample_mean() - global.predict_unit(u).mean)
                    .collect();
                let nz: Vec<f64> = members.iter().map(|&i| noise[i]).collect();
                LocalModel::new(r, pts, res, &nz, hp).map_err(stage("local", Some(r)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bounds, partition: partition.clone(), global, locals, noise_prior })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn global(&self) -> &GlobalModel {
        &self.global
    }

    pub fn locals(&self) -> &[LocalModel] {
        &self.locals
    }

    pub fn local(&self, region: usize) -> &LocalModel {
        &self.locals[region]
    }

    /// Maps a point from the problem domain to the model's unit-box coordinates.
    pub fn to_model_coords(&self, x: &[f64]) -> Vec<f64> {
        self.bounds.to_unit(x)
    }

    /// Global-stage prediction. Panics if `x0` has the wrong dimension.
    pub fn predict_global(&self, x0: &[f64]) -> Prediction {
        self.global.predict_unit(&self.bounds.to_unit(x0))
    }

    /// Local-stage prediction using the residual model of `x0`'s own region.
    pub fn predict_local(&self, x0: &[f64]) -> Prediction {
        self.predict_local_in(self.partition.nearest(x0), x0)
    }

    /// Local-stage prediction from the residual model of `region`.
    pub fn predict_local_in(&self, region: usize, x0: &[f64]) -> Prediction {
        self.locals[region].predict_unit(&self.bounds.to_unit(x0))
    }

    /// Sum of the two stages; the variances add under the independence of
    /// the global and local processes.
    pub fn predict_overall(&self, x0: &[f64]) -> Prediction {
        self.predict_overall_in(self.partition.nearest(x0), x0)
    }

    pub fn predict_overall_in(&self, region: usize, x0: &[f64]) -> Prediction {
        let u = self.bounds.to_unit(x0);
        let g = self.global.predict_unit(&u);
        let l = self.locals[region].predict_unit(&u);
        Prediction { mean: g.mean + l.mean, variance: g.variance + l.variance }
    }

    /// Noise-free local variance `tau^2 - l' L^{-1} l`, exactly 0 at the
    /// region's design points.
    pub fn spatial_variance(&self, region: usize, x0: &[f64]) -> f64 {
        self.locals[region].spatial_variance_unit(&self.bounds.to_unit(x0))
    }

    /// Residuals `Y - y_g(X)` in design-point order.
    pub fn residuals(&self, data: &Dataset) -> Vec<f64> {
        data.points().iter().map(|p| p.sample_mean() - self.predict_global(&p.x).mean).collect()
    }

    /// Lowest global prediction over the inducing points, after clamping.
    pub fn global_min_at_inducing(&self, lo: f64, hi: f64) -> f64 {
        self.global
            .inducing
            .iter()
            .map(|u| self.global.predict_unit(u).mean.clamp(lo, hi))
            .fold(f64::INFINITY, f64::min)
    }

    /// Leave-one-out check with frozen hyperparameters. Each point is
    /// predicted by the model refreshed without it.
    pub fn loo_cross_validate(&self, data: &Dataset, inducing: &InducingSet) -> Result<LooReport> {
        if data.len() < 3 {
            return Err(Error::invalid("cross-validation needs at least 3 design points"));
        }
        let noise = data.mean_noise_variances(self.noise_prior);
        let mut residuals = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let reduced = self.refresh(&data.without(i), inducing)?;
            let p = data.point(i);
            let pred = reduced.predict_overall_in(p.region, &p.x);
            let sd = (pred.variance + noise[i]).sqrt();
            let z = if sd > 0.0 { (p.sample_mean() - pred.mean) / sd } else { 0.0 };
            residuals.push(z);
        }
        let max_abs = residuals.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        Ok(LooReport { residuals, max_abs, passed: max_abs <= LOO_LIMIT })
    }
}

pub const LOO_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    /// Standardized leave-one-out residual per design point.
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub passed: bool,
}

fn check_inputs(data: &Dataset, partition: &Partition, inducing: &InducingSet) -> Result<()> {
    if inducing.is_empty() {
        return Err(Error::invalid("the global model needs at least one inducing point"));
    }
    if partition.bounds() != data.bounds() {
        return Err(Error::invalid("partition and dataset cover different domains"));
    }
    if let Some(p) = data.points().iter().find(|p| p.region >= partition.len()) {
        return Err(Error::invalid(format!("design point tagged with unknown region {}", p.region)));
    }
    Ok(())
}

fn fit_local(
    pts: &[Vec<f64>],
    res: &[f64],
    noise: &[f64],
    floor: &Lengthscales,
    fit: &FitOptions,
) -> Result<GpHyperparams> {
    let distinct = pts.iter().any(|p| p != &pts[0]);
    if !distinct {
        // nothing to estimate a correlation from: variance from the residual
        // size, lengthscales at the floor
        let ms = res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64;
        return GpHyperparams::new(0.0, ms.max(VARIANCE_FLOOR), floor.clone());
    }
    let bounds = HyperBounds::default_for(res, floor.dim(), Some(0.0));
    fit_hyperparams(pts, res, noise, Structure::Full, &bounds, Some(floor), fit)
}

/// Dense evaluation of the one-stage predictor, integrating out the latent
/// global values jointly with the local processes. Explicit inverses; meant
/// as a reference for tests, not for search.
///
/// `regions[i]` is the region of `points[i]`, and `region` that of `x0`.
/// All coordinates are used as given.
#[allow(clippy::too_many_arguments)]
pub fn predict_onestage(
    points: &[Vec<f64>],
    y: &[f64],
    noise: &[f64],
    regions: &[usize],
    inducing: &[Vec<f64>],
    global_hp: &GpHyperparams,
    local_hps: &[GpHyperparams],
    x0: &[f64],
    region: usize,
) -> Result<Prediction> {
    let n = points.len();
    if y.len() != n || noise.len() != n || regions.len() != n {
        return Err(Error::invalid("points, responses, noise and regions differ in length"));
    }
    if region >= local_hps.len() || regions.iter().any(|&r| r >= local_hps.len()) {
        return Err(Error::invalid("region id without local hyperparameters"));
    }
    let g_m = build_cov(inducing, global_hp, None)?.entries().clone();
    let g_m_inv = g_m.try_inverse().ok_or_else(|| Error::invalid("singular inducing covariance"))?;
    let g_mn = cross_cov(inducing, points, global_hp);
    let q_nn = g_mn.transpose() * &g_m_inv * &g_mn;
    let mut c = q_nn.clone();
    for i in 0..n {
        c[(i, i)] += (global_hp.variance - q_nn[(i, i)]).max(0.0) + noise[i];
        for j in 0..n {
            if regions[i] == regions[j] {
                c[(i, j)] += local_hps[regions[i]].cov(&points[i], &points[j]);
            }
        }
    }
    let c_inv = c.try_inverse().ok_or_else(|| Error::invalid("singular one-stage covariance"))?;
    let g = cov_vector(x0, inducing, global_hp);
    let mut h: DVector<f64> = g_mn.transpose() * (&g_m_inv * g);
    for i in 0..n {
        if regions[i] == region {
            h[i] += local_hps[region].cov(x0, &points[i]);
        }
    }
    let r = DVector::from_iterator(n, y.iter().map(|v| v - global_hp.mean));
    let ch: DVector<f64> = &c_inv * &h;
    let mean = global_hp.mean + ch.dot(&r);
    let variance = global_hp.variance + local_hps[region].variance - h.dot(&ch);
    Ok(Prediction { mean, variance })
}

/// Eq.-level dense evaluation of the two-stage global predictor with
/// explicit inverses of `G_m`, `Q_m` and `Lambda + Sigma`.
pub fn dense_global_reference(
    points: &[Vec<f64>],
    y: &[f64],
    noise: &[f64],
    inducing: &[Vec<f64>],
    hp: &GpHyperparams,
    x0: &[f64],
) -> Result<Prediction> {
    let n = points.len();
    let g_m = build_cov(inducing, hp, None)?.entries().clone();
    let g_m_inv = g_m.clone().try_inverse().ok_or_else(|| Error::invalid("singular inducing covariance"))?;
    let g_mn = cross_cov(inducing, points, hp);
    let mut d_inv = DMatrix::zeros(n, n);
    for i in 0..n {
        let col = g_mn.column(i);
        let lam = (hp.variance - col.dot(&(&g_m_inv * col))).max(0.0);
        d_inv[(i, i)] = 1.0 / (lam + noise[i]).max(1e-12 * hp.variance);
    }
    let q_m = &g_m + &g_mn * &d_inv * g_mn.transpose();
    let q_inv = q_m.try_inverse().ok_or_else(|| Error::invalid("singular Q_m"))?;
    let g = cov_vector(x0, inducing, hp);
    let r = DVector::from_iterator(n, y.iter().map(|v| v - hp.mean));
    let mean = hp.mean + (g.transpose() * &q_inv * &g_mn * &d_inv * r)[(0, 0)];
    let variance = hp.variance - g.dot(&(&g_m_inv * &g)) + g.dot(&(&q_inv * &g));
    Ok(Prediction { mean, variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Moments;
    use crate::design::{latin_hypercube, rng_from};
    use crate::gp::full_gp_predict;
    use crate::inducing::{select_inducing, InducingOptions};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ls(v: &[f64]) -> Lengthscales {
        Lengthscales::new(v.to_vec()).unwrap()
    }

    fn hp(mean: f64, var: f64, l: &[f64]) -> GpHyperparams {
        GpHyperparams::new(mean, var, ls(l)).unwrap()
    }

    /// Dataset on the unit box with given sample means and per-mean noise
    /// variance (encoded as 2 replications).
    fn dataset(xs: &[Vec<f64>], y: &[f64], mean_noise: &[f64], partition: &Partition) -> Dataset {
        let mut d = Dataset::new(partition.bounds().clone());
        for ((x, &m), &v) in xs.iter().zip(y).zip(mean_noise) {
            let r = partition.nearest(x);
            d.push(x.clone(), Moments::from_summary(2, m, 2.0 * v), r).unwrap();
        }
        d
    }

    fn random_instance(seed: u64, d: usize, n: usize, k: usize) -> (Dataset, Partition) {
        let b = Bounds::unit(d);
        let mut rng = rng_from(seed, &[]);
        let xs = latin_hypercube(n, &b, &mut rng);
        let y: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| (5.0 * v).sin()).sum::<f64>()).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..0.05)).collect();
        let p = Partition::build(&xs, k, seed, &b).unwrap();
        let data = dataset(&xs, &y, &noise, &p);
        (data, p)
    }

    #[test]
    fn global_matches_dense_reference() {
        for seed in 0..10 {
            let (data, p) = random_instance(seed, 2, 9, 2);
            let ind = select_inducing(&data, &p, &InducingOptions { seed, ..Default::default() }).unwrap();
            let g = hp(0.3, 1.4, &[2.0, 5.0]);
            let locals = vec![hp(0.0, 0.2, &[4.0, 6.0]); 2];
            let m = AglgpModel::from_hyperparams(&data, &p, &ind, g.clone(), locals, None).unwrap();
            let noise = data.mean_noise_variances(None);
            for x0 in [vec![0.2, 0.7], vec![0.95, 0.05], data.point(3).x.clone()] {
                let got = m.predict_global(&x0);
                let want = dense_global_reference(&data.xs(), &data.means(), &noise, ind.points(), &g, &x0).unwrap();
                assert!((got.mean - want.mean).abs() <= 1e-8 * want.mean.abs().max(1.0));
                assert!((got.variance - want.variance.max(0.0)).abs() <= 1e-8 * g.variance);
            }
        }
    }

    #[test]
    fn fitc_collapses_to_full_gp_when_inducing_is_design() {
        let b = Bounds::unit(1);
        let xs = vec![vec![0.05], vec![0.3], vec![0.5], vec![0.72], vec![0.9]];
        let y = [0.4, -1.0, 0.2, 1.3, 0.0];
        let noise = [1e-6; 5];
        let p = Partition::from_centers(vec![vec![0.5]], &b, None).unwrap();
        let data = dataset(&xs, &y, &noise, &p);
        let ind = InducingSet::from_regions(vec![xs.clone()], &b);
        let g = hp(0.1, 1.0, &[6.0]);
        let m = AglgpModel::from_hyperparams(&data, &p, &ind, g.clone(), vec![hp(0.0, 0.1, &[6.0])], None).unwrap();
        assert!(m.global().lambda_clamp() < 1e-6 * g.variance);
        for x0 in [0.0, 0.17, 0.5, 0.8, 1.0] {
            let got = m.predict_global(&[x0]);
            let want = full_gp_predict(&xs, &y, &noise, &g, &[x0]).unwrap();
            assert!((got.mean - want.mean).abs() < 1e-6, "{x0}: {} vs {}", got.mean, want.mean);
            assert!((got.variance - want.variance).abs() < 1e-6);
        }
        // the global stage already reconstructs Y, so residuals vanish
        assert!(m.residuals(&data).iter().all(|r| r.abs() < 1e-4));
    }

    #[test]
    fn far_queries_revert_to_the_priors() {
        let b = Bounds::unit(1);
        let xs: Vec<Vec<f64>> = [0.0, 0.1, 0.2, 0.3, 0.4].iter().map(|v| vec![*v]).collect();
        let p = Partition::from_centers(vec![vec![0.1], vec![0.9]], &b, None).unwrap();
        let data = dataset(&xs, &[0.5, -0.2, 0.1, 0.4, 0.0], &[0.01; 5], &p);
        let ind = InducingSet::from_regions(vec![vec![vec![0.05], vec![0.3]], vec![]], &b);
        let g = hp(0.7, 2.0, &[900.0]);
        let locals = vec![hp(0.0, 0.3, &[900.0]), hp(0.0, 0.5, &[900.0])];
        let m = AglgpModel::from_hyperparams(&data, &p, &ind, g, locals, None).unwrap();
        let x = [1.0];
        let gl = m.predict_global(&x);
        assert!((gl.mean - 0.7).abs() < 1e-9 && (gl.variance - 2.0).abs() < 1e-9);
        // region 1 holds no design points
        let lo = m.predict_local(&x);
        assert_eq!((lo.mean, lo.variance), (0.0, 0.5));
        let lo0 = m.predict_local_in(0, &[0.8]);
        assert!(lo0.mean.abs() < 1e-9 && (lo0.variance - 0.3).abs() < 1e-9);
        let all = m.predict_overall(&x);
        assert_eq!(all.mean, gl.mean + lo.mean);
        assert!((all.variance - 2.5).abs() < 1e-9);
    }

    #[test]
    fn local_matches_dense_residual_formula() {
        let (data, p) = random_instance(11, 2, 10, 2);
        let ind = select_inducing(&data, &p, &InducingOptions::default()).unwrap();
        let g = hp(0.0, 1.0, &[1.5, 1.5]);
        let locals = vec![hp(0.0, 0.4, &[3.0, 2.0]), hp(0.0, 0.6, &[5.0, 8.0])];
        let m = AglgpModel::from_hyperparams(&data, &p, &ind, g.clone(), locals.clone(), None).unwrap();
        let noise = data.mean_noise_variances(None);
        let xs = data.xs();
        let y = data.means();
        let n = xs.len();
        // residual vector (D - G_nm Q^-1 G_mn) D^-1 (Y - mu) with explicit inverses
        let g_m = build_cov(ind.points(), &g, None).unwrap().entries().clone();
        let g_m_inv = g_m.clone().try_inverse().unwrap();
        let g_mn = cross_cov(ind.points(), &xs, &g);
        let mut dm = DMatrix::zeros(n, n);
        for i in 0..n {
            let c = g_mn.column(i);
            dm[(i, i)] = (g.variance - c.dot(&(&g_m_inv * c))).max(0.0) + noise[i];
        }
        let d_inv = dm.clone().try_inverse().unwrap();
        let q_inv = (&g_m + &g_mn * &d_inv * g_mn.transpose()).try_inverse().unwrap();
        let r = DVector::from_iterator(n, y.iter().map(|v| v - g.mean));
        let resid = (&dm - g_mn.transpose() * &q_inv * &g_mn) * &d_inv * r;
        for x0 in [vec![0.1, 0.2], vec![0.8, 0.6], vec![0.45, 0.9]] {
            let k = p.nearest(&x0);
            let mut big = DMatrix::zeros(n, n);
            let mut l = DVector::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    if data.point(i).region == data.point(j).region {
                        big[(i, j)] = locals[data.point(i).region].cov(&xs[i], &xs[j]);
                    }
                }
                big[(i, i)] += noise[i];
                if data.point(i).region == k {
                    l[i] = locals[k].cov(&x0, &xs[i]);
                }
            }
            let inv = big.try_inverse().unwrap();
            let mean = (l.transpose() * &inv * &resid)[(0, 0)];
            let var = locals[k].variance - l.dot(&(&inv * &l));
            let got = m.predict_local(&x0);
            assert!((got.mean - mean).abs() <= 1e-8 * mean.abs().max(1.0), "{} vs {mean}", got.mean);
            assert!((got.variance - var.max(0.0)).abs() <= 1e-8);
        }
    }

    #[test]
    fn woodbury_reduction_of_the_one_stage_predictor() {
        let (data, p) = random_instance(5, 2, 8, 2);
        let ind = select_inducing(&data, &p, &InducingOptions::default()).unwrap();
        let g = hp(-0.2, 1.3, &[2.0, 3.0]);
        // negligible local processes stand in for L = 0, l = 0
        let none = vec![GpHyperparams { mean: 0.0, variance: 0.0, lengthscales: ls(&[1.0, 1.0]) }; 2];
        let noise = data.mean_noise_variances(None);
        let regions: Vec<usize> = data.points().iter().map(|q| q.region).collect();
        let x0 = [0.33, 0.61];
        let one = predict_onestage(&data.xs(), &data.means(), &noise, &regions, ind.points(), &g, &none, &x0, 0).unwrap();
        let two = dense_global_reference(&data.xs(), &data.means(), &noise, ind.points(), &g, &x0).unwrap();
        assert!((one.mean - two.mean).abs() < 1e-8);
        assert!((one.variance - two.variance).abs() < 1e-8);
    }

    #[test]
    fn one_stage_with_design_inducing_is_a_composite_full_gp() {
        let xs = vec![vec![0.1], vec![0.4], vec![0.6], vec![0.85]];
        let y = [1.0, 0.2, -0.4, 0.9];
        let noise = [0.01, 0.02, 0.01, 0.03];
        let g = hp(0.2, 1.0, &[3.0]);
        let l = hp(0.0, 0.3, &[20.0]);
        let x0 = [0.5];
        let one = predict_onestage(&xs, &y, &noise, &[0; 4], &xs, &g, std::slice::from_ref(&l), &x0, 0).unwrap();
        // composite kernel by hand
        let n = 4;
        let k = |a: &[f64], c: &[f64]| g.cov(a, c) + l.cov(a, c);
        let mut c = DMatrix::from_fn(n, n, |i, j| k(&xs[i], &xs[j]));
        for i in 0..n {
            c[(i, i)] += noise[i];
        }
        let inv = c.try_inverse().unwrap();
        let kv = DVector::from_fn(n, |i, _| k(&x0, &xs[i]));
        let r = DVector::from_iterator(n, y.iter().map(|v| v - g.mean));
        let mean = g.mean + (kv.transpose() * &inv * r)[(0, 0)];
        let var = g.variance + l.variance - kv.dot(&(&inv * &kv));
        assert!((one.mean - mean).abs() < 1e-6);
        assert!((one.variance - var).abs() < 1e-6);
        let far = predict_onestage(&xs, &y, &noise, &[0; 4], &xs, &hp(0.2, 1.0, &[1e6]), &[hp(0.0, 0.3, &[1e6])], &[0.25], 0)
            .unwrap();
        assert!((far.variance - 1.3).abs() < 1e-9);
    }

    #[test]
    fn overall_reconstructs_observations_without_noise() {
        let b = Bounds::unit(1);
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let y: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin() + 0.3 * (40.0 * x[0]).cos()).collect();
        let p = Partition::from_centers(vec![vec![0.25], vec![0.75]], &b, None).unwrap();
        let data = dataset(&xs, &y, &[1e-10; 8], &p);
        let ind = select_inducing(&data, &p, &InducingOptions::default()).unwrap();
        let m = AglgpModel::from_hyperparams(
            &data,
            &p,
            &ind,
            hp(0.0, 1.0, &[5.0]),
            vec![hp(0.0, 0.5, &[30.0]); 2],
            None,
        )
        .unwrap();
        for (x, v) in xs.iter().zip(&y) {
            assert!((m.predict_overall(x).mean - v).abs() < 1e-4);
            assert_eq!(m.spatial_variance(p.nearest(x), x), 0.0);
        }
    }

    #[test]
    fn smooth_trend_leaves_small_residuals() {
        let b = Bounds::unit(1);
        let mut rng = rng_from(2, &[]);
        let xs = latin_hypercube(16, &b, &mut rng);
        let f = |x: f64| 3.0 * (2.0 * x).sin() + x;
        let y: Vec<f64> = xs.iter().map(|x| f(x[0])).collect();
        let p = Partition::build(&xs, 2, 0, &b).unwrap();
        let data = dataset(&xs, &y, &[1e-8; 16], &p);
        let ind = select_inducing(&data, &p, &InducingOptions::default()).unwrap();
        let m = AglgpModel::fit(&data, &p, &ind, &AglgpOptions::default()).unwrap();
        let range = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - y.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = m.residuals(&data).iter().fold(0.0f64, |a, r| a.max(r.abs()));
        assert!(worst < 0.1 * range, "worst residual {worst} vs range {range}");
        for l in m.locals() {
            for (a, t) in l.hyperparams().lengthscales.values().iter().zip(m.global().hyperparams().lengthscales.values()) {
                assert!(a >= t);
            }
        }
    }

    #[test]
    fn refit_is_deterministic() {
        let (data, p) = random_instance(8, 2, 14, 3);
        let ind = select_inducing(&data, &p, &InducingOptions::default()).unwrap();
        let opts = AglgpOptions::default();
        let a = AglgpModel::fit(&data, &p, &ind, &opts).unwrap();
        let b = AglgpModel::fit(&data, &p, &ind, &opts).unwrap();
        assert_eq!(a.global().hyperparams(), b.global().hyperparams());
        for (x, y) in a.locals().iter().zip(b.locals()) {
            assert_eq!(x.hyperparams(), y.hyperparams());
        }
    }

    #[test]
    fn permutation_invariance() {
        let (data, p) = random_instance(21, 2, 9, 2);
        let ind = select_inducing(&data, &p, &InducingOptions::default()).unwrap();
        let g = hp(0.1, 1.2, &[2.0, 4.0]);
        let locals = vec![hp(0.0, 0.3, &[5.0, 5.0]); 2];
        let m = AglgpModel::from_hyperparams(&data, &p, &ind, g.clone(), locals.clone(), None).unwrap();
        let mut rev = Dataset::new(data.bounds().clone());
        for q in data.points().iter().rev() {
            rev.push(q.x.clone(), q.moments, q.region).unwrap();
        }
        let m2 = AglgpModel::from_hyperparams(&rev, &p, &ind, g, locals, None).unwrap();
        for x0 in [vec![0.3, 0.3], vec![0.9, 0.1]] {
            let a = m.predict_overall(&x0);
            let b = m2.predict_overall(&x0);
            assert!((a.mean - b.mean).abs() < 1e-10 && (a.variance - b.variance).abs() < 1e-10);
        }
    }

    #[test]
    fn single_point_region_uses_the_floor() {
        let b = Bounds::unit(1);
        let xs = vec![vec![0.02], vec![0.4], vec![0.45], vec![0.5], vec![0.55]];
        let y = [2.0, 0.1, 0.3, 0.2, 0.0];
        let p = Partition::from_centers(vec![vec![0.0], vec![0.5]], &b, None).unwrap();
        let data = dataset(&xs, &y, &[0.01; 5], &p);
        assert_eq!(data.region_members(0).len(), 1);
        let ind = select_inducing(&data, &p, &InducingOptions::default()).unwrap();
        let m = AglgpModel::fit(&data, &p, &ind, &AglgpOptions::default()).unwrap();
        assert_eq!(m.local(0).hyperparams().lengthscales, m.global().hyperparams().lengthscales);
    }

    #[test]
    fn fit_errors_name_the_stage() {
        let b = Bounds::unit(1);
        let xs = vec![vec![0.3], vec![0.3], vec![0.3]];
        let p = Partition::from_centers(vec![vec![0.5]], &b, None).unwrap();
        let data = dataset(&xs, &[1.0, 2.0, 3.0], &[0.1; 3], &p);
        let ind = InducingSet::from_regions(vec![vec![vec![0.3]]], &b);
        let err = AglgpModel::fit(&data, &p, &ind, &AglgpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "global", region: None, .. }), "{err}");
    }

    #[test]
    fn empty_region_rejected() {
        let b = Bounds::unit(1);
        let xs = vec![vec![0.1], vec![0.2], vec![0.3]];
        let p = Partition::from_centers(vec![vec![0.2], vec![0.9]], &b, None).unwrap();
        let data = dataset(&xs, &[1.0, 2.0, 3.0], &[0.1; 3], &p);
        let ind = InducingSet::from_regions(vec![xs.clone(), vec![]], &b);
        assert!(AglgpModel::fit(&data, &p, &ind, &AglgpOptions::default()).is_err());
    }

    #[test]
    fn loo_passes_under_the_null_and_flags_corruption() {
        let b = Bounds::unit(1);
        let g = hp(0.0, 1.0, &[8.0]);
        let local = hp(0.0, 0.05, &[40.0]);
        let noise = 0.01;
        let p = Partition::from_centers(vec![vec![0.5]], &b, None).unwrap();
        let mut passes = 0;
        let trials = 20;
        for seed in 0..trials {
            let mut rng = rng_from(seed, &[0x6c6f6f]);
            let xs = latin_hypercube(20, &b, &mut rng);
            // joint draw of global + local + noise
            let n = xs.len();
            let mut c = DMatrix::from_fn(n, n, |i, j| g.cov(&xs[i], &xs[j]) + local.cov(&xs[i], &xs[j]));
            for i in 0..n {
                c[(i, i)] += noise + 1e-10;
            }
            let chol = c.cholesky().unwrap();
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y: Vec<f64> = (chol.l() * z).iter().copied().collect();
            let data = dataset(&xs, &y, &vec![noise; n], &p);
            let ind = InducingSet::from_regions(vec![xs.clone()], &b);
            let m = AglgpModel::from_hyperparams(&data, &p, &ind, g.clone(), vec![local.clone()], None).unwrap();
            let report = m.loo_cross_validate(&data, &ind).unwrap();
            if report.passed {
                passes += 1;
            }
            if seed == 0 {
                // corrupt one observation by 10 joint standard deviations
                let mut bad = dataset(&xs, &y, &vec![noise; n], &p);
                let sd = (g.variance + local.variance + noise).sqrt();
                let q = bad.point(7).clone();
                let shifted = Moments::from_summary(2, q.sample_mean() + 10.0 * sd, q.sample_var().unwrap());
                bad = {
                    let mut d = Dataset::new(b.clone());
                    for (i, pt) in bad.points().iter().enumerate() {
                        let mo = if i == 7 { shifted } else { pt.moments };
                        d.push(pt.x.clone(), mo, pt.region).unwrap();
                    }
                    d
                };
                let m = m.refresh(&bad, &ind).unwrap();
                assert!(!m.loo_cross_validate(&bad, &ind).unwrap().passed);
            }
        }
        assert!(passes as f64 >= 0.95 * trials as f64, "{passes}/{trials}");
    }

    #[test]
    fn loo_smoke_on_three_points() {
        let b = Bounds::unit(1);
        let xs = vec![vec![0.1], vec![0.5], vec![0.9]];
        let p = Partition::from_centers(vec![vec![0.5]], &b, None).unwrap();
        let data = dataset(&xs, &[0.0, 1.0, 0.5], &[0.1; 3], &p);
        let ind = InducingSet::from_regions(vec![vec![vec![0.5]]], &b);
        let m = AglgpModel::from_hyperparams(&data, &p, &ind, hp(0.5, 1.0, &[2.0]), vec![hp(0.0, 0.1, &[2.0])], None)
            .unwrap();
        let r = m.loo_cross_validate(&data, &ind).unwrap();
        assert_eq!(r.residuals.len(), 3);
    }
}
