//! Full and FITC Gaussian-process likelihoods, the full-GP predictor, and
//! multi-start hyperparameter estimation.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Bounds;
use crate::design::rng_from;
use crate::kernel::{build_cov, cov_vector, cross_cov, CovMatrix, GpHyperparams, Lengthscales, VARIANCE_FLOOR};
use crate::optim::{multi_start, NelderMeadOptions};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Predictive mean and variance at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn sd(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Covariance structure used by the marginal likelihood.
#[derive(Debug, Clone, Copy)]
pub enum Structure<'a> {
    Full,
    /// `G_nm G_m^{-1} G_mn + Lambda + Sigma`, with `Lambda` the diagonal
    /// correction `diag(G_n - G_nm G_m^{-1} G_mn)`.
    Fitc { inducing: &'a [Vec<f64>] },
}

/// Factorized FITC covariance, kept in the `V = L_m^{-1} G_mn` form so that
/// `Q_m = L_m (I + V D^{-1} V') L_m'` with `D = Lambda + Sigma`.
#[derive(Debug, Clone)]
pub(crate) struct FitcFactor {
    pub g_m: CovMatrix,
    pub v: DMatrix<f64>,
    /// Largest magnitude by which a negative `Lambda` entry was raised to 0.
    pub lambda_clamp: f64,
    pub d: DVector<f64>,
    pub a: CovMatrix,
}

impl FitcFactor {
    pub fn new(points: &[Vec<f64>], inducing: &[Vec<f64>], hp: &GpHyperparams, noise: &[f64]) -> Result<Self> {
        if inducing.is_empty() {
            return Err(Error::invalid("FITC needs at least one inducing point"));
        }
        let g_m = build_cov(inducing, hp, None)?;
        let g_mn = cross_cov(inducing, points, hp);
        let v = g_m.solve_lower_mat(&g_mn);
        let n = points.len();
        let mut lambda_clamp: f64 = 0.0;
        let d_floor = 1e-12 * hp.variance;
        let mut d = DVector::zeros(n);
        for i in 0..n {
            let raw = hp.variance - v.column(i).norm_squared();
            if raw < 0.0 {
                lambda_clamp = lambda_clamp.max(-raw);
            }
            d[i] = (raw.max(0.0) + noise[i]).max(d_floor);
        }
        let m = inducing.len();
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col /= d[j].sqrt();
        }
        let mut a = &scaled * scaled.transpose();
        for i in 0..m {
            a[(i, i)] += 1.0;
        }
        let scale = (0..m).map(|i| a[(i, i)]).fold(1.0, f64::max);
        let a = CovMatrix::factorize(a, scale)?;
        Ok(Self { g_m, v, lambda_clamp, d, a })
    }

    /// `C^{-1} r` by the Woodbury identity.
    pub fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let dr = r.component_div(&self.d);
        let t = self.a.solve(&(&self.v * &dr));
        let back = self.v.tr_mul(&t);
        dr - back.component_div(&self.d)
    }

    pub fn log_det(&self) -> f64 {
        self.a.log_det() + self.d.iter().map(|v| v.ln()).sum::<f64>()
    }
}

enum Solver {
    Full(CovMatrix),
    Fitc(FitcFactor),
}

impl Solver {
    fn new(points: &[Vec<f64>], noise: &[f64], hp: &GpHyperparams, structure: Structure<'_>) -> Result<Self> {
        Ok(match structure {
            Structure::Full => Solver::Full(build_cov(points, hp, Some(noise))?),
            Structure::Fitc { inducing } => Solver::Fitc(FitcFactor::new(points, inducing, hp, noise)?),
        })
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            Solver::Full(c) => c.solve(r),
            Solver::Fitc(f) => f.solve(r),
        }
    }

    fn log_det(&self) -> f64 {
        match self {
            Solver::Full(c) => c.log_det(),
            Solver::Fitc(f) => f.log_det(),
        }
    }
}

fn check_data(points: &[Vec<f64>], y: &[f64], noise: &[f64], dim: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::invalid("no design points"));
    }
    if y.len() != points.len() || noise.len() != points.len() {
        return Err(Error::invalid(format!(
            "{} points, {} responses, {} noise variances",
            points.len(),
            y.len(),
            noise.len()
        )));
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("point dimension does not match the lengthscales"));
    }
    Ok(())
}

/// Negative log marginal likelihood
/// `0.5 [(Y - mu)' C^{-1} (Y - mu) + log det C + n log 2 pi]`.
pub fn neg_log_likelihood(
    points: &[Vec<f64>],
    y: &[f64],
    noise: &[f64],
    hp: &GpHyperparams,
    structure: Structure<'_>,
) -> Result<f64> {
    check_data(points, y, noise, hp.dim())?;
    let solver = Solver::new(points, noise, hp, structure)?;
    let r = DVector::from_iterator(y.len(), y.iter().map(|v| v - hp.mean));
    Ok(nll_from(&solver, &r))
}

fn nll_from(solver: &Solver, r: &DVector<f64>) -> f64 {
    0.5 * (r.dot(&solver.solve(r)) + solver.log_det() + r.len() as f64 * LN_2PI)
}

/// Full GP conditioned on `(points, y)` with diagonal noise.
#[derive(Debug, Clone)]
pub struct FullGp {
    points: Vec<Vec<f64>>,
    hp: GpHyperparams,
    cov: CovMatrix,
    alpha: DVector<f64>,
}

impl FullGp {
    pub fn new(points: Vec<Vec<f64>>, y: &[f64], noise: &[f64], hp: GpHyperparams) -> Result<Self> {
        check_data(&points, y, noise, hp.dim())?;
        let cov = build_cov(&points, &hp, Some(noise))?;
        let r = DVector::from_iterator(y.len(), y.iter().map(|v| v - hp.mean));
        let alpha = cov.solve(&r);
        Ok(Self { points, hp, cov, alpha })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    pub fn jitter_used(&self) -> f64 {
        self.cov.jitter_used()
    }

    /// `mu + r'C^{-1}(Y - mu)` and `sigma^2 - r'C^{-1}r` (clamped at 0).
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let k = cov_vector(x, &self.points, &self.hp);
        let mean = self.hp.mean + k.dot(&self.alpha);
        let w = self.cov.solve_lower(&k);
        Prediction { mean, variance: (self.hp.variance - w.norm_squared()).max(0.0) }
    }
}

pub fn full_gp_predict(
    points: &[Vec<f64>],
    y: &[f64],
    noise: &[f64],
    hp: &GpHyperparams,
    x0: &[f64],
) -> Result<Prediction> {
    if x0.len() != hp.dim() {
        return Err(Error::invalid("query point dimension does not match the lengthscales"));
    }
    Ok(FullGp::new(points.to_vec(), y, noise, hp.clone())?.predict(x0))
}

/// How the process mean is handled while fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanSpec {
    /// Generalized-least-squares estimate, clamped into `[lo, hi]`.
    Profiled { lo: f64, hi: f64 },
    Fixed(f64),
}

/// Search box for hyperparameter estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperBounds {
    pub mean: MeanSpec,
    pub variance: (f64, f64),
    pub lengthscales: (Vec<f64>, Vec<f64>),
}

/// Default lengthscale search range for inputs scaled to the unit box.
pub const LENGTHSCALE_RANGE: (f64, f64) = (1e-3, 1e3);

impl HyperBounds {
    /// Data-driven defaults: variance in `[1e-8, 10 * spread]`, lengthscales
    /// in [`LENGTHSCALE_RANGE`], and a profiled mean within one data range of
    /// the observations (or the given fixed mean).
    pub fn default_for(y: &[f64], dim: usize, fixed_mean: Option<f64>) -> Self {
        let n = y.len().max(1) as f64;
        let (mean, spread) = match fixed_mean {
            Some(m) => (MeanSpec::Fixed(m), y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n),
            None => {
                let avg = y.iter().sum::<f64>() / n;
                let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = (hi - lo).max(1e-8);
                (
                    MeanSpec::Profiled { lo: lo - range, hi: hi + range },
                    y.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / n,
                )
            }
        };
        Self {
            mean,
            variance: (VARIANCE_FLOOR, (10.0 * spread).max(1e-6)),
            lengthscales: (vec![LENGTHSCALE_RANGE.0; dim], vec![LENGTHSCALE_RANGE.1; dim]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Number of Latin-hypercube starts.
    pub starts: usize,
    pub nelder_mead: NelderMeadOptions,
    pub seed: u64,
    /// Optional extra start (e.g. the previous fit).
    pub warm_start: Option<GpHyperparams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { starts: 10, nelder_mead: NelderMeadOptions::default(), seed: 0, warm_start: None }
    }
}

/// Log-space search box `[ln var, ln ls_1, ..]` with the lengthscale floor applied.
fn search_box(bounds: &HyperBounds, floor: Option<&Lengthscales>, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (vlo, vhi) = bounds.variance;
    if !(vlo >= VARIANCE_FLOOR && vhi >= vlo && vhi.is_finite()) {
        return Err(Error::invalid(format!("bad variance bounds [{vlo}, {vhi}]")));
    }
    let (llo, lhi) = &bounds.lengthscales;
    if llo.len() != dim || lhi.len() != dim {
        return Err(Error::invalid("lengthscale bounds do not match the input dimension"));
    }
    let mut lower = vec![vlo.ln()];
    let mut upper = vec![vhi.ln()];
    for k in 0..dim {
        let mut lo = llo[k];
        if let Some(f) = floor {
            lo = lo.max(f.values()[k]);
        }
        let hi = lhi[k].max(lo);
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::invalid(format!("bad lengthscale bounds [{lo}, {hi}] on axis {k}")));
        }
        lower.push(lo.ln());
        upper.push(hi.ln());
    }
    // Bounds needs lo < hi; a pinned parameter gets a negligible interval.
    for (lo, hi) in lower.iter().zip(upper.iter_mut()) {
        if *hi <= *lo {
            *hi = *lo + 1e-12;
        }
    }
    Ok((lower, upper))
}

fn unpack(p: &[f64], lower: &[f64]) -> (f64, Lengthscales) {
    // exp(ln(lo)) can round below lo; re-clamp to keep the floor exact
    let variance = p[0].exp().max(lower[0].exp()).max(VARIANCE_FLOOR);
    let ls = p[1..].iter().zip(&lower[1..]).map(|(v, lo)| v.exp().max(lo.exp())).collect();
    (variance, Lengthscales(ls))
}

/// Likelihood with the mean either fixed or profiled in closed form.
fn profiled_nll(
    points: &[Vec<f64>],
    y: &DVector<f64>,
    noise: &[f64],
    variance: f64,
    ls: &Lengthscales,
    mean: MeanSpec,
    structure: Structure<'_>,
) -> Result<(f64, f64)> {
    let hp = GpHyperparams { mean: 0.0, variance, lengthscales: ls.clone() };
    let solver = Solver::new(points, noise, &hp, structure)?;
    let mu = match mean {
        MeanSpec::Fixed(m) => m,
        MeanSpec::Profiled { lo, hi } => {
            let ones = DVector::from_element(y.len(), 1.0);
            let c1 = solver.solve(&ones);
            let gls = c1.dot(y) / c1.sum();
            if gls.is_finite() {
                gls.clamp(lo, hi)
            } else {
                0.5 * (lo + hi)
            }
        }
    };
    let r = y.map(|v| v - mu);
    Ok((nll_from(&solver, &r), mu))
}

/// Maximum-likelihood hyperparameters by multi-start Nelder–Mead over
/// log-variance and log-lengthscales. `floor` raises the lengthscale lower
/// bounds elementwise (used to keep local rates at or above the global ones).
pub fn fit_hyperparams(
    points: &[Vec<f64>],
    y: &[f64],
    noise: &[f64],
    structure: Structure<'_>,
    bounds: &HyperBounds,
    floor: Option<&Lengthscales>,
    opts: &FitOptions,
) -> Result<GpHyperparams> {
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::invalid("no design points"));
    }
    check_data(points, y, noise, dim)?;
    let distinct = points.iter().any(|p| p != &points[0]);
    if !distinct {
        return Err(Error::invalid("fitting needs at least two distinct design points"));
    }
    if floor.is_some_and(|f| f.dim() != dim) {
        return Err(Error::invalid("lengthscale floor does not match the input dimension"));
    }
    let (lower, upper) = search_box(bounds, floor, dim)?;
    let box_ = Bounds::new(lower.clone(), upper)?;
    let yv = DVector::from_column_slice(y);

    let mut failures = 0usize;
    let mut objective = |p: &[f64]| {
        let (variance, ls) = unpack(p, &lower);
        match profiled_nll(points, &yv, noise, variance, &ls, bounds.mean, structure) {
            Ok((v, _)) => v,
            Err(_) => {
                failures += 1;
                f64::INFINITY
            }
        }
    };

    let mut extra = Vec::new();
    if let Some(w) = &opts.warm_start {
        if w.dim() == dim {
            let mut p: Vec<f64> = std::iter::once(w.variance.ln())
                .chain(w.lengthscales.values().iter().map(|v| v.max(1e-300).ln()))
                .collect();
            box_.clamp(&mut p);
            extra.push(p);
        }
    }
    let mut rng = rng_from(opts.seed, &[0x66_6974]);
    let best = multi_start(&mut objective, &box_, &extra, opts.starts, &opts.nelder_mead, &mut rng)
        .filter(|m| m.value.is_finite())
        .ok_or_else(|| {
            Error::FittingFailed(format!(
                "every start failed to factorize ({failures} failed evaluations, n = {})",
                points.len()
            ))
        })?;
    let (variance, lengthscales) = unpack(&best.x, &lower);
    let (_, mean) = profiled_nll(points, &yv, noise, variance, &lengthscales, bounds.mean, structure)?;
    Ok(GpHyperparams { mean, variance, lengthscales })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{latin_hypercube, rng_from};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn hp(mean: f64, variance: f64, ls: Vec<f64>) -> GpHyperparams {
        GpHyperparams::new(mean, variance, Lengthscales::new(ls).unwrap()).unwrap()
    }

    fn dense_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
        m.clone().try_inverse().expect("invertible")
    }

    #[test]
    fn interpolates_noise_free_data() {
        let pts = vec![vec![0.1], vec![0.45], vec![0.8]];
        let y = [1.0, -2.0, 0.5];
        let h = hp(0.0, 1.0, vec![4.0]);
        let p = full_gp_predict(&pts, &y, &[0.0; 3], &h, &[0.45]).unwrap();
        assert!((p.mean + 2.0).abs() < 1e-8);
        assert!(p.variance < 1e-8);
    }

    #[test]
    fn scalar_case_closed_form() {
        let h = hp(0.0, 1.0, vec![1.0]);
        let c = (-0.25f64).exp();
        let p = full_gp_predict(&[vec![0.0]], &[3.0], &[0.0], &h, &[0.5]).unwrap();
        assert!((p.mean - 3.0 * c).abs() < 1e-12);
        assert!((p.variance - (1.0 - c * c)).abs() < 1e-12);
    }

    #[test]
    fn matches_explicit_inverse_oracle() {
        let mut rng = rng_from(11, &[]);
        let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random::<f64>()]).collect();
        let y: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let noise: Vec<f64> = (0..5).map(|_| 0.01 + 0.1 * rng.random::<f64>()).collect();
        let h = hp(0.3, 1.4, vec![6.0]);
        let x0 = [0.37];
        let c = DMatrix::from_fn(5, 5, |i, j| {
            let d = pts[i][0] - pts[j][0];
            1.4 * (-6.0 * d * d).exp() + if i == j { noise[i] } else { 0.0 }
        });
        let inv = dense_inverse(&c);
        let r = DVector::from_fn(5, |i, _| 1.4 * (-6.0 * (x0[0] - pts[i][0]).powi(2)).exp());
        let res = DVector::from_fn(5, |i, _| y[i] - 0.3);
        let mean = 0.3 + (r.transpose() * &inv * &res)[0];
        let var = 1.4 - (r.transpose() * &inv * &r)[0];
        let p = full_gp_predict(&pts, &y, &noise, &h, &x0).unwrap();
        assert!((p.mean - mean).abs() < 1e-8 * (1.0 + mean.abs()));
        assert!((p.variance - var).abs() < 1e-8);
    }

    #[test]
    fn nll_of_single_centred_point() {
        let v = neg_log_likelihood(&[vec![0.0]], &[0.0], &[0.0], &hp(0.0, 1.0, vec![1.0]), Structure::Full).unwrap();
        assert!((v - 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn nll_matches_dense_determinant_oracle() {
        let mut rng = rng_from(2, &[]);
        let b = Bounds::unit(2);
        let pts = latin_hypercube(6, &b, &mut rng);
        let y: Vec<f64> = (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let noise: Vec<f64> = (0..6).map(|_| 0.05 * rng.random::<f64>()).collect();
        let h = hp(0.2, 0.8, vec![3.0, 1.5]);
        let c = DMatrix::from_fn(6, 6, |i, j| {
            h.cov(&pts[i], &pts[j]) + if i == j { noise[i] } else { 0.0 }
        });
        let r = DVector::from_fn(6, |i, _| y[i] - 0.2);
        let oracle = 0.5 * ((r.transpose() * dense_inverse(&c) * &r)[0] + c.determinant().ln() + 6.0 * LN_2PI);
        let v = neg_log_likelihood(&pts, &y, &noise, &h, Structure::Full).unwrap();
        assert!((v - oracle).abs() < 1e-6);
    }

    #[test]
    fn fitc_with_design_inducing_equals_full() {
        let mut rng = rng_from(4, &[]);
        let pts = latin_hypercube(7, &Bounds::unit(2), &mut rng);
        let y: Vec<f64> = (0..7).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let noise: Vec<f64> = (0..7).map(|_| 0.02 + 0.05 * rng.random::<f64>()).collect();
        let h = hp(-0.1, 1.3, vec![2.0, 4.0]);
        let full = neg_log_likelihood(&pts, &y, &noise, &h, Structure::Full).unwrap();
        let fitc = neg_log_likelihood(&pts, &y, &noise, &h, Structure::Fitc { inducing: &pts }).unwrap();
        assert!((full - fitc).abs() < 1e-8, "{full} vs {fitc}");
    }

    fn sample_gp(n: usize, theta: f64, variance: f64, noise: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = rng_from(seed, &[]);
        let pts = latin_hypercube(n, &Bounds::unit(1), &mut rng);
        let h = hp(0.0, variance, vec![theta]);
        let c = build_cov(&pts, &h, Some(&vec![noise; n])).unwrap();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let l = nalgebra::Cholesky::new(c.entries().clone()).unwrap().l();
        let y = l * z;
        (pts, y.iter().copied().collect())
    }

    #[test]
    fn fit_is_no_worse_than_truth() {
        let (pts, y) = sample_gp(30, 5.0, 1.0, 1e-4, 21);
        let noise = vec![1e-4; 30];
        let bounds = HyperBounds::default_for(&y, 1, None);
        let fitted = fit_hyperparams(&pts, &y, &noise, Structure::Full, &bounds, None, &FitOptions::default()).unwrap();
        let at_fit = neg_log_likelihood(&pts, &y, &noise, &fitted, Structure::Full).unwrap();
        let at_truth = neg_log_likelihood(&pts, &y, &noise, &hp(0.0, 1.0, vec![5.0]), Structure::Full).unwrap();
        assert!(at_fit <= at_truth + 1e-6, "fit {at_fit} truth {at_truth}");
    }

    #[test]
    fn active_floor_clamps_lengthscale() {
        // smooth data: the unconstrained optimum has a small rate
        let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<f64> = pts.iter().map(|p| (1.2 * p[0]).sin()).collect();
        let noise = vec![1e-6; 12];
        let bounds = HyperBounds::default_for(&y, 1, Some(0.0));
        let free = fit_hyperparams(&pts, &y, &noise, Structure::Full, &bounds, None, &FitOptions::default()).unwrap();
        assert!(free.lengthscales.values()[0] < 2.0, "unconstrained rate {:?}", free.lengthscales);
        let floor = Lengthscales::new(vec![2.0]).unwrap();
        let pinned =
            fit_hyperparams(&pts, &y, &noise, Structure::Full, &bounds, Some(&floor), &FitOptions::default()).unwrap();
        assert!((pinned.lengthscales.values()[0] - 2.0).abs() < 1e-9, "{:?}", pinned.lengthscales);
    }

    #[test]
    fn fit_is_deterministic() {
        let (pts, y) = sample_gp(15, 8.0, 2.0, 1e-3, 3);
        let noise = vec![1e-3; 15];
        let bounds = HyperBounds::default_for(&y, 1, None);
        let opts = FitOptions { seed: 77, ..Default::default() };
        let a = fit_hyperparams(&pts, &y, &noise, Structure::Full, &bounds, None, &opts).unwrap();
        let b = fit_hyperparams(&pts, &y, &noise, Structure::Full, &bounds, None, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_respects_bounds() {
        let (pts, y) = sample_gp(12, 30.0, 1.0, 1e-3, 8);
        let noise = vec![1e-3; 12];
        let mut bounds = HyperBounds::default_for(&y, 1, None);
        bounds.lengthscales = (vec![0.5], vec![4.0]);
        let h = fit_hyperparams(&pts, &y, &noise, Structure::Full, &bounds, None, &FitOptions::default()).unwrap();
        let v = h.lengthscales.values()[0];
        assert!((0.5..=4.0).contains(&v));
        assert!(h.variance >= bounds.variance.0 && h.variance <= bounds.variance.1 * (1.0 + 1e-9));
    }

    #[test]
    fn coincident_points_only_is_rejected() {
        let pts = vec![vec![0.5], vec![0.5]];
        let err = fit_hyperparams(
            &pts,
            &[1.0, 2.0],
            &[0.1, 0.1],
            Structure::Full,
            &HyperBounds::default_for(&[1.0, 2.0], 1, None),
            None,
            &FitOptions::default(),
        );
        assert!(err.is_err());
    }
}
