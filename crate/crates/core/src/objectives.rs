//! Stochastic test problems: `y(x) = f(x) + sigma(x) z` with `z ~ N(0, 1)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Bounds, Moments};
use crate::design::{point_hash, rng_from};
use crate::{Error, Result};

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Known minimizer of the mean function.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// A noisy objective to be minimized. Replication `r` at point `x` draws its
/// noise from a stream keyed by `(seed, hash(x), r)`, so results do not depend
/// on evaluation order or threading.
#[derive(Clone)]
pub struct StochasticObjective {
    name: String,
    bounds: Bounds,
    mean_fn: PointFn,
    noise_sd_fn: PointFn,
    true_opt: Option<Optimum>,
    seed: u64,
    /// Whether reported values are negated (the problem is a maximization).
    negated: bool,
}

impl fmt::Debug for StochasticObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticObjective")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("true_opt", &self.true_opt)
            .field("seed", &self.seed)
            .finish()
    }
}

impl StochasticObjective {
    pub fn new(
        name: impl Into<String>,
        bounds: Bounds,
        mean_fn: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        noise_sd_fn: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        seed: u64,
    ) -> Self {
        Self {
            name: name.into(),
            bounds,
            mean_fn: Arc::new(mean_fn),
            noise_sd_fn: Arc::new(noise_sd_fn),
            true_opt: None,
            seed,
            negated: false,
        }
    }

    pub fn with_true_opt(mut self, opt: Optimum) -> Self {
        self.true_opt = Some(opt);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn true_opt(&self) -> Option<&Optimum> {
        self.true_opt.as_ref()
    }

    /// True when the original problem is a maximization of `-mean`.
    pub fn is_negated(&self) -> bool {
        self.negated
    }

    /// Converts a minimization value back to the problem's own sign.
    pub fn report_value(&self, value: f64) -> f64 {
        if self.negated {
            -value
        } else {
            value
        }
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        (self.mean_fn)(x)
    }

    pub fn noise_sd(&self, x: &[f64]) -> f64 {
        (self.noise_sd_fn)(x)
    }

    /// `reps` replications at `x` starting from replication index 0.
    pub fn evaluate(&self, x: &[f64], reps: u64) -> Result<Moments> {
        self.evaluate_from(x, 0, reps)
    }

    /// `reps` replications at `x` with replication indices `first..first + reps`.
    pub fn evaluate_from(&self, x: &[f64], first: u64, reps: u64) -> Result<Moments> {
        self.bounds.check(x)?;
        let f = self.mean(x);
        let sd = self.noise_sd(x);
        if !(f.is_finite() && sd.is_finite() && sd >= 0.0) {
            return Err(Error::invalid(format!("objective {} is not finite at {x:?}", self.name)));
        }
        let h = point_hash(x);
        let mut m = Moments::default();
        for r in first..first + reps {
            if sd == 0.0 {
                m.push(f);
                continue;
            }
            let mut rng = rng_from(self.seed, &[h, r]);
            let z: f64 = StandardNormal.sample(&mut rng);
            m.push(f + sd * z);
        }
        Ok(m)
    }
}

/// `cos(100 (x - 0.2)) exp(2x) + 7 sin(10x)` on `[0, 1]` with noise variance
/// `0.2 + 0.1 sin(10x)`.
pub fn make_1d_paper(seed: u64) -> StochasticObjective {
    StochasticObjective::new(
        "paper1d",
        Bounds::unit(1),
        |x: &[f64]| paper1d_mean(x[0]),
        |x: &[f64]| (0.2 + 0.1 * (10.0 * x[0]).sin()).sqrt(),
        seed,
    )
    .with_true_opt(Optimum { x: vec![0.9865], value: -10.1316 })
}

pub fn paper1d_mean(x: f64) -> f64 {
    (100.0 * (x - 0.2)).cos() * (2.0 * x).exp() + 7.0 * (10.0 * x).sin()
}

/// Multimodal maximization problem on `[0, 100]^2`, wrapped as minimization
/// of `-g`, with noise variance `3 (1 + x1/100)^2 (1 + x2/100)^2`.
pub fn make_2d_sun(seed: u64) -> StochasticObjective {
    let mut obj = StochasticObjective::new(
        "sun2d",
        Bounds::new(vec![0.0, 0.0], vec![100.0, 100.0]).expect("static bounds"),
        |x: &[f64]| -sun_g(x[0], x[1]),
        |x: &[f64]| (3.0f64).sqrt() * (1.0 + x[0] / 100.0) * (1.0 + x[1] / 100.0),
        seed,
    )
    .with_true_opt(Optimum { x: vec![90.0, 90.0], value: -20.0 });
    obj.negated = true;
    obj
}

pub fn sun_g(x1: f64, x2: f64) -> f64 {
    let term = |x: f64| 10.0 * (0.05 * PI * x).sin().powi(6) / 2f64.powf(((x - 90.0) / 50.0).powi(2));
    term(x1) + term(x2)
}

/// Looks up a bundled objective by its CLI name.
pub fn by_name(name: &str, seed: u64) -> Result<StochasticObjective> {
    match name {
        "paper1d" => Ok(make_1d_paper(seed)),
        "sun2d" => Ok(make_2d_sun(seed)),
        other => Err(Error::invalid(format!("unknown objective '{other}' (expected paper1d or sun2d)"))),
    }
}

pub const OBJECTIVE_NAMES: [&str; 2] = ["paper1d", "sun2d"];

/// Log-odds transform `-ln(1/p - 1)` mapping probabilities to the real line.
pub fn logistic_transform(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability {p} is outside (0, 1)")));
    }
    Ok(-(1.0 / p - 1.0).ln())
}

pub fn logistic_inverse(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

/// Minimum of the mean function over a regular grid with `per_axis` nodes per
/// axis (`per_axis^d` evaluations).
pub fn grid_minimum(obj: &StochasticObjective, per_axis: usize) -> Optimum {
    let d = obj.dim();
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(d as u32);
    let mut best = Optimum { x: Vec::new(), value: f64::INFINITY };
    let mut x = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for (a, xa) in x.iter_mut().enumerate() {
            let i = rem % per_axis;
            rem /= per_axis;
            *xa = obj.bounds.lower()[a] + obj.bounds.width(a) * i as f64 / (per_axis - 1) as f64;
        }
        let v = obj.mean(&x);
        if v < best.value {
            best = Optimum { x: x.clone(), value: v };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper1d_reported_optima() {
        assert!((paper1d_mean(0.9865) + 10.1316).abs() < 5e-4, "{}", paper1d_mean(0.9865));
        assert!((paper1d_mean(0.4826) + 9.5799).abs() < 5e-4, "{}", paper1d_mean(0.4826));
        let obj = make_1d_paper(0);
        assert!((obj.noise_sd(&[0.0]).powi(2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sun_reported_optima() {
        assert!((sun_g(90.0, 90.0) - 20.0).abs() < 1e-12);
        assert!((sun_g(70.0, 90.0) - 18.95).abs() < 5e-3);
        assert!((sun_g(90.0, 70.0) - 18.95).abs() < 5e-3);
        let obj = make_2d_sun(0);
        assert!((obj.noise_sd(&[100.0, 100.0]).powi(2) - 48.0).abs() < 1e-12);
        assert_eq!(obj.mean(&[90.0, 90.0]), -20.0);
        assert_eq!(obj.report_value(-20.0), 20.0);
    }

    #[test]
    fn dense_grids_agree_with_recorded_optima() {
        let one = grid_minimum(&make_1d_paper(0), 10_000);
        assert!((one.value + 10.1316).abs() < 0.02);
        let two = grid_minimum(&make_2d_sun(0), 200);
        assert!((-two.value - 20.0).abs() < 0.05);
    }

    #[test]
    fn noise_free_evaluation_is_exact() {
        let obj = StochasticObjective::new("quad", Bounds::unit(1), |x: &[f64]| x[0] * x[0], |_: &[f64]| 0.0, 1);
        let m = obj.evaluate(&[0.5], 7).unwrap();
        assert_eq!(m.mean(), 0.25);
        assert_eq!(m.sample_var(), Some(0.0));
    }

    #[test]
    fn evaluation_is_reproducible_and_batch_invariant() {
        let obj = make_1d_paper(42);
        let a = obj.evaluate(&[0.3], 10).unwrap();
        assert_eq!(a, obj.evaluate(&[0.3], 10).unwrap());
        let mut b = obj.evaluate_from(&[0.3], 0, 4).unwrap();
        b.merge(&obj.evaluate_from(&[0.3], 4, 6).unwrap());
        assert!((a.mean() - b.mean()).abs() < 1e-12);
        assert!((a.sample_var().unwrap() - b.sample_var().unwrap()).abs() < 1e-10);
        assert_ne!(a, make_1d_paper(43).evaluate(&[0.3], 10).unwrap());
    }

    #[test]
    fn out_of_bounds_rejected() {
        assert!(make_2d_sun(0).evaluate(&[101.0, 5.0], 1).is_err());
    }

    #[test]
    fn clt_bound_on_large_batches() {
        let obj = StochasticObjective::new("flat", Bounds::unit(1), |_: &[f64]| 1.5, |_: &[f64]| 1.0, 0);
        let mut within = 0;
        for seed in 0..20 {
            let m = obj.clone().with_seed(seed).evaluate(&[0.5], 100_000).unwrap();
            if (m.mean() - 1.5).abs() < 4.0 / (100_000f64).sqrt() {
                within += 1;
            }
        }
        assert!(within >= 19, "{within}/20");
    }

    #[test]
    fn logistic_values() {
        assert_eq!(logistic_transform(0.5).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((logistic_transform(e / (1.0 + e)).unwrap() - 1.0).abs() < 1e-12);
        assert!(logistic_transform(0.0).is_err());
        assert!(logistic_transform(1.0).is_err());
        assert!(logistic_transform(f64::NAN).is_err());
    }

    #[test]
    fn unknown_name() {
        assert!(by_name("branin", 0).is_err());
        assert_eq!(by_name("sun2d", 3).unwrap().seed(), 3);
    }

    /// Asymptotic Kolmogorov p-value for the one-sample statistic `d`.
    fn ks_p_value(d: f64, n: usize) -> f64 {
        let sn = (n as f64).sqrt();
        let lambda = (sn + 0.12 + 0.11 / sn) * d;
        let sum: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        (2.0 * sum).clamp(0.0, 1.0)
    }

    #[test]
    fn noise_draws_look_normal() {
        use crate::acquisition::norm_cdf;
        let x = [0.3];
        let mut passed = 0;
        for seed in 0..10 {
            let obj = make_1d_paper(seed);
            let (mu, sd) = (obj.mean(&x), obj.noise_sd(&x));
            let n = 400;
            let mut z: Vec<f64> = (0..n)
                .map(|r| (obj.evaluate_from(&x, r, 1).unwrap().mean() - mu) / sd)
                .collect();
            z.sort_by(f64::total_cmp);
            let d = z
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let f = norm_cdf(v);
                    (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
                })
                .fold(0.0, f64::max);
            if ks_p_value(d, n as usize) > 0.01 {
                passed += 1;
            }
        }
        assert!(passed >= 9, "{passed}/10");
    }

    proptest::proptest! {
        #[test]
        fn logistic_round_trip(p in 1e-9f64..1.0 - 1e-9) {
            let f = logistic_transform(p).unwrap();
            proptest::prop_assert!((logistic_inverse(f) - p).abs() <= 1e-12);
        }

        #[test]
        fn logistic_is_increasing(a in 1e-6f64..0.999, gap in 1e-6f64..1e-3) {
            let b = (a + gap).min(1.0 - 1e-9);
            proptest::prop_assert!(logistic_transform(a).unwrap() < logistic_transform(b).unwrap());
        }
    }
}
