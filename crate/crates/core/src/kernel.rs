//! Gaussian correlation kernel and covariance assembly with adaptive jitter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// Smallest admissible process variance.
pub const VARIANCE_FLOOR: f64 = 1e-8;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Per-axis rate parameters of the Gaussian correlation, in 1/length².
#[derive(Debug, Clone, PartialEq)]
pub struct Lengthscales(pub(crate) Vec<f64>);

impl Lengthscales {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("lengthscales need at least one entry"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("lengthscale {v} is not a finite nonnegative number")));
        }
        Ok(Self(values))
    }

    pub fn uniform(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparams {
    /// Constant process mean (0 for residual models).
    pub mean: f64,
    pub variance: f64,
    pub lengthscales: Lengthscales,
}

impl GpHyperparams {
    pub fn new(mean: f64, variance: f64, lengthscales: Lengthscales) -> Result<Self> {
        if !(variance.is_finite() && variance >= VARIANCE_FLOOR) {
            return Err(Error::invalid(format!(
                "process variance {variance} is below the floor {VARIANCE_FLOOR}"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::invalid("process mean must be finite"));
        }
        Ok(Self { mean, variance, lengthscales })
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.dim()
    }

    /// Covariance `variance * corr(a, b)`; no dimension checks.
    #[inline]
    pub(crate) fn cov(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variance * corr_unchecked(a, b, self.lengthscales.values())
    }
}

/// `exp(-sum_k ls_k (a_k - b_k)^2)`.
pub fn gauss_corr(a: &[f64], b: &[f64], ls: &Lengthscales) -> Result<f64> {
    if a.len() != ls.dim() || b.len() != ls.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: points {} and {}, lengthscales {}",
            a.len(),
            b.len(),
            ls.dim()
        )));
    }
    Ok(corr_unchecked(a, b, ls.values()))
}

#[inline]
pub(crate) fn corr_unchecked(a: &[f64], b: &[f64], ls: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..ls.len() {
        let d = a[k] - b[k];
        s += ls[k] * d * d;
    }
    (-s).exp()
}

/// A symmetric covariance matrix together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    entries: DMatrix<f64>,
    jitter_used: f64,
    factor: Cholesky<f64, Dyn>,
}

impl CovMatrix {
    /// Factorizes `entries`, adding diagonal jitter from `1e-10 * scale`
    /// upward by factors of ten (at most `1e-4 * scale`) when needed.
    pub fn factorize(entries: DMatrix<f64>, scale: f64) -> Result<Self> {
        let (factor, jitter_used) = cholesky_with_jitter(&entries, scale)?;
        Ok(Self { entries, jitter_used, factor })
    }

    /// The matrix as assembled, without jitter.
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(b)
    }

    /// `L^{-1} b` with `L` the lower Cholesky factor.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky factor has a nonzero diagonal")
    }

    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky factor has a nonzero diagonal")
    }

    pub fn log_det(&self) -> f64 {
        let l = self.factor.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

pub(crate) fn cholesky_with_jitter(m: &DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let mut jitter = JITTER_START * scale;
    while jitter <= JITTER_MAX * scale * (1.0 + 1e-9) {
        let mut jittered = m.clone();
        for i in 0..jittered.nrows() {
            jittered[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(jittered) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::IllConditioned { size: m.nrows(), max_jitter: JITTER_MAX * scale })
}

/// Assembles `variance * corr(x_i, x_j) + [i == j] nugget_i` and factorizes it.
pub fn build_cov(points: &[Vec<f64>], hp: &GpHyperparams, nugget: Option<&[f64]>) -> Result<CovMatrix> {
    if points.is_empty() {
        return Err(Error::invalid("covariance needs at least one point"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != hp.dim()) {
        return Err(Error::invalid(format!(
            "point of dimension {} against {} lengthscales",
            p.len(),
            hp.dim()
        )));
    }
    if let Some(n) = nugget {
        if n.len() != points.len() {
            return Err(Error::invalid(format!(
                "nugget has {} entries for {} points",
                n.len(),
                points.len()
            )));
        }
        if n.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("nugget entries must be finite and nonnegative"));
        }
    }
    CovMatrix::factorize(cov_entries(points, hp, nugget), hp.variance)
}

pub(crate) fn cov_entries(points: &[Vec<f64>], hp: &GpHyperparams, nugget: Option<&[f64]>) -> DMatrix<f64> {
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = hp.variance + nugget.map_or(0.0, |v| v[i]);
        for j in 0..i {
            let c = hp.cov(&points[i], &points[j]);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    m
}

/// Cross-covariance matrix with rows for `a` and columns for `b`.
pub(crate) fn cross_cov(a: &[Vec<f64>], b: &[Vec<f64>], hp: &GpHyperparams) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| hp.cov(&a[i], &b[j]))
}

pub(crate) fn cov_vector(x: &[f64], points: &[Vec<f64>], hp: &GpHyperparams) -> DVector<f64> {
    DVector::from_iterator(points.len(), points.iter().map(|p| hp.cov(x, p)))
}
