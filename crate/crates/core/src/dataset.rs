//! Design points, replication statistics and the box domain.

use crate::{Error, Result};

/// Axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "bounds need matching nonempty lower/upper vectors, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("bad interval [{lo}, {hi}] on axis {i}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit box `[0, 1]^d`.
    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// Euclidean length of the box diagonal.
    pub fn diagonal(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum::<f64>().sqrt()
    }

    /// Membership with a relative tolerance of 1e-12 of each axis width.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(i, &v)| {
                let tol = 1e-12 * self.width(i);
                v >= self.lower[i] - tol && v <= self.upper[i] + tol
            })
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, domain has {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.contains(x) {
            return Err(Error::invalid(format!("point {x:?} lies outside the domain")));
        }
        Ok(())
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.lower[i]) / self.width(i))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.lower[i] + v * self.width(i))
            .collect()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Streaming count/mean/M2 accumulator (Welford, with Chan's merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn from_values(values: &[f64]) -> Self {
        let mut m = Self::default();
        for &v in values {
            m.push(v);
        }
        m
    }

    /// Rebuilds moments from a summary; `sample_var` is the unbiased variance.
    pub fn from_summary(count: u64, mean: f64, sample_var: f64) -> Self {
        let m2 = if count > 1 { sample_var * (count - 1) as f64 } else { 0.0 };
        Self { count, mean, m2 }
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased variance of one replication; `None` below two draws.
    pub fn sample_var(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub x: Vec<f64>,
    pub moments: Moments,
    pub region: usize,
}

impl DesignPoint {
    pub fn reps(&self) -> u64 {
        self.moments.count()
    }

    pub fn sample_mean(&self) -> f64 {
        self.moments.mean()
    }

    pub fn sample_var(&self) -> Option<f64> {
        self.moments.sample_var()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    bounds: Bounds,
    points: Vec<DesignPoint>,
}

impl Dataset {
    pub fn new(bounds: Bounds) -> Self {
        Self { bounds, points: Vec::new() }
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn point(&self, id: usize) -> &DesignPoint {
        &self.points[id]
    }

    /// Appends a point and returns its id.
    pub fn push(&mut self, x: Vec<f64>, moments: Moments, region: usize) -> Result<usize> {
        self.bounds.check(&x)?;
        if moments.count() == 0 {
            return Err(Error::invalid("a design point needs at least one replication"));
        }
        self.points.push(DesignPoint { x, moments, region });
        Ok(self.points.len() - 1)
    }

    pub fn merge_moments(&mut self, id: usize, batch: &Moments) {
        self.points[id].moments.merge(batch);
    }

    pub fn set_region(&mut self, id: usize, region: usize) {
        self.points[id].region = region;
    }

    pub fn region_members(&self, region: usize) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.points[i].region == region).collect()
    }

    pub fn total_reps(&self) -> u64 {
        self.points.iter().map(DesignPoint::reps).sum()
    }

    /// A copy without point `id` (ids above it shift down by one).
    pub fn without(&self, id: usize) -> Self {
        let mut points = self.points.clone();
        points.remove(id);
        Self { bounds: self.bounds.clone(), points }
    }

    /// Median of the per-replication sample variances that exist.
    pub fn median_sample_var(&self) -> Option<f64> {
        let mut vars: Vec<f64> = self.points.iter().filter_map(DesignPoint::sample_var).collect();
        if vars.is_empty() {
            return None;
        }
        vars.sort_by(f64::total_cmp);
        let mid = vars.len() / 2;
        Some(if vars.len() % 2 == 1 { vars[mid] } else { 0.5 * (vars[mid - 1] + vars[mid]) })
    }

    /// Noise variance of each sample mean: `sample_var / reps`. Points with a
    /// single replication use `prior` (default: the median sample variance).
    pub fn mean_noise_variances(&self, prior: Option<f64>) -> Vec<f64> {
        let fallback = prior.or_else(|| self.median_sample_var()).unwrap_or(0.0);
        self.points
            .iter()
            .map(|p| p.sample_var().unwrap_or(fallback) / p.reps() as f64)
            .collect()
    }

    /// Index of the lowest sample mean, ties to the lowest id.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.points.iter().enumerate() {
            match best {
                Some(b) if self.points[b].sample_mean() <= p.sample_mean() => {}
                _ => best = Some(i),
            }
        }
        best
    }

    pub fn xs(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.x.clone()).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(DesignPoint::sample_mean).collect()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}
