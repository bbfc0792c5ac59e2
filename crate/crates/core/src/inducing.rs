//! Response-stratified selection of the global inducing points.

use crate::dataset::{dist, Bounds, Dataset};
use crate::design::derive_seed;
use crate::partition::{kmeans, Partition};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InducingOptions {
    /// Inducing points per region; `None` uses `min(max(1, ceil(N_k / 4)), 2d + 2)`.
    pub target_per_region: Option<usize>,
    /// Number of response bands within a region.
    pub bands: usize,
    pub seed: u64,
}

impl Default for InducingOptions {
    fn default() -> Self {
        Self { target_per_region: None, bands: 2, seed: 0 }
    }
}

/// The global inducing points, grouped by the region that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct InducingSet {
    by_region: Vec<Vec<Vec<f64>>>,
    points: Vec<Vec<f64>>,
    min_pairwise_distance: f64,
    options: InducingOptions,
    diagonal: f64,
}

impl InducingSet {
    /// A set with explicitly chosen points per region.
    pub fn from_regions(by_region: Vec<Vec<Vec<f64>>>, bounds: &Bounds) -> Self {
        let mut set = Self {
            by_region,
            points: Vec::new(),
            min_pairwise_distance: 0.0,
            options: InducingOptions::default(),
            diagonal: bounds.diagonal(),
        };
        set.rebuild();
        set
    }

    /// All inducing points, region by region.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn region_points(&self, region: usize) -> &[Vec<f64>] {
        &self.by_region[region]
    }

    pub fn per_region_counts(&self) -> Vec<usize> {
        self.by_region.iter().map(Vec::len).collect()
    }

    /// Neighborhood radius: the smallest positive distance between two
    /// inducing points, or a tenth of the domain diagonal when none exists.
    pub fn min_pairwise_distance(&self) -> f64 {
        self.min_pairwise_distance
    }

    pub fn options(&self) -> &InducingOptions {
        &self.options
    }

    /// Re-runs the selection for one region, leaving the others untouched.
    pub fn reselect_region(&mut self, data: &Dataset, partition: &Partition, region: usize) -> Result<()> {
        self.by_region[region] = select_region(data, partition, region, &self.options)?;
        self.rebuild();
        Ok(())
    }

    fn rebuild(&mut self) {
        self.points = self.by_region.iter().flatten().cloned().collect();
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in 0..i {
                let d = dist(&self.points[i], &self.points[j]);
                if d > 0.0 && d < best {
                    best = d;
                }
            }
        }
        self.min_pairwise_distance = if best.is_finite() { best } else { self.diagonal / 10.0 };
    }
}

pub fn default_target(members: usize, dim: usize) -> usize {
    members.div_ceil(4).max(1).min(2 * dim + 2)
}

/// Per region: sort members by sample mean, split them into contiguous
/// response bands, and run k-means on the locations inside each band. The
/// cluster centroids are the inducing points.
pub fn select_inducing(data: &Dataset, partition: &Partition, options: &InducingOptions) -> Result<InducingSet> {
    if options.bands == 0 {
        return Err(Error::invalid("at least one response band is required"));
    }
    if options.target_per_region == Some(0) {
        return Err(Error::invalid("target_per_region must be positive"));
    }
    let by_region = (0..partition.len())
        .map(|r| select_region(data, partition, r, options))
        .collect::<Result<Vec<_>>>()?;
    let mut set = InducingSet {
        by_region,
        points: Vec::new(),
        min_pairwise_distance: 0.0,
        options: options.clone(),
        diagonal: data.bounds().diagonal(),
    };
    set.rebuild();
    Ok(set)
}

fn select_region(data: &Dataset, partition: &Partition, region: usize, options: &InducingOptions) -> Result<Vec<Vec<f64>>> {
    let mut members = data.region_members(region);
    if members.is_empty() {
        return Err(Error::InvalidState(format!("region {region} has no design points")));
    }
    let n = members.len();
    let target = options
        .target_per_region
        .unwrap_or_else(|| default_target(n, partition.bounds().dim()))
        .min(n);
    members.sort_by(|&a, &b| {
        data.point(a).sample_mean().total_cmp(&data.point(b).sample_mean()).then(a.cmp(&b))
    });
    let lo = data.point(members[0]).sample_mean();
    let hi = data.point(members[n - 1]).sample_mean();
    let bands = if lo == hi { 1 } else { options.bands.min(target) };

    let sizes: Vec<usize> = (0..bands).map(|b| n / bands + usize::from(b < n % bands)).collect();
    let counts = proportional_counts(&sizes, target);

    let mut out = Vec::with_capacity(target);
    let mut start = 0;
    for (b, (&size, &k)) in sizes.iter().zip(&counts).enumerate() {
        let xs: Vec<Vec<f64>> = members[start..start + size].iter().map(|&i| data.point(i).x.clone()).collect();
        start += size;
        if k == 0 {
            continue;
        }
        let seed = derive_seed(options.seed, &[region as u64, b as u64]);
        out.extend(kmeans(&xs, k, seed)?.centers);
    }
    Ok(out)
}

/// Splits `total` across bands proportionally to their sizes: every band gets
/// at least one and at most its size, leftovers by largest remainder.
fn proportional_counts(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let ideal: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / n as f64).collect();
    let mut counts: Vec<usize> = ideal.iter().zip(sizes).map(|(q, &s)| (q.floor() as usize).clamp(1, s)).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - counts[a] as f64;
        let rb = ideal[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    while assigned < total {
        let Some(&b) = order.iter().find(|&&b| counts[b] < sizes[b]) else { break };
        counts[b] += 1;
        assigned += 1;
        order.retain(|&o| o != b);
        order.push(b);
    }
    while assigned > total {
        let Some(&b) = order.iter().rev().find(|&&b| counts[b] > 1) else { break };
        counts[b] -= 1;
        assigned -= 1;
    }
    counts
}
