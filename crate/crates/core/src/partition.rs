//! k-means grouping of the initial design and the nearest-center partition
//! of the domain it induces.

use rand::Rng;

use crate::dataset::{sq_dist, Bounds};
use nalgebra::{DMatrix, DVector};

use crate::design::rng_from;
use crate::{Error, Result};

const MAX_LLOYD_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    /// Cluster index of every input point.
    pub assignment: Vec<usize>,
}

/// Nearest center by Euclidean distance, ties to the lowest index.
pub(crate) fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn centroid(points: &[Vec<f64>], members: impl Iterator<Item = usize>) -> Option<Vec<f64>> {
    let mut sum: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for i in members {
        let s = sum.get_or_insert_with(|| vec![0.0; points[i].len()]);
        for (a, b) in s.iter_mut().zip(&points[i]) {
            *a += b;
        }
        count += 1;
    }
    sum.map(|mut s| {
        s.iter_mut().for_each(|v| *v /= count as f64);
        s
    })
}

/// Lloyd's algorithm with farthest-point seeding. Runs until the assignment
/// stops changing or for 100 iterations. Empty clusters take the point
/// farthest from its center in the currently largest cluster. Centers are
/// returned in lexicographic order so the numbering does not depend on the
/// seeding.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!("k-means with k = {k} on only {} points", points.len())));
    }
    let mut rng = rng_from(seed, &[0x6b6d]);
    let first = rng.random_range(0..points.len());
    let mut centers = vec![points[first].clone()];
    let mut min_d: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centers.len() < k {
        let mut far = 0;
        for i in 1..points.len() {
            if min_d[i] > min_d[far] {
                far = i;
            }
        }
        centers.push(points[far].clone());
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[far]));
        }
    }

    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(&centers, p)).collect();
    for _ in 0..MAX_LLOYD_ITERS {
        for c in 0..k {
            if let Some(m) = centroid(points, (0..points.len()).filter(|&i| assignment[i] == c)) {
                centers[c] = m;
            }
        }
        repair_empty(points, &mut centers, &mut assignment, k);
        let next: Vec<usize> = points.iter().map(|p| nearest(&centers, p)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    repair_empty(points, &mut centers, &mut assignment, k);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        centers[a]
            .iter()
            .zip(&centers[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    Ok(KMeans {
        centers: order.iter().map(|&c| centers[c].clone()).collect(),
        assignment: assignment.iter().map(|&c| rank[c]).collect(),
    })
}

fn repair_empty(points: &[Vec<f64>], centers: &mut [Vec<f64>], assignment: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let largest = (0..k).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
        let victim = (0..points.len())
            .filter(|&i| assignment[i] == largest)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if sq_dist(&points[b], &centers[largest]) >= sq_dist(&points[i], &centers[largest]) => Some(b),
                _ => Some(i),
            })
            .expect("largest cluster is nonempty");
        assignment[victim] = empty;
        centers[empty] = points[victim].clone();
        if let Some(m) = centroid(points, (0..points.len()).filter(|&i| assignment[i] == largest)) {
            centers[largest] = m;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: usize,
    pub center: Vec<f64>,
    /// Indices of the initial design points in this region.
    pub members: Vec<usize>,
    /// Box enclosing the region's cell, used for rejection sampling.
    pub cell_box: Bounds,
}

/// Disjoint cover of the domain by nearest-center cells. Region ids are
/// 0-based. Centers never move after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    regions: Vec<Region>,
    bounds: Bounds,
}

impl Partition {
    /// Clusters `points` with k-means and freezes the resulting centers.
    pub fn build(points: &[Vec<f64>], k: usize, seed: u64, bounds: &Bounds) -> Result<Self> {
        for p in points {
            bounds.check(p)?;
        }
        let km = kmeans(points, k, seed)?;
        // Membership follows the cell rule, which agrees with the k-means
        // assignment unless Lloyd's iteration hit its cap.
        let mut members = vec![Vec::new(); k];
        for (i, p) in points.iter().enumerate() {
            members[nearest(&km.centers, p)].push(i);
        }
        Self::from_centers(km.centers, bounds, Some(members))
    }

    /// Partition from explicit centers; members are left empty unless given.
    pub fn from_centers(
        centers: Vec<Vec<f64>>,
        bounds: &Bounds,
        members: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("a partition needs at least one center"));
        }
        for c in &centers {
            if c.len() != bounds.dim() {
                return Err(Error::invalid("center dimension does not match the domain"));
            }
        }
        let boxes = cell_boxes(&centers, bounds)?;
        let mut members = members.unwrap_or_else(|| vec![Vec::new(); centers.len()]);
        members.resize(centers.len(), Vec::new());
        let regions = centers
            .into_iter()
            .zip(members)
            .zip(boxes)
            .enumerate()
            .map(|(id, ((center, members), cell_box))| Region { id, center, members, cell_box })
            .collect();
        Ok(Self { regions, bounds: bounds.clone() })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: usize) -> &Region {
        &self.regions[id]
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.regions.iter().map(|r| r.center.clone()).collect()
    }

    /// Region of `x`: nearest center, ties to the lowest id.
    pub fn assign_region(&self, x: &[f64]) -> Result<usize> {
        self.bounds.check(x)?;
        Ok(self.nearest(x))
    }

    /// Like [`Partition::assign_region`] without the domain check.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for r in &self.regions {
            let d = sq_dist(&r.center, x);
            if d < best_d {
                best_d = d;
                best = r.id;
            }
        }
        best
    }
}

/// Per-cell bounding boxes. Each cell is the intersection of the domain with
/// the bisector half-spaces, so its box is spanned by the polytope vertices.
/// Vertex enumeration is skipped (full domain box) when it would be too large.
fn cell_boxes(centers: &[Vec<f64>], bounds: &Bounds) -> Result<Vec<Bounds>> {
    (0..centers.len()).map(|r| cell_box(centers, r, bounds)).collect()
}

const MAX_VERTEX_SYSTEMS: u128 = 200_000;

fn cell_box(centers: &[Vec<f64>], r: usize, bounds: &Bounds) -> Result<Bounds> {
    let d = bounds.dim();
    let c = &centers[r];
    // rows a.x <= b
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for (j, o) in centers.iter().enumerate() {
        if j == r || o == c {
            continue;
        }
        let a: Vec<f64> = o.iter().zip(c).map(|(p, q)| p - q).collect();
        let b = 0.5 * (o.iter().map(|v| v * v).sum::<f64>() - c.iter().map(|v| v * v).sum::<f64>());
        planes.push((a, b));
    }
    for ax in 0..d {
        let mut e = vec![0.0; d];
        e[ax] = 1.0;
        planes.push((e.clone(), bounds.upper()[ax]));
        e[ax] = -1.0;
        planes.push((e, -bounds.lower()[ax]));
    }
    if binomial(planes.len(), d) > MAX_VERTEX_SYSTEMS {
        return Ok(bounds.clone());
    }
    let scale = bounds.diagonal().max(1.0);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let m = DMatrix::from_fn(d, d, |i, k| planes[idx[i]].0[k]);
        let rhs = DVector::from_fn(d, |i, _| planes[idx[i]].1);
        if let Some(v) = m.lu().solve(&rhs) {
            let feasible = v.iter().all(|x| x.is_finite())
                && planes.iter().all(|(a, b)| {
                    let lhs: f64 = a.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
                    lhs <= b + 1e-9 * scale * (1.0 + b.abs())
                });
            if feasible {
                for ax in 0..d {
                    lo[ax] = lo[ax].min(v[ax]);
                    hi[ax] = hi[ax].max(v[ax]);
                }
            }
        }
        if !next_combination(&mut idx, planes.len()) {
            break;
        }
    }
    if lo.iter().any(|v| !v.is_finite()) {
        return Ok(bounds.clone());
    }
    let pad = |ax: usize| 1e-9 * bounds.width(ax);
    let l: Vec<f64> = (0..d).map(|ax| (lo[ax] - pad(ax)).max(bounds.lower()[ax])).collect();
    let h: Vec<f64> = (0..d).map(|ax| (hi[ax] + pad(ax)).min(bounds.upper()[ax])).collect();
    Bounds::new(l, h)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
