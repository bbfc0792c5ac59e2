//! Bounded Nelder–Mead simplex search with Latin-hypercube multi-start.

use rand::Rng;

use crate::dataset::Bounds;
use crate::design::latin_hypercube;

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when every vertex is within this distance (per axis) of the best.
    pub x_tol: f64,
    /// Initial simplex step as a fraction of each axis width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 400, f_tol: 1e-9, x_tol: 1e-7, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimizes `f` over `bounds` starting from `start`. Trial points are
/// projected onto the box before evaluation, so the returned point is always
/// feasible. Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(f: &mut F, start: &[f64], bounds: &Bounds, opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| {
        bounds.clamp(x);
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    let v0 = eval(&mut x0, &mut evals);
    simplex.push((x0.clone(), v0));
    for i in 0..n {
        let mut xi = x0.clone();
        let step = opts.initial_step * bounds.width(i);
        // step inward when the start sits on the upper face
        xi[i] = if x0[i] + step <= bounds.upper()[i] { x0[i] + step } else { x0[i] - step };
        let vi = eval(&mut xi, &mut evals);
        simplex.push((xi, vi));
    }

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = if best.is_finite() && worst.is_finite() { (worst - best).abs() } else { f64::INFINITY };
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol * (1.0 + best.abs()) && size <= opts.x_tol {
            break;
        }
        if size <= opts.x_tol * 1e-3 {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let mut xr = along(1.0);
        let vr = eval(&mut xr, &mut evals);
        if vr < simplex[0].1 {
            let mut xe = along(2.0);
            let ve = eval(&mut xe, &mut evals);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
        } else if vr < simplex[n - 1].1 {
            simplex[n] = (xr, vr);
        } else {
            let (mut xc, outside) = if vr < simplex[n].1 { (along(0.5), true) } else { (along(-0.5), false) };
            let vc = eval(&mut xc, &mut evals);
            if (outside && vc <= vr) || (!outside && vc < simplex[n].1) {
                simplex[n] = (xc, vc);
            } else {
                let best_x = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let mut xs: Vec<f64> =
                        best_x.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    let vs = eval(&mut xs, &mut evals);
                    *vertex = (xs, vs);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals }
}

/// Runs Nelder–Mead from each of `extra_starts` followed by `lhs_starts`
/// Latin-hypercube starts and keeps the best result (ties to the earliest).
pub fn multi_start<F, R>(
    f: &mut F,
    bounds: &Bounds,
    extra_starts: &[Vec<f64>],
    lhs_starts: usize,
    opts: &NelderMeadOptions,
    rng: &mut R,
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut starts: Vec<Vec<f64>> = extra_starts.to_vec();
    if lhs_starts > 0 {
        starts.extend(latin_hypercube(lhs_starts, bounds, rng));
    }
    let mut best: Option<Minimum> = None;
    for s in &starts {
        let m = nelder_mead(f, s, bounds, opts);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    best
}
