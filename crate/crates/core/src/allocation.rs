//! Replication budget: the minimum-replication top-up and OCBA allocation.

use crate::dataset::Dataset;
use crate::objectives::StochasticObjective;
use crate::{Error, Result};

const OCBA_FLOOR: f64 = 1e-6;

/// Replications to add per design point id.
pub type Plan = Vec<(usize, u64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetState {
    total: u64,
    consumed: u64,
    pub r_min: u64,
    pub b2: u64,
    /// `c` in the minimum-replication schedule `kappa_k = c k`.
    pub kappa_coef: f64,
}

impl BudgetState {
    pub fn new(total: u64, r_min: u64, b2: u64, kappa_coef: f64) -> Result<Self> {
        if total == 0 {
            return Err(Error::Config("total budget must be positive".into()));
        }
        if r_min == 0 || b2 == 0 {
            return Err(Error::Config(format!("r_min = {r_min} and B2 = {b2} must both be positive")));
        }
        if !(kappa_coef > 0.0 && kappa_coef.is_finite()) {
            return Err(Error::Config(format!("kappa coefficient {kappa_coef} must be positive")));
        }
        Ok(Self { total, consumed: 0, r_min, b2, kappa_coef })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.consumed
    }

    pub fn exhausted(&self) -> bool {
        self.consumed >= self.total
    }

    /// Records `reps` replications; fails without recording if they do not fit.
    pub fn consume(&mut self, reps: u64) -> Result<()> {
        if reps > self.remaining() {
            return Err(Error::InvalidState(format!(
                "{reps} replications requested with {} left",
                self.remaining()
            )));
        }
        self.consumed += reps;
        Ok(())
    }

    /// Minimum replications per point once there are `n_points` design points.
    pub fn kappa_ceil(&self, n_points: usize) -> u64 {
        kappa_ceil(self.kappa_coef, n_points)
    }
}

/// `ceil(c n)`, robust to `c n` landing a hair above an integer.
pub fn kappa_ceil(coef: f64, n_points: usize) -> u64 {
    (coef * n_points as f64 - 1e-9).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopUp {
    pub plan: Plan,
    /// Replications needed to bring every point to the minimum.
    pub required: u64,
    /// Whether the plan was scaled down to the remaining budget.
    pub truncated: bool,
}

impl TopUp {
    pub fn total(&self) -> u64 {
        self.plan.iter().map(|(_, r)| r).sum()
    }
}

/// Brings every design point up to `ceil(kappa_{N_t})` replications, scaled
/// down proportionally when the remaining budget is short.
pub fn min_rep_topup(data: &Dataset, bs: &BudgetState) -> TopUp {
    let target = bs.kappa_ceil(data.len());
    let needs: Vec<(usize, u64)> = data
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (i, target.saturating_sub(p.reps())))
        .filter(|&(_, e)| e > 0)
        .collect();
    let required: u64 = needs.iter().map(|(_, e)| e).sum();
    if required <= bs.remaining() {
        return TopUp { plan: needs, required, truncated: false };
    }
    let weights: Vec<f64> = needs.iter().map(|&(_, e)| e as f64).collect();
    let shares = largest_remainder(&weights, bs.remaining());
    let plan = needs.iter().zip(shares).map(|(&(i, _), s)| (i, s)).filter(|&(_, s)| s > 0).collect();
    TopUp { plan, required, truncated: true }
}

/// Rounds `total * w_i / sum(w)` to integers summing exactly to `total`,
/// handing leftover units to the largest fractional parts (ties to the
/// lowest index).
pub fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if !(sum > 0.0 && sum.is_finite()) {
        let mut out = vec![total / weights.len() as u64; weights.len()];
        for o in out.iter_mut().take((total % weights.len() as u64) as usize) {
            *o += 1;
        }
        return out;
    }
    let ideal: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u64> = ideal.iter().map(|v| v.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Continuous OCBA shares (summing to 1) for `(sample_mean, sample_sd, id)`
/// triples. Returns the index of the best point and the shares.
pub fn ocba_shares(points: &[(f64, f64, usize)]) -> Result<(usize, Vec<f64>)> {
    if points.is_empty() {
        return Err(Error::invalid("OCBA needs at least one point"));
    }
    let mut b = 0;
    for (i, p) in points.iter().enumerate() {
        let cur = &points[b];
        if p.0 < cur.0 || (p.0 == cur.0 && p.2 < cur.2) {
            b = i;
        }
    }
    if points.len() == 1 {
        return Ok((0, vec![1.0]));
    }
    let (mean_b, sd_b, _) = points[b];
    let sd_b = sd_b.max(OCBA_FLOOR);
    let mut raw = vec![0.0; points.len()];
    let mut sum_sq = 0.0;
    for (i, &(m, sd, _)) in points.iter().enumerate() {
        if i == b {
            continue;
        }
        let sd = sd.max(OCBA_FLOOR);
        let delta = (m - mean_b).max(OCBA_FLOOR);
        raw[i] = (sd / delta).powi(2);
        sum_sq += (raw[i] / sd).powi(2);
    }
    raw[b] = sd_b * sum_sq.sqrt();
    let total: f64 = raw.iter().sum();
    Ok((b, raw.iter().map(|r| r / total).collect()))
}

/// Splits `b2` replications among the points of the promising region by the
/// OCBA ratios, rounded so the plan sums to exactly `b2`.
pub fn ocba_allocate(points: &[(f64, f64, usize)], b2: u64) -> Result<Plan> {
    if b2 == 0 {
        return Err(Error::invalid("B2 must be positive"));
    }
    let (_, shares) = ocba_shares(points)?;
    let counts = largest_remainder(&shares, b2);
    Ok(points.iter().zip(counts).map(|(p, c)| (p.2, c)).collect())
}

/// Runs the planned replications and merges them into the dataset. Each
/// point continues its own replication stream, so the outcome does not
/// depend on how replications were batched.
pub fn apply_plan(
    objective: &StochasticObjective,
    data: &mut Dataset,
    plan: &[(usize, u64)],
    bs: &mut BudgetState,
) -> Result<u64> {
    let total: u64 = plan.iter().map(|(_, r)| r).sum();
    if let Some(&(id, _)) = plan.iter().find(|(id, _)| *id >= data.len()) {
        return Err(Error::invalid(format!("plan refers to unknown design point {id}")));
    }
    if total > bs.remaining() {
        return Err(Error::InvalidState(format!("plan needs {total} replications, {} left", bs.remaining())));
    }
    for &(id, reps) in plan {
        if reps == 0 {
            continue;
        }
        let p = data.point(id);
        let batch = objective
            .evaluate_from(&p.x, p.reps(), reps)
            .map_err(|e| Error::Evaluation { point: id, source: Box::new(e) })?;
        data.merge_moments(id, &batch);
    }
    bs.consume(total)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Bounds, Moments};
    use crate::design::rng_from;
    use crate::objectives::make_1d_paper;
    use proptest::prelude::*;
    use rand::Rng;

    fn data_with_reps(reps: &[u64]) -> Dataset {
        let mut d = Dataset::new(Bounds::unit(1));
        for (i, &r) in reps.iter().enumerate() {
            d.push(vec![i as f64 / reps.len() as f64], Moments::from_summary(r, 0.0, 1.0), 0).unwrap();
        }
        d
    }

    #[test]
    fn kappa_ceiling() {
        assert_eq!(kappa_ceil(0.1, 100), 10);
        assert_eq!(kappa_ceil(0.1, 101), 11);
        assert_eq!(kappa_ceil(0.1, 30), 3);
        assert_eq!(kappa_ceil(0.1, 0), 0);
    }

    #[test]
    fn topup_examples() {
        let bs = BudgetState::new(10_000, 20, 20, 0.1).unwrap();
        let mut reps = vec![7, 20];
        reps.extend(std::iter::repeat_n(10, 98));
        let t = min_rep_topup(&data_with_reps(&reps), &bs);
        assert_eq!(t.plan, vec![(0, 3)]);
        // three points at {5, 10, 12} against a target of 10
        let bs = BudgetState::new(10_000, 1, 1, 100.0 / 30.0).unwrap();
        let t = min_rep_topup(&data_with_reps(&[5, 10, 12]), &bs);
        assert_eq!(t.plan, vec![(0, 5)]);
        assert_eq!(t.total(), 5);
        assert!(!t.truncated);
    }

    #[test]
    fn topup_truncates_to_the_remaining_budget() {
        let mut bs = BudgetState::new(100, 1, 1, 1.0).unwrap();
        bs.consume(95).unwrap();
        let t = min_rep_topup(&data_with_reps(&[1, 1, 1]), &bs);
        assert_eq!(t.required, 6);
        assert!(t.truncated);
        assert_eq!(t.total(), 5);
        assert_eq!(t.plan, vec![(0, 2), (1, 2), (2, 1)]);
    }

    #[test]
    fn ocba_two_competitors() {
        // best at 0, others at distance 1 and 2, equal sd
        let (b, s) = ocba_shares(&[(0.0, 1.0, 0), (1.0, 1.0, 1), (2.0, 1.0, 2)]).unwrap();
        assert_eq!(b, 0);
        assert!((s[1] / s[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ocba_single_point_takes_everything() {
        assert_eq!(ocba_allocate(&[(3.0, 0.5, 7)], 20).unwrap(), vec![(7, 20)]);
        assert!(ocba_allocate(&[(3.0, 0.5, 7)], 0).is_err());
    }

    #[test]
    fn ocba_ties_go_to_the_lowest_id() {
        let (b, _) = ocba_shares(&[(1.0, 1.0, 5), (1.0, 1.0, 2), (3.0, 1.0, 0)]).unwrap();
        assert_eq!(b, 1);
    }

    #[test]
    fn ocba_matches_direct_formula() {
        let mut rng = rng_from(2, &[]);
        for _ in 0..20 {
            let n = 4;
            let pts: Vec<(f64, f64, usize)> =
                (0..n).map(|i| (rng.random_range(-2.0..2.0), rng.random_range(0.1..2.0), i)).collect();
            let plan = ocba_allocate(&pts, 100).unwrap();
            assert_eq!(plan.iter().map(|p| p.1).sum::<u64>(), 100);
            // independent evaluation: ratios relative to the first non-best point
            let b = (0..n).min_by(|&i, &j| pts[i].0.total_cmp(&pts[j].0)).unwrap();
            let w: Vec<f64> = (0..n)
                .map(|i| if i == b { 0.0 } else { (pts[i].1 / (pts[i].0 - pts[b].0)).powi(2) })
                .collect();
            let nb = pts[b].1 * (0..n).filter(|&i| i != b).map(|i| (w[i] / pts[i].1).powi(2)).sum::<f64>().sqrt();
            let total: f64 = w.iter().sum::<f64>() + nb;
            for i in 0..n {
                let cont = 100.0 * if i == b { nb } else { w[i] } / total;
                assert!((plan[i].1 as f64 - cont).abs() <= 1.0, "{} vs {cont}", plan[i].1);
            }
        }
    }

    #[test]
    fn apply_plan_updates_moments_and_budget() {
        let obj = make_1d_paper(3);
        let mut d = Dataset::new(Bounds::unit(1));
        d.push(vec![0.3], obj.evaluate(&[0.3], 5).unwrap(), 0).unwrap();
        let mut bs = BudgetState::new(100, 5, 5, 0.1).unwrap();
        bs.consume(5).unwrap();
        let before = d.clone();
        assert_eq!(apply_plan(&obj, &mut d, &[(0, 0)], &mut bs).unwrap(), 0);
        assert_eq!(d, before);
        apply_plan(&obj, &mut d, &[(0, 7)], &mut bs).unwrap();
        assert_eq!(bs.consumed(), 12);
        assert_eq!(d.total_reps(), 12);
        // same as drawing all 12 at once
        let once = obj.evaluate(&[0.3], 12).unwrap();
        assert!((d.point(0).sample_mean() - once.mean()).abs() < 1e-10);
        assert!((d.point(0).sample_var().unwrap() - once.sample_var().unwrap()).abs() < 1e-10);
        assert!(apply_plan(&obj, &mut d, &[(0, 1000)], &mut bs).is_err());
        assert!(apply_plan(&obj, &mut d, &[(3, 1)], &mut bs).is_err());
    }

    proptest! {
        #[test]
        fn ocba_plans_are_exact(
            pts in prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 1..8),
            b2 in 1u64..500,
        ) {
            let pts: Vec<(f64, f64, usize)> = pts.into_iter().enumerate().map(|(i, (m, s))| (m, s, i)).collect();
            let plan = ocba_allocate(&pts, b2).unwrap();
            prop_assert_eq!(plan.iter().map(|p| p.1).sum::<u64>(), b2);
        }

        #[test]
        fn equal_competitors_get_equal_shares(n in 2usize..7, b2 in 1u64..300) {
            let mut pts = vec![(0.0, 1.0, 0)];
            pts.extend((1..n).map(|i| (1.0, 1.0, i)));
            let plan = ocba_allocate(&pts, b2).unwrap();
            let others: Vec<u64> = plan[1..].iter().map(|p| p.1).collect();
            let lo = *others.iter().min().unwrap();
            let hi = *others.iter().max().unwrap();
            prop_assert!(hi - lo <= 1);
        }
    }
}
