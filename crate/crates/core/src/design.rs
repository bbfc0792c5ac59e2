//! Space-filling designs and seed derivation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Bounds;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a parent seed and a list of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// Hash of a point's coordinates (bit patterns, order sensitive).
pub fn point_hash(x: &[f64]) -> u64 {
    x.iter().fold(0x5851_f42d_4c95_7f2d, |acc, v| splitmix64(acc ^ v.to_bits()))
}

/// Latin hypercube sample of `n` points in `bounds`: each axis is cut into
/// `n` equal strata and every stratum holds exactly one point.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, bounds: &Bounds, rng: &mut R) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        columns.push(perm);
    }
    (0..n)
        .map(|i| {
            let u: Vec<f64> = (0..d)
                .map(|j| (columns[j][i] as f64 + rng.random::<f64>()) / n as f64)
                .collect();
            bounds.from_unit(&u)
        })
        .collect()
}

pub fn uniform_points<R: Rng + ?Sized>(n: usize, bounds: &Bounds, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..bounds.dim()).map(|_| rng.random::<f64>()).collect();
            bounds.from_unit(&u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lhs_occupies_every_stratum_once() {
        let bounds = Bounds::new(vec![0.0, -5.0, 10.0], vec![1.0, 5.0, 100.0]).unwrap();
        let mut rng = rng_from(3, &[]);
        let n = 17;
        let pts = latin_hypercube(n, &bounds, &mut rng);
        for axis in 0..3 {
            let mut seen = vec![false; n];
            for p in &pts {
                let u = (p[axis] - bounds.lower()[axis]) / bounds.width(axis);
                let s = ((u * n as f64).floor() as usize).min(n - 1);
                assert!(!seen[s], "stratum {s} on axis {axis} hit twice");
                seen[s] = true;
            }
        }
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_eq!(derive_seed(1, &[4, 2]), derive_seed(1, &[4, 2]));
        assert_ne!(derive_seed(1, &[4, 2]), derive_seed(1, &[2, 4]));
    }
}
