//! Fixtures shared by unit tests.

use rand::Rng;

use super::{CategoricalSpace, ObservedDistribution};
use crate::lattice::{Pattern, PatternSet};

/// The two-item binary table used throughout the unit tests.
pub fn fixture_p2() -> ObservedDistribution {
    let space = CategoricalSpace::new(vec![2, 2]).unwrap();
    let pats = PatternSet::full(2).unwrap();
    ObservedDistribution::from_masses(
        space,
        pats,
        vec![
            vec![0.20, 0.10, 0.10, 0.20],
            vec![0.10, 0.10],
            vec![0.05, 0.05],
            vec![0.10],
        ],
    )
    .unwrap()
}

/// Random strictly positive observed distribution with `p <= max_p`,
/// `K_j <= max_k` and a random pattern set containing `0_p`.
pub fn random_observed(rng: &mut impl Rng, max_p: usize, max_k: usize) -> ObservedDistribution {
    let p = rng.random_range(1..=max_p);
    let levels = (0..p).map(|_| rng.random_range(2..=max_k)).collect();
    let space = CategoricalSpace::new(levels).unwrap();
    let all = PatternSet::full(p).unwrap();
    let chosen: Vec<Pattern> = all
        .iter()
        .filter(|m| m.is_complete() || rng.random_bool(0.6))
        .cloned()
        .collect();
    let pats = PatternSet::new(p, chosen).unwrap();
    let mut weights: Vec<Vec<f64>> = Vec::new();
    for m in pats.iter() {
        let size: usize = m.observed_items().map(|j| space.levels()[j]).product();
        weights.push((0..size).map(|_| rng.random_range(0.05..1.0)).collect());
    }
    ObservedDistribution::from_weights(space, pats, weights).unwrap()
}
