use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::full_data::FullDataDistribution;
use super::observed::ObservedDistribution;
use super::space::{CategoricalSpace, Layout};
use crate::error::{invalid, Result};
use crate::lattice::{Pattern, PatternSet};

/// A simulated record: the item values with missing coordinates blanked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedRecord {
    pub pattern: Pattern,
    pub values: Vec<Option<usize>>,
}

/// Draw `n` i.i.d. `(x, m)` pairs from `g` and blank the missing items.
pub fn simulate(g: &FullDataDistribution, n: usize, seed: u64) -> Result<Vec<MaskedRecord>> {
    if n == 0 {
        return Err(invalid("simulation needs at least one record"));
    }
    let space = g.space();
    let cells = space.cell_count();
    let patterns: Vec<&Pattern> = g.patterns().iter().collect();
    let weights: Vec<f64> = patterns
        .iter()
        .flat_map(|m| g.pattern_log_masses(m).expect("member").iter().map(|v| v.exp()))
        .collect();
    let index = WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let k = index.sample(&mut rng);
            let m = patterns[k / cells];
            let cell = space.cell_at(k % cells);
            let values = cell
                .into_iter()
                .enumerate()
                .map(|(j, x)| (!m.is_missing(j)).then_some(x))
                .collect();
            MaskedRecord {
                pattern: m.clone(),
                values,
            }
        })
        .collect())
}

/// Per-pattern observed-cell counts of a set of records, over the patterns
/// that actually occur.
pub fn tabulate(space: &CategoricalSpace, records: &[MaskedRecord]) -> Result<(PatternSet, Vec<Vec<f64>>)> {
    let p = space.item_count();
    let mut seen: Vec<Pattern> = records.iter().map(|r| r.pattern.clone()).collect();
    seen.push(Pattern::complete(p));
    seen.sort_by_key(|m| m.to_string());
    seen.dedup();
    let patterns = PatternSet::new(p, seen)?;
    let layouts: Vec<Layout> = patterns.iter().map(|m| Layout::new(space, m)).collect();
    let mut counts: Vec<Vec<f64>> = layouts.iter().map(|l| vec![0.0; l.size()]).collect();
    for r in records {
        let pos = patterns.position(&r.pattern).expect("tabulated pattern");
        counts[pos][layouts[pos].index_partial(&r.values)?] += 1.0;
    }
    Ok((patterns, counts))
}

/// Empirical observed-data distribution of a set of records.
pub fn empirical_observed(space: &CategoricalSpace, records: &[MaskedRecord]) -> Result<ObservedDistribution> {
    let (patterns, counts) = tabulate(space, records)?;
    ObservedDistribution::from_weights(space.clone(), patterns, counts)
}
