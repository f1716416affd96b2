//! Shared fixtures and independent oracles for the integration suites.
#![allow(dead_code)]

use icin::lattice::{Pattern, PatternSet};
use icin::posterior::ObservedCounts;
use icin::{CategoricalSpace, FullDataDistribution, ObservedDistribution, SensitivityFunction};
use rand::Rng;

pub fn pat(s: &str) -> Pattern {
    s.parse().unwrap()
}

/// Two binary items, all four patterns; see the README for the worked values.
pub fn fixture_p2() -> ObservedDistribution {
    let space = CategoricalSpace::new(vec![2, 2]).unwrap();
    let patterns = PatternSet::new(2, ["00", "01", "10", "11"].map(pat)).unwrap();
    ObservedDistribution::from_masses(
        space,
        patterns,
        vec![vec![0.2, 0.1, 0.1, 0.2], vec![0.1, 0.1], vec![0.05, 0.05], vec![0.1]],
    )
    .unwrap()
}

/// Random strictly positive observed distribution with `p` drawn from `ps`,
/// each `K_j` from `ks`, and a random pattern set containing `0_p`.
pub fn random_observed(rng: &mut impl Rng, ps: &[usize], ks: &[usize]) -> ObservedDistribution {
    let p = ps[rng.random_range(0..ps.len())];
    let levels: Vec<usize> = (0..p).map(|_| ks[rng.random_range(0..ks.len())]).collect();
    let space = CategoricalSpace::new(levels.clone()).unwrap();
    let chosen: Vec<Pattern> = PatternSet::full(p)
        .unwrap()
        .iter()
        .filter(|m| m.is_complete() || rng.random_bool(0.6))
        .cloned()
        .collect();
    let patterns = PatternSet::new(p, chosen).unwrap();
    let weights = patterns
        .iter()
        .map(|m| {
            let size: usize = m.observed_items().map(|j| levels[j]).product();
            (0..size).map(|_| rng.random_range(0.05..1.0)).collect()
        })
        .collect();
    ObservedDistribution::from_weights(space, patterns, weights).unwrap()
}

/// Observed cells of `m` as partial cells, in the library's order.
pub fn observed_cells(space: &CategoricalSpace, m: &Pattern) -> Vec<Vec<Option<usize>>> {
    let mut cells: Vec<Vec<Option<usize>>> = vec![Vec::new()];
    for j in 0..space.item_count() {
        let mut next = Vec::new();
        for c in &cells {
            if m.is_missing(j) {
                let mut c = c.clone();
                c.push(None);
                next.push(c);
            } else {
                for l in 0..space.levels()[j] {
                    let mut c = c.clone();
                    c.push(Some(l));
                    next.push(c);
                }
            }
        }
        cells = next;
    }
    cells
}

pub fn all_cells(space: &CategoricalSpace) -> Vec<Vec<usize>> {
    observed_cells(space, &Pattern::complete(space.item_count()))
        .into_iter()
        .map(|c| c.into_iter().map(Option::unwrap).collect())
        .collect()
}

/// Largest `|Σ_{x_m} g(x, m) − f(x_m̄, m)|` over patterns and observed cells,
/// by brute-force summation over full cells.
pub fn saturation_error(f: &ObservedDistribution, g: &FullDataDistribution) -> f64 {
    let space = f.space();
    let mut worst = 0.0f64;
    for m in f.patterns().iter() {
        for partial in observed_cells(space, m) {
            let sum: f64 = all_cells(space)
                .iter()
                .filter(|c| partial.iter().zip(c.iter()).all(|(p, x)| p.is_none_or(|p| p == *x)))
                .map(|c| g.mass(c, m))
                .sum();
            worst = worst.max((sum - f.mass_at(m, &partial).unwrap()).abs());
        }
    }
    worst
}

/// Largest variation of a finite missingness logit as `x_j` varies, over
/// items, indicator configurations with both siblings realizable, and cells.
pub fn icin_error(g: &FullDataDistribution) -> f64 {
    let space = g.space();
    let p = space.item_count();
    let mut worst = 0.0f64;
    for j in 0..p {
        for rest in g.patterns().iter().filter(|m| !m.is_missing(j)) {
            let with = rest.sibling(j, true).unwrap();
            if !g.patterns().contains(&with) {
                continue;
            }
            for cell in all_cells(space).iter().filter(|c| c[j] == 0) {
                let base = g.missingness_logit(j, rest, cell).unwrap();
                for l in 1..space.levels()[j] {
                    let mut c = cell.clone();
                    c[j] = l;
                    let v = g.missingness_logit(j, rest, &c).unwrap();
                    worst = worst.max((v - base).abs());
                }
            }
        }
    }
    worst
}

/// The two-item closed forms: `g00 = f00`, `g01 = f00 f01 / f00(x1)`,
/// `g10 = f00 f10 / f00(x2)` and `g11 ∝ f00 f01 f10 / (f00(x1) f00(x2))`
/// normalized to `f(11)`. Indexed by pattern string and row-major cell.
pub fn closed_form_p2(f: &ObservedDistribution) -> Vec<(Pattern, Vec<f64>)> {
    let space = f.space();
    let (k1, k2) = (space.levels()[0], space.levels()[1]);
    let m00 = pat("00");
    let f00 = |a: usize, b: usize| f.mass(&m00, &[a, b]).unwrap();
    let row = |a: usize| (0..k2).map(|b| f00(a, b)).sum::<f64>();
    let col = |b: usize| (0..k1).map(|a| f00(a, b)).sum::<f64>();
    let f01 = |a: usize| f.mass_at(&pat("01"), &[Some(a), None]).unwrap();
    let f10 = |b: usize| f.mass_at(&pat("10"), &[None, Some(b)]).unwrap();
    let cells: Vec<(usize, usize)> = (0..k1).flat_map(|a| (0..k2).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for m in f.patterns().iter() {
        let v: Vec<f64> = match m.to_string().as_str() {
            "00" => cells.iter().map(|&(a, b)| f00(a, b)).collect(),
            "01" => cells.iter().map(|&(a, b)| f00(a, b) * f01(a) / row(a)).collect(),
            "10" => cells.iter().map(|&(a, b)| f00(a, b) * f10(b) / col(b)).collect(),
            _ => {
                let raw: Vec<f64> = cells
                    .iter()
                    .map(|&(a, b)| f00(a, b) * f01(a) / row(a) * f10(b) / col(b))
                    .collect();
                let z: f64 = raw.iter().sum();
                let total = f.pattern_probability(m);
                raw.iter().map(|v| v / z * total).collect()
            }
        };
        out.push((m.clone(), v));
    }
    out
}

/// Random additive sensitivity function with reference level 0 and offsets
/// in `[-3, 3]`.
pub fn random_xi(rng: &mut impl Rng, space: &CategoricalSpace) -> SensitivityFunction {
    let offsets = space
        .levels()
        .iter()
        .map(|&k| (0..k).map(|l| if l == 0 { 0.0 } else { rng.random_range(-3.0..3.0) }).collect())
        .collect();
    SensitivityFunction::new(vec![0; space.item_count()], offsets).unwrap()
}

/// Three binary items, every pattern realized: 27 observed cells.
pub fn counts_fixture() -> ObservedCounts {
    let space = CategoricalSpace::new(vec![2, 2, 2]).unwrap();
    let patterns = PatternSet::full(3).unwrap();
    let counts = patterns
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let size = 1usize << (3 - m.missing_count());
            (0..size).map(|c| ((i * 7 + c * 13) % 41 + 3) as u64 * if m.is_complete() { 10 } else { 1 }).collect()
        })
        .collect();
    ObservedCounts::new(space, patterns, counts).unwrap()
}
