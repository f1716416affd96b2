//! Dirichlet-multinomial posterior over observed-data distributions and its
//! push-forward through the full-data construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::categorical::{
    construct, tabulate, CategoricalSpace, FullDataDistribution, Functional, MaskedRecord, ObservedDistribution,
};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Pattern, PatternSet};
use crate::sensitivity::{evaluate, SensitivityFunction};

/// Multinomial counts `n(x_m̄, m)` keyed like an [`ObservedDistribution`].
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedCounts {
    space: CategoricalSpace,
    patterns: PatternSet,
    counts: Vec<Vec<u64>>,
}

impl ObservedCounts {
    pub fn new(space: CategoricalSpace, patterns: PatternSet, counts: Vec<Vec<u64>>) -> Result<Self> {
        // reuse the shape checks of the distribution type
        let as_f64 = counts.iter().map(|v| v.iter().map(|&c| c as f64).collect()).collect();
        ObservedDistribution::unchecked(space.clone(), patterns.clone(), as_f64)?;
        if counts.iter().flatten().all(|&c| c == 0) {
            return Err(invalid("counts must have a positive total"));
        }
        Ok(ObservedCounts {
            space,
            patterns,
            counts,
        })
    }

    /// Tabulate masked records; the pattern set is the patterns seen plus `0_p`.
    pub fn from_records(space: &CategoricalSpace, records: &[MaskedRecord]) -> Result<Self> {
        let (patterns, counts) = tabulate(space, records)?;
        let counts = counts
            .into_iter()
            .map(|v| v.into_iter().map(|c| c as u64).collect())
            .collect();
        Self::new(space.clone(), patterns, counts)
    }

    pub fn space(&self) -> &CategoricalSpace {
        &self.space
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn pattern_counts(&self, m: &Pattern) -> Option<&[u64]> {
        self.patterns.position(m).map(|i| self.counts[i].as_slice())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Number of observed cells `C` across all patterns.
    pub fn cell_count(&self) -> usize {
        self.counts.iter().map(Vec::len).sum()
    }

    /// Empirical distribution `n / N`.
    pub fn to_observed(&self) -> Result<ObservedDistribution> {
        let w = self.counts.iter().map(|v| v.iter().map(|&c| c as f64).collect()).collect();
        ObservedDistribution::from_weights(self.space.clone(), self.patterns.clone(), w)
    }
}

/// Dirichlet concentration, symmetric or per observed cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DirichletSpec {
    Symmetric(f64),
    PerCell(Vec<Vec<f64>>),
}

impl DirichletSpec {
    pub fn symmetric(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("Dirichlet concentration must be positive, got {alpha}")));
        }
        Ok(DirichletSpec::Symmetric(alpha))
    }

    /// Symmetric concentration `1 / C` over the `C` observed cells.
    pub fn default_for(counts: &ObservedCounts) -> Self {
        DirichletSpec::Symmetric(1.0 / counts.cell_count() as f64)
    }

    fn concentrations(&self, counts: &ObservedCounts) -> Result<Vec<Vec<f64>>> {
        match self {
            DirichletSpec::Symmetric(a) => {
                Self::symmetric(*a)?;
                Ok(counts.counts.iter().map(|v| vec![*a; v.len()]).collect())
            }
            DirichletSpec::PerCell(a) => {
                let shape_ok = a.len() == counts.counts.len()
                    && a.iter().zip(&counts.counts).all(|(x, y)| x.len() == y.len());
                if !shape_ok {
                    return Err(invalid("per-cell concentrations do not match the counts"));
                }
                if let Some(bad) = a.iter().flatten().find(|x| !(**x > 0.0 && x.is_finite())) {
                    return Err(invalid(format!("Dirichlet concentration must be positive, got {bad}")));
                }
                Ok(a.clone())
            }
        }
    }
}

/// Independent draws of the observed-data distribution.
#[derive(Clone, Debug)]
pub struct PosteriorDraws {
    draws: Vec<ObservedDistribution>,
    seed: u64,
}

impl PosteriorDraws {
    pub fn draws(&self) -> &[ObservedDistribution] {
        &self.draws
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Draw `ln G` for `G ~ Gamma(shape, 1)`.
///
/// Shapes below 1 use `G = G' U^{1/shape}` with `G' ~ Gamma(shape + 1)`,
/// kept on the log scale since `U^{1/shape}` underflows for small shapes.
pub fn log_gamma_variate(rng: &mut impl Rng, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        // open interval (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

/// Draw one Dirichlet vector with parameters `a`, normalizing on the log
/// scale and flooring at the smallest positive normal double.
pub fn dirichlet_draw(rng: &mut impl Rng, a: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = a.iter().map(|&s| log_gamma_variate(rng, s)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v = (*v / total).max(f64::MIN_POSITIVE);
    }
    w
}

/// RNG for draw `index` under `seed`; each draw has its own ChaCha stream.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_posterior(
    counts: &ObservedCounts,
    prior: &DirichletSpec,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    if n_draws == 0 {
        return Err(invalid("at least one posterior draw is required"));
    }
    let alpha = prior.concentrations(counts)?;
    let params: Vec<f64> = counts
        .counts
        .iter()
        .flatten()
        .zip(alpha.iter().flatten())
        .map(|(&n, &a)| n as f64 + a)
        .collect();
    let sizes: Vec<usize> = counts.counts.iter().map(Vec::len).collect();
    let draws = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(seed, i as u64);
            let flat = dirichlet_draw(&mut rng, &params);
            let mut it = flat.into_iter();
            let masses = sizes.iter().map(|&s| it.by_ref().take(s).collect()).collect();
            ObservedDistribution::from_masses_normalizing(
                counts.space.clone(),
                counts.patterns.clone(),
                masses,
                1e-9,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDraws { draws, seed })
}

/// Per-draw values of named functionals: `rows[draw][functional]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionalTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FunctionalTable {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Build `g` (or `g_ξ`) for every draw and evaluate the functionals.
pub fn push_forward(
    draws: &PosteriorDraws,
    xi: Option<&SensitivityFunction>,
    functionals: &[Functional],
) -> Result<FunctionalTable> {
    let names = functionals.iter().map(|f| f.name.clone()).collect();
    let rows = push_forward_with(draws, |draw| {
        let g = construct(draw, xi)?;
        Ok(evaluate(&g, functionals))
    })?;
    Ok(FunctionalTable { names, rows })
}

/// Apply `f` to every draw in parallel, in draw order; the first error aborts.
pub fn push_forward_with<T: Send>(
    draws: &PosteriorDraws,
    f: impl Fn(&ObservedDistribution) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    draws.draws.par_iter().map(&f).collect()
}

/// Map every draw to its full-data distribution.
pub fn full_data_draws(draws: &PosteriorDraws, xi: Option<&SensitivityFunction>) -> Result<Vec<FullDataDistribution>> {
    push_forward_with(draws, |d| construct(d, xi))
}

pub const DEFAULT_LEVELS: [f64; 3] = [0.025, 0.5, 0.975];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    /// `(level, quantile)` pairs.
    pub quantiles: Vec<(f64, f64)>,
}

/// Type-7 quantile of unsorted data.
pub fn quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(invalid(format!("quantile level {level} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    if v.iter().any(|x| x.is_nan()) {
        return Err(invalid("quantile of a sample containing NaN"));
    }
    v.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&v, level))
}

fn sorted_quantile(v: &[f64], level: f64) -> f64 {
    let h = (v.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn summarize(table: &FunctionalTable, levels: &[f64]) -> Result<Vec<SummaryRow>> {
    if table.rows.is_empty() || table.names.is_empty() {
        return Err(invalid("cannot summarize an empty table"));
    }
    (0..table.names.len())
        .map(|j| {
            let col = table.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let quantiles = levels
                .iter()
                .map(|&q| quantile(&col, q).map(|v| (q, v)))
                .collect::<Result<_>>()?;
            Ok(SummaryRow {
                name: table.names[j].clone(),
                mean,
                quantiles,
            })
        })
        .collect::<std::result::Result<_, Error>>()
}
