use super::space::{CategoricalSpace, Layout};
use crate::error::{invalid, Result};
use crate::lattice::{Pattern, PatternSet};

/// Tolerance on the total mass of an in-memory observed distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// The observed-data distribution `f(x_m̄, m)` over all patterns in `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedDistribution {
    space: CategoricalSpace,
    patterns: PatternSet,
    layouts: Vec<Layout>,
    /// Per pattern (traversal order), per observed cell.
    masses: Vec<Vec<f64>>,
}

impl ObservedDistribution {
    /// Build from per-pattern mass vectors ordered like
    /// [`ObservedDistribution::observed_cells`].
    pub fn from_masses(
        space: CategoricalSpace,
        patterns: PatternSet,
        masses: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let dist = Self::unchecked(space, patterns, masses)?;
        let total = dist.total();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(format!("observed masses sum to {total}, expected 1")));
        }
        Ok(dist)
    }

    /// Build from masses whose total is within `tol` of 1, rescaling when the
    /// total misses 1 by more than [`MASS_TOLERANCE`].
    pub fn from_masses_normalizing(
        space: CategoricalSpace,
        patterns: PatternSet,
        mut masses: Vec<Vec<f64>>,
        tol: f64,
    ) -> Result<Self> {
        let total: f64 = masses.iter().flatten().sum();
        if !total.is_finite() || (total - 1.0).abs() > tol {
            return Err(invalid(format!(
                "observed masses sum to {total}, expected 1 within {tol}"
            )));
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            masses.iter_mut().flatten().for_each(|v| *v /= total);
        }
        Self::from_masses(space, patterns, masses)
    }

    /// Build by evaluating `f` at every observed cell of every pattern.
    pub fn from_fn(
        space: CategoricalSpace,
        patterns: PatternSet,
        mut f: impl FnMut(&Pattern, &[Option<usize>]) -> f64,
    ) -> Result<Self> {
        let masses = patterns
            .iter()
            .map(|m| {
                let layout = Layout::new(&space, m);
                (0..layout.size())
                    .map(|i| f(m, &layout.cell_at(&space, i)))
                    .collect()
            })
            .collect();
        Self::from_masses(space, patterns, masses)
    }

    /// Normalize nonnegative weights (e.g. counts) into a distribution.
    pub fn from_weights(
        space: CategoricalSpace,
        patterns: PatternSet,
        mut weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let total: f64 = weights.iter().flatten().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(invalid("weights must have a positive finite total"));
        }
        weights.iter_mut().flatten().for_each(|v| *v /= total);
        Self::from_masses(space, patterns, weights)
    }

    pub(crate) fn unchecked(
        space: CategoricalSpace,
        patterns: PatternSet,
        masses: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if patterns.item_count() != space.item_count() {
            return Err(invalid(format!(
                "patterns have {} items but the space has {}",
                patterns.item_count(),
                space.item_count()
            )));
        }
        if masses.len() != patterns.len() {
            return Err(invalid(format!(
                "{} mass vectors for {} patterns",
                masses.len(),
                patterns.len()
            )));
        }
        let layouts: Vec<Layout> = patterns.iter().map(|m| Layout::new(&space, m)).collect();
        for (layout, v) in layouts.iter().zip(&masses) {
            if v.len() != layout.size() {
                return Err(invalid(format!(
                    "pattern {} needs {} observed cells, got {}",
                    layout.pattern(),
                    layout.size(),
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(invalid(format!(
                    "pattern {} has invalid mass {bad}",
                    layout.pattern()
                )));
            }
        }
        Ok(ObservedDistribution {
            space,
            patterns,
            layouts,
            masses,
        })
    }

    pub fn space(&self) -> &CategoricalSpace {
        &self.space
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().flatten().sum()
    }

    /// Mass of pattern `m` at the observed part of the full cell `cell`.
    pub fn mass(&self, m: &Pattern, cell: &[usize]) -> Option<f64> {
        let pos = self.patterns.position(m)?;
        Some(self.masses[pos][self.layouts[pos].index(cell)])
    }

    /// Mass at an observed cell written with `None` at missing coordinates.
    pub fn mass_at(&self, m: &Pattern, cell: &[Option<usize>]) -> Result<f64> {
        let pos = self
            .patterns
            .position(m)
            .ok_or_else(|| invalid(format!("pattern {m} is not in the pattern set")))?;
        Ok(self.masses[pos][self.layouts[pos].index_partial(cell)?])
    }

    /// Mass vector of pattern `m` in observed-cell order.
    pub fn pattern_masses(&self, m: &Pattern) -> Option<&[f64]> {
        self.patterns.position(m).map(|i| self.masses[i].as_slice())
    }

    /// Total mass `pr(M = m)`.
    pub fn pattern_probability(&self, m: &Pattern) -> f64 {
        self.pattern_masses(m).map_or(0.0, |v| v.iter().sum())
    }

    /// Observed cells of pattern `m` with their masses.
    pub fn observed_cells(&self, m: &Pattern) -> Vec<(Vec<Option<usize>>, f64)> {
        let Some(pos) = self.patterns.position(m) else {
            return Vec::new();
        };
        self.masses[pos]
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.layouts[pos].cell_at(&self.space, i), v))
            .collect()
    }

    pub fn observed_cell_count(&self) -> usize {
        self.layouts.iter().map(Layout::size).sum()
    }

    pub(crate) fn layouts(&self) -> &[Layout] {
        &self.layouts
    }

    pub(crate) fn masses(&self) -> &[Vec<f64>] {
        &self.masses
    }
}
