//! The recursive construction of the full-data distribution `g(x, m)`.
//!
//! For every pattern `m` in traversal order
//!
//! ```text
//! η_m(x_m̄) = log f(x_m̄, m) − log Σ_{x_m} exp{ Σ_{m'≺m, m'∈M} η_{m'}(x_m̄') + ξ(x, m) }
//! g(x, m)  = exp{ Σ_{m'≼m, m'∈M} η_{m'}(x_m̄') + ξ(x, m) }
//! ```
//!
//! with `ξ ≡ 0` for the plain model. Everything is carried in the log domain
//! and the inner marginalization is a grouped log-sum-exp.

use super::observed::ObservedDistribution;
use super::space::{CategoricalSpace, Layout, MAX_TABLE_ENTRIES};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Pattern, PatternSet};
use crate::sensitivity::SensitivityFunction;

/// The functions `η_m(x_m̄)` for every pattern in `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaTable {
    patterns: PatternSet,
    layouts: Vec<Layout>,
    values: Vec<Vec<f64>>,
}

impl EtaTable {
    /// `η_m` at the observed part of `cell`; `None` if `m ∉ M`.
    pub fn get(&self, m: &Pattern, cell: &[usize]) -> Option<f64> {
        let pos = self.patterns.position(m)?;
        Some(self.values[pos][self.layouts[pos].index(cell)])
    }

    pub fn pattern_values(&self, m: &Pattern) -> Option<&[f64]> {
        self.patterns.position(m).map(|i| self.values[i].as_slice())
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }
}

/// A full-data distribution over `X × M` built from an observed distribution.
#[derive(Clone, Debug)]
pub struct FullDataDistribution {
    space: CategoricalSpace,
    patterns: PatternSet,
    eta: EtaTable,
    /// `log g(x, m)` per pattern (traversal order), per full cell.
    log_mass: Vec<Vec<f64>>,
    xi: Option<SensitivityFunction>,
}

/// Compute `η_m` for every pattern.
pub fn build_eta(observed: &ObservedDistribution) -> Result<EtaTable> {
    Ok(construct(observed, None)?.eta)
}

/// Build the nonparametric saturated full-data distribution.
pub fn build_full_data(observed: &ObservedDistribution) -> Result<FullDataDistribution> {
    construct(observed, None)
}

pub(crate) fn check_positive(observed: &ObservedDistribution) -> Result<()> {
    for (layout, masses) in observed.layouts().iter().zip(observed.masses()) {
        if let Some(i) = masses.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::PositivityViolation {
                pattern: layout.pattern().to_string(),
                cell: observed.space().format_cell(&layout.cell_at(observed.space(), i)),
                mass: masses[i],
            });
        }
    }
    Ok(())
}

pub(crate) fn construct(
    observed: &ObservedDistribution,
    xi: Option<&SensitivityFunction>,
) -> Result<FullDataDistribution> {
    let space = observed.space();
    let patterns = observed.patterns();
    let n = space.cell_count();
    if n.saturating_mul(patterns.len()) > MAX_TABLE_ENTRIES {
        return Err(Error::UnsupportedSize(format!(
            "{n} cells x {} patterns exceeds {MAX_TABLE_ENTRIES} entries",
            patterns.len()
        )));
    }
    if let Some(xi) = xi {
        xi.check_space(space)?;
    }
    check_positive(observed)?;

    let mut eta_values: Vec<Vec<f64>> = Vec::with_capacity(patterns.len());
    // η_m expanded to full cells, reused by every successor of m.
    let mut eta_full: Vec<Vec<f64>> = Vec::with_capacity(patterns.len());
    let mut log_mass: Vec<Vec<f64>> = Vec::with_capacity(patterns.len());

    for (pos, m) in patterns.iter().enumerate() {
        let layout = &observed.layouts()[pos];
        let to_obs = layout.full_to_observed(space);

        let mut base = vec![0.0; n];
        for q in patterns.strict_predecessor_positions(m) {
            for (b, e) in base.iter_mut().zip(&eta_full[q]) {
                *b += e;
            }
        }
        if let Some(xi) = xi {
            xi.add_offsets(space, m, &mut base);
        }

        let k = layout.size();
        let mut max = vec![f64::NEG_INFINITY; k];
        for (x, &o) in to_obs.iter().enumerate() {
            max[o] = max[o].max(base[x]);
        }
        let mut acc = vec![0.0; k];
        for (x, &o) in to_obs.iter().enumerate() {
            acc[o] += (base[x] - max[o]).exp();
        }
        let f = &observed.masses()[pos];
        let eta: Vec<f64> = (0..k)
            .map(|o| f[o].ln() - (max[o] + acc[o].ln()))
            .collect();
        if let Some(o) = eta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(format!(
                "non-finite eta for pattern {m} at {}",
                space.format_cell(&layout.cell_at(space, o))
            )));
        }

        let expanded: Vec<f64> = to_obs.iter().map(|&o| eta[o]).collect();
        let logs: Vec<f64> = base.iter().zip(&expanded).map(|(b, e)| b + e).collect();
        eta_values.push(eta);
        eta_full.push(expanded);
        log_mass.push(logs);
    }

    Ok(FullDataDistribution {
        space: space.clone(),
        patterns: patterns.clone(),
        eta: EtaTable {
            patterns: patterns.clone(),
            layouts: observed.layouts().to_vec(),
            values: eta_values,
        },
        log_mass,
        xi: xi.cloned(),
    })
}

impl FullDataDistribution {
    pub fn space(&self) -> &CategoricalSpace {
        &self.space
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn eta(&self) -> &EtaTable {
        &self.eta
    }

    /// The sensitivity function the distribution was built with, if any.
    pub fn sensitivity(&self) -> Option<&SensitivityFunction> {
        self.xi.as_ref()
    }

    /// `log g(x, m)`; `-inf` when `m ∉ M`.
    pub fn log_mass(&self, cell: &[usize], m: &Pattern) -> f64 {
        match self.patterns.position(m) {
            Some(pos) => self.log_mass[pos][self.space.cell_index(cell)],
            None => f64::NEG_INFINITY,
        }
    }

    /// `g(x, m)`; zero when `m ∉ M`.
    pub fn mass(&self, cell: &[usize], m: &Pattern) -> f64 {
        self.log_mass(cell, m).exp()
    }

    /// `log g(·, m)` in full-cell index order.
    pub fn pattern_log_masses(&self, m: &Pattern) -> Option<&[f64]> {
        self.patterns.position(m).map(|i| self.log_mass[i].as_slice())
    }

    pub fn total_mass(&self) -> f64 {
        self.log_mass.iter().flatten().map(|v| v.exp()).sum()
    }

    /// Marginalize over missing coordinates: `Σ_{x_m} g(x, m)` per observed cell.
    pub fn observed_margin(&self, m: &Pattern) -> Option<Vec<f64>> {
        let pos = self.patterns.position(m)?;
        let layout = &self.eta.layouts[pos];
        let mut out = vec![0.0; layout.size()];
        for (x, o) in layout.full_to_observed(&self.space).into_iter().enumerate() {
            out[o] += self.log_mass[pos][x].exp();
        }
        Some(out)
    }

    /// The observed-data distribution implied by `g`.
    pub fn observed_distribution(&self) -> Result<ObservedDistribution> {
        let masses = self
            .patterns
            .iter()
            .map(|m| self.observed_margin(m).expect("member pattern"))
            .collect();
        ObservedDistribution::from_masses_normalizing(
            self.space.clone(),
            self.patterns.clone(),
            masses,
            1e-9,
        )
    }

    /// `logit pr_g(M_j = 1 | M_-j = m_-j, X = x)`; the `item` bit of `rest`
    /// is ignored. Returns `±inf` when exactly one sibling is unrealizable.
    pub fn missingness_logit(&self, item: usize, rest: &Pattern, cell: &[usize]) -> Result<f64> {
        self.space.check_pattern(rest)?;
        self.space.check_cell(cell)?;
        let with_item = rest.sibling(item, true)?;
        let without_item = rest.sibling(item, false)?;
        match (self.patterns.contains(&with_item), self.patterns.contains(&without_item)) {
            (false, false) => Err(Error::UndefinedConditional {
                with_item: with_item.to_string(),
                without_item: without_item.to_string(),
            }),
            (false, true) => Ok(f64::NEG_INFINITY),
            (true, false) => Ok(f64::INFINITY),
            (true, true) => {
                Ok(self.log_mass(cell, &with_item) - self.log_mass(cell, &without_item))
            }
        }
    }

    /// `pr_g(M = m | X = x)`.
    pub fn pattern_given_cell(&self, m: &Pattern, cell: &[usize]) -> f64 {
        let x = self.space.cell_index(cell);
        let total: f64 = self.log_mass.iter().map(|v| v[x].exp()).sum();
        self.mass(cell, m) / total
    }

    /// `pr(X = x) = Σ_m g(x, m)` in full-cell index order.
    pub fn item_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.space.cell_count()];
        for slice in &self.log_mass {
            for (o, v) in out.iter_mut().zip(slice) {
                *o += v.exp();
            }
        }
        out
    }

    /// `Σ_{x ∈ event} Σ_m g(x, m)`.
    pub fn event_probability(&self, event: impl Fn(&[usize]) -> bool) -> f64 {
        self.item_marginal()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| event(&self.space.cell_at(*i)))
            .map(|(_, v)| v)
            .sum()
    }

    /// Conditional law of the items given `M = m`, in full-cell order.
    pub fn conditional_on_pattern(&self, m: &Pattern) -> Result<Vec<f64>> {
        let logs = self
            .pattern_log_masses(m)
            .ok_or_else(|| invalid(format!("pattern {m} is not realizable")))?;
        let masses: Vec<f64> = logs.iter().map(|v| v.exp()).collect();
        let total: f64 = masses.iter().sum();
        Ok(masses.into_iter().map(|v| v / total).collect())
    }
}
