//! Corner-point loglinear coefficients of a full-data distribution.
//!
//! Each `η_m(x_m̄)` is split by Möbius inversion into interactions among the
//! observed items `X_m̄` and the indicators `M_m` of the missing ones. The
//! first level of every item and `M_j = 0` are the references, so a term is
//! zero whenever one of its item coordinates sits at level 1 and only
//! non-reference levels are stored.

use std::collections::BTreeMap;

use serde::Serialize;

use super::full_data::FullDataDistribution;
use super::space::{CategoricalSpace, Layout};
use crate::error::{Error, Result};
use crate::lattice::Pattern;

pub const DEFAULT_MAX_ITEMS: usize = 6;

/// An interaction among items `x_items` (at `levels`) and indicators `m_items` (at 1).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TermKey {
    pub x_items: Vec<usize>,
    pub m_items: Vec<usize>,
    pub levels: Vec<usize>,
}

impl TermKey {
    /// Label such as `X1M2M3[2,1,1]`, with 1-based levels.
    pub fn label(&self) -> String {
        let mut name = String::new();
        let mut levels = Vec::new();
        for (j, l) in self.x_items.iter().zip(&self.levels) {
            name.push_str(&format!("X{}", j + 1));
            levels.push((l + 1).to_string());
        }
        for j in &self.m_items {
            name.push_str(&format!("M{}", j + 1));
            levels.push("1".to_string());
        }
        if name.is_empty() {
            name.push_str("const");
        }
        format!("{name}[{}]", levels.join(","))
    }

    /// True when the term pairs an item with its own indicator.
    pub fn is_self_interaction(&self) -> bool {
        self.x_items.iter().any(|j| self.m_items.contains(j))
    }

    fn active(&self, cell: &[usize], m: &Pattern) -> bool {
        self.m_items.iter().all(|&j| m.is_missing(j))
            && self.x_items.iter().zip(&self.levels).all(|(&j, &l)| cell[j] == l)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoglinearDecomposition {
    terms: BTreeMap<TermKey, f64>,
}

impl LoglinearDecomposition {
    pub fn terms(&self) -> &BTreeMap<TermKey, f64> {
        &self.terms
    }

    pub fn get(&self, key: &TermKey) -> Option<f64> {
        self.terms.get(key).copied()
    }

    /// `log g(x, m)` recovered from the coefficients.
    pub fn reconstruct(&self, cell: &[usize], m: &Pattern) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| k.active(cell, m))
            .map(|(_, v)| v)
            .sum()
    }

    pub fn has_self_interactions(&self) -> bool {
        self.terms.keys().any(TermKey::is_self_interaction)
    }
}

pub fn loglinear_decomposition(g: &FullDataDistribution) -> Result<LoglinearDecomposition> {
    loglinear_decomposition_with_cap(g, DEFAULT_MAX_ITEMS)
}

pub fn loglinear_decomposition_with_cap(
    g: &FullDataDistribution,
    max_items: usize,
) -> Result<LoglinearDecomposition> {
    let space = g.space();
    let p = space.item_count();
    if p > max_items {
        return Err(Error::UnsupportedSize(format!(
            "loglinear decomposition supports at most {max_items} items, got {p}"
        )));
    }
    let mut terms = BTreeMap::new();
    for m in g.patterns().iter() {
        let eta = g.eta().pattern_values(m).expect("member pattern");
        decompose_pattern(space, m, eta, &mut terms);
    }
    if let Some(xi) = g.sensitivity() {
        for j in 0..p {
            let base = xi.offset(j, 0);
            if base != 0.0 {
                let key = TermKey {
                    x_items: vec![],
                    m_items: vec![j],
                    levels: vec![],
                };
                *terms.entry(key).or_insert(0.0) += base;
            }
            for l in 1..space.levels()[j] {
                let v = xi.offset(j, l) - base;
                if v != 0.0 {
                    let key = TermKey {
                        x_items: vec![j],
                        m_items: vec![j],
                        levels: vec![l],
                    };
                    *terms.entry(key).or_insert(0.0) += v;
                }
            }
        }
    }
    Ok(LoglinearDecomposition { terms })
}

fn decompose_pattern(
    space: &CategoricalSpace,
    m: &Pattern,
    eta: &[f64],
    terms: &mut BTreeMap<TermKey, f64>,
) {
    let layout = Layout::new(space, m);
    let observed: Vec<usize> = m.observed_items().collect();
    let missing: Vec<usize> = m.missing_items().collect();
    let r = observed.len();
    let eval = |assign: &[(usize, usize)]| {
        let mut cell = vec![0; space.item_count()];
        for &(j, l) in assign {
            cell[j] = l;
        }
        eta[layout.index(&cell)]
    };
    for subset in 0u32..(1 << r) {
        let items: Vec<usize> = (0..r)
            .filter(|b| subset >> b & 1 == 1)
            .map(|b| observed[b])
            .collect();
        // every non-reference level assignment of the subset
        let mut levels = vec![1usize; items.len()];
        loop {
            let mut coef = 0.0;
            for sub in 0u32..(1 << items.len()) {
                let assign: Vec<(usize, usize)> = (0..items.len())
                    .filter(|b| sub >> b & 1 == 1)
                    .map(|b| (items[b], levels[b]))
                    .collect();
                let sign = if (items.len() - assign.len()) % 2 == 0 { 1.0 } else { -1.0 };
                coef += sign * eval(&assign);
            }
            terms.insert(
                TermKey {
                    x_items: items.clone(),
                    m_items: missing.clone(),
                    levels: levels.clone(),
                },
                coef,
            );
            // odometer over levels 1..K_j
            let mut b = 0;
            loop {
                if b == items.len() {
                    break;
                }
                levels[b] += 1;
                if levels[b] < space.levels()[items[b]] {
                    break;
                }
                levels[b] = 1;
                b += 1;
            }
            if b == items.len() {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::testing::random_observed;
    use crate::categorical::{build_full_data, ObservedDistribution};
    use crate::lattice::PatternSet;
    use rand::SeedableRng;

    fn pat(s: &str) -> Pattern {
        s.parse().unwrap()
    }

    fn three_item_g() -> FullDataDistribution {
        let space = CategoricalSpace::new(vec![2, 3, 2]).unwrap();
        let pats = PatternSet::full(3).unwrap();
        let mut i = 0.0;
        let weights = pats
            .iter()
            .map(|m| {
                let size: usize = m.observed_items().map(|j| space.levels()[j]).product();
                (0..size)
                    .map(|_| {
                        i += 1.0;
                        1.0 + (i * 0.37f64).sin().abs()
                    })
                    .collect()
            })
            .collect();
        build_full_data(&ObservedDistribution::from_weights(space, pats, weights).unwrap()).unwrap()
    }

    #[test]
    fn all_missing_pattern_has_single_coefficient() {
        let g = three_item_g();
        let d = loglinear_decomposition(&g).unwrap();
        let keys: Vec<_> = d.terms().keys().filter(|k| k.m_items == vec![0, 1, 2]).collect();
        assert_eq!(keys.len(), 1);
        assert!(keys[0].x_items.is_empty());
        assert_eq!(keys[0].label(), "M1M2M3[1,1,1]");
        let v = d.get(keys[0]).unwrap();
        assert_eq!(v, g.eta().get(&pat("111"), &[0, 0, 0]).unwrap());
    }

    #[test]
    fn pattern_011_splits_into_x1_interaction_and_indicator_term() {
        let g = three_item_g();
        let d = loglinear_decomposition(&g).unwrap();
        let keys: Vec<_> = d.terms().keys().filter(|k| k.m_items == vec![1, 2]).collect();
        // η^{M2M3}_{11} and η^{X1M2M3}_{x1 1 1} for the single non-reference level of X1
        assert_eq!(keys.len(), 2);
        let eta = |l| g.eta().get(&pat("011"), &[l, 0, 0]).unwrap();
        let base = keys.iter().find(|k| k.x_items.is_empty()).unwrap();
        let inter = keys.iter().find(|k| k.x_items == vec![0]).unwrap();
        assert_eq!(d.get(base).unwrap(), eta(0));
        assert!((d.get(inter).unwrap() - (eta(1) - eta(0))).abs() < 1e-14);
        assert_eq!(inter.label(), "X1M2M3[2,1,1]");
    }

    #[test]
    fn reconstruction_and_no_self_interactions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let f = random_observed(&mut rng, 4, 3);
            let g = build_full_data(&f).unwrap();
            let d = loglinear_decomposition(&g).unwrap();
            assert!(!d.has_self_interactions());
            for m in g.patterns().iter() {
                for cell in g.space().cells() {
                    let want = g.log_mass(&cell, m);
                    assert!((d.reconstruct(&cell, m) - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let g = three_item_g();
        assert!(matches!(
            loglinear_decomposition_with_cap(&g, 2),
            Err(Error::UnsupportedSize(_))
        ));
    }
}
