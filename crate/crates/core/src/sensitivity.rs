//! Departures from itemwise conditional independence.
//!
//! An additive sensitivity function `ξ(x, m) = Σ_j ξ_j(x_j, m_j)` with
//! `ξ_j(x_j, 0) = 0` and `ξ_j(x*_j, 1) = 0` enters the exponent of every
//! `g(x, m)`. The observed-data distribution is unchanged, while
//! `ξ_j(x_j, 1)` becomes the conditional log odds ratio of nonresponse on
//! item `j` for `X_j = x_j` against the reference level `x*_j`.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::categorical::{construct, CategoricalSpace, Event, FullDataDistribution, Functional, ObservedDistribution};
use crate::error::{invalid, Error, Result};
use crate::lattice::Pattern;

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityFunction {
    reference: Vec<usize>,
    /// `ξ_j(l, 1)` per item and level.
    offsets: Vec<Vec<f64>>,
}

impl SensitivityFunction {
    /// `ξ ≡ 0` with the first level of every item as reference.
    pub fn zero(space: &CategoricalSpace) -> Self {
        SensitivityFunction {
            reference: vec![0; space.item_count()],
            offsets: space.levels().iter().map(|&k| vec![0.0; k]).collect(),
        }
    }

    pub fn new(reference: Vec<usize>, offsets: Vec<Vec<f64>>) -> Result<Self> {
        if reference.len() != offsets.len() {
            return Err(invalid("reference point and offsets cover different item counts"));
        }
        for (j, (&r, row)) in reference.iter().zip(&offsets).enumerate() {
            if r >= row.len() {
                return Err(invalid(format!("reference level of item {} out of range", j + 1)));
            }
            if row[r] != 0.0 {
                return Err(invalid(format!(
                    "offset at the reference level of item {} must be 0, got {}",
                    j + 1,
                    row[r]
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(invalid(format!("non-finite offset {v} for item {}", j + 1)));
            }
        }
        Ok(SensitivityFunction { reference, offsets })
    }

    /// Zero offsets except `ξ_item(level, 1) = value`.
    pub fn single(space: &CategoricalSpace, reference: Vec<usize>, item: usize, level: usize, value: f64) -> Result<Self> {
        Self::from_assignments(space, reference, &[(item, level, value)])
    }

    /// Zero offsets except the listed `(item, level, value)` entries.
    pub fn from_assignments(
        space: &CategoricalSpace,
        reference: Vec<usize>,
        assignments: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut offsets: Vec<Vec<f64>> = space.levels().iter().map(|&k| vec![0.0; k]).collect();
        for &(j, l, v) in assignments {
            let slot = offsets
                .get_mut(j)
                .and_then(|row| row.get_mut(l))
                .ok_or_else(|| invalid(format!("offset target item {} level {} out of range", j + 1, l + 1)))?;
            *slot = v;
        }
        Self::new(reference, offsets)
    }

    pub fn reference(&self) -> &[usize] {
        &self.reference
    }

    /// `ξ_item(level, 1)`.
    pub fn offset(&self, item: usize, level: usize) -> f64 {
        self.offsets[item][level]
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    pub fn is_zero(&self) -> bool {
        self.offsets.iter().flatten().all(|&v| v == 0.0)
    }

    /// `ξ(x, m) = Σ_{j: m_j = 1} ξ_j(x_j, 1)`.
    pub fn value(&self, cell: &[usize], m: &Pattern) -> f64 {
        m.missing_items().map(|j| self.offsets[j][cell[j]]).sum()
    }

    /// The log odds ratio of `M_j` between `X_j = x_j` and `X_j = z`, which
    /// for the additive family is `ξ_j(x_j, 1) − ξ_j(z, 1)`.
    pub fn log_odds_ratio(&self, item: usize, cell: &[usize], z: usize) -> f64 {
        self.offsets[item][cell[item]] - self.offsets[item][z]
    }

    pub(crate) fn check_space(&self, space: &CategoricalSpace) -> Result<()> {
        let shape_ok = self.offsets.len() == space.item_count()
            && self.offsets.iter().zip(space.levels()).all(|(row, &k)| row.len() == k);
        if shape_ok {
            Ok(())
        } else {
            Err(invalid("sensitivity function does not match the categorical space"))
        }
    }

    pub(crate) fn add_offsets(&self, space: &CategoricalSpace, m: &Pattern, base: &mut [f64]) {
        let missing: Vec<usize> = m.missing_items().collect();
        if missing.is_empty() {
            return;
        }
        for (i, b) in base.iter_mut().enumerate() {
            let cell = space.cell_at(i);
            *b += missing.iter().map(|&j| self.offsets[j][cell[j]]).sum::<f64>();
        }
    }
}

/// Build `g_ξ`.
pub fn build_full_data_xi(
    observed: &ObservedDistribution,
    xi: &SensitivityFunction,
) -> Result<FullDataDistribution> {
    construct(observed, Some(xi))
}

/// Conditional log odds ratio of `M_item` between `x` and `x` with item
/// `item` set to `z`, at the indicator configuration `rest` (its `item` bit
/// is ignored), computed from the four `g` masses.
pub fn conditional_log_odds_ratio(
    g: &FullDataDistribution,
    item: usize,
    rest: &Pattern,
    cell: &[usize],
    z: usize,
) -> Result<f64> {
    g.space().check_cell(cell)?;
    if z >= g.space().levels()[item] {
        return Err(invalid(format!("level {} out of range for item {}", z + 1, item + 1)));
    }
    let with_item = rest.sibling(item, true)?;
    let without_item = rest.sibling(item, false)?;
    if !g.patterns().contains(&with_item) || !g.patterns().contains(&without_item) {
        return Err(Error::UndefinedConditional {
            with_item: with_item.to_string(),
            without_item: without_item.to_string(),
        });
    }
    let mut shifted = cell.to_vec();
    shifted[item] = z;
    Ok(g.log_mass(cell, &with_item) - g.log_mass(cell, &without_item)
        - g.log_mass(&shifted, &with_item)
        + g.log_mass(&shifted, &without_item))
}

/// One coordinate of a cross-product grid: offsets for `ξ_item(level, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub item: usize,
    pub level: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub label: String,
    /// Value taken on each axis (empty for hand-built grids).
    pub coords: Vec<f64>,
    pub xi: SensitivityFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityGrid {
    axes: Vec<GridAxis>,
    points: Vec<GridPoint>,
}

impl SensitivityGrid {
    pub fn new(points: Vec<(String, SensitivityFunction)>) -> Result<Self> {
        let points = points
            .into_iter()
            .map(|(label, xi)| GridPoint {
                label,
                coords: Vec::new(),
                xi,
            })
            .collect();
        Self::validated(Vec::new(), points)
    }

    /// Cross product of the axes; the first axis varies slowest.
    pub fn cross_product(space: &CategoricalSpace, reference: Vec<usize>, axes: Vec<GridAxis>) -> Result<Self> {
        if axes.iter().any(|a| a.values.is_empty()) {
            return Err(invalid("grid axes need at least one value"));
        }
        let mut points = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let coords: Vec<f64> = axes.iter().zip(&idx).map(|(a, &i)| a.values[i]).collect();
            let assignments: Vec<(usize, usize, f64)> =
                axes.iter().zip(&coords).map(|(a, &v)| (a.item, a.level, v)).collect();
            let xi = SensitivityFunction::from_assignments(space, reference.clone(), &assignments)?;
            let label = axes
                .iter()
                .zip(&coords)
                .map(|(a, v)| {
                    format!("{}:{}={v}", space.names()[a.item], space.labels()[a.item][a.level])
                })
                .collect::<Vec<_>>()
                .join(";");
            points.push(GridPoint { label, coords, xi });
            let mut d = axes.len();
            loop {
                if d == 0 {
                    return Self::validated(axes, points);
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].values.len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    fn validated(axes: Vec<GridAxis>, points: Vec<GridPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("sensitivity grid is empty"));
        }
        let mut seen = HashSet::new();
        if let Some(p) = points.iter().find(|p| !seen.insert(p.label.clone())) {
            return Err(invalid(format!("duplicate grid label {:?}", p.label)));
        }
        Ok(SensitivityGrid { axes, points })
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Functional values at one grid point, or the error that stopped it.
#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub label: String,
    pub coords: Vec<f64>,
    pub values: std::result::Result<Vec<f64>, String>,
}

/// Evaluate each functional under `g_ξ` at every grid point, in grid order.
pub fn run_grid(observed: &ObservedDistribution, grid: &SensitivityGrid, functionals: &[Functional]) -> Vec<GridRow> {
    grid.points
        .par_iter()
        .map(|point| GridRow {
            label: point.label.clone(),
            coords: point.coords.clone(),
            values: build_full_data_xi(observed, &point.xi)
                .map(|g| evaluate(&g, functionals))
                .map_err(|e| e.to_string()),
        })
        .collect()
}

pub(crate) fn evaluate(g: &FullDataDistribution, functionals: &[Functional]) -> Vec<f64> {
    let marginal = g.item_marginal();
    let space = g.space();
    functionals
        .iter()
        .map(|f| event_mass(space, &marginal, &f.event))
        .collect()
}

pub(crate) fn event_mass(space: &CategoricalSpace, marginal: &[f64], event: &Event) -> f64 {
    marginal
        .iter()
        .enumerate()
        .filter(|(i, _)| event.contains(&space.cell_at(*i)))
        .map(|(_, v)| v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::testing::{fixture_p2, random_observed};
    use crate::categorical::{build_full_data, loglinear_decomposition, TermKey};
    use crate::lattice::PatternSet;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pat(s: &str) -> Pattern {
        s.parse().unwrap()
    }

    fn random_xi(rng: &mut impl Rng, space: &CategoricalSpace) -> SensitivityFunction {
        let reference: Vec<usize> = space.levels().iter().map(|&k| rng.random_range(0..k)).collect();
        let offsets = space
            .levels()
            .iter()
            .zip(&reference)
            .map(|(&k, &r)| (0..k).map(|l| if l == r { 0.0 } else { rng.random_range(-5.0..5.0) }).collect())
            .collect();
        SensitivityFunction::new(reference, offsets).unwrap()
    }

    #[test]
    fn validation() {
        assert!(SensitivityFunction::new(vec![0], vec![vec![1.0, 0.0]]).is_err());
        assert!(SensitivityFunction::new(vec![1], vec![vec![1.0, 0.0]]).is_ok());
        assert!(SensitivityFunction::new(vec![0], vec![vec![0.0, f64::NAN]]).is_err());
        assert!(SensitivityFunction::new(vec![2], vec![vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn zero_xi_reproduces_plain_model() {
        let f = fixture_p2();
        let g = build_full_data(&f).unwrap();
        let gx = build_full_data_xi(&f, &SensitivityFunction::zero(f.space())).unwrap();
        for m in g.patterns().iter() {
            for cell in f.space().cells() {
                assert!((g.mass(&cell, m) - gx.mass(&cell, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odds_ratio_equals_offset() {
        let f = fixture_p2();
        let c = 1.3;
        let xi = SensitivityFunction::single(f.space(), vec![0, 0], 0, 1, c).unwrap();
        let g = build_full_data_xi(&f, &xi).unwrap();
        for x2 in 0..2 {
            for rest in ["00", "01"] {
                let v = conditional_log_odds_ratio(&g, 0, &pat(rest), &[1, x2], 0).unwrap();
                assert!((v - c).abs() < 1e-10);
            }
        }
        let e = SensitivityFunction::single(f.space(), vec![0, 0], 1, 1, 1.0).unwrap();
        assert!((e.log_odds_ratio(1, &[0, 1], 0).exp() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn loglinear_picks_up_self_interaction() {
        let space = CategoricalSpace::new(vec![2, 2, 2]).unwrap();
        let pats = PatternSet::full(3).unwrap();
        let f = ObservedDistribution::from_fn(space.clone(), pats, |m, _| {
            let obs = 3 - m.missing_count();
            1.0 / (8.0 * (1u32 << obs) as f64)
        })
        .unwrap();
        let xi = SensitivityFunction::from_assignments(&space, vec![0, 0, 0], &[(0, 1, -5.0), (2, 1, 1.0)]).unwrap();
        let g = build_full_data_xi(&f, &xi).unwrap();
        let d = loglinear_decomposition(&g).unwrap();
        let key = |j| TermKey { x_items: vec![j], m_items: vec![j], levels: vec![1] };
        assert_eq!(d.get(&key(0)), Some(-5.0));
        assert_eq!(d.get(&key(2)), Some(1.0));
        assert_eq!(d.get(&key(1)), None);
        for m in g.patterns().iter() {
            for cell in space.cells() {
                assert!((d.reconstruct(&cell, m) - g.log_mass(&cell, m)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn extrapolation_moves_with_xi() {
        let f = fixture_p2();
        let a = build_full_data_xi(&f, &SensitivityFunction::zero(f.space())).unwrap();
        let xi = SensitivityFunction::single(f.space(), vec![0, 0], 1, 1, 2.0).unwrap();
        let b = build_full_data_xi(&f, &xi).unwrap();
        let ca = a.conditional_on_pattern(&pat("01")).unwrap();
        let cb = b.conditional_on_pattern(&pat("01")).unwrap();
        let diff = ca.iter().zip(&cb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff > 0.01);
    }

    #[test]
    fn grid_cross_product_and_run() {
        let space = CategoricalSpace::new(vec![2, 2, 2]).unwrap();
        let axes = vec![
            GridAxis { item: 0, level: 1, values: vec![-5.0, -1.0, 0.0, 1.0, 5.0] },
            GridAxis { item: 2, level: 1, values: vec![-1.0, 0.0, 1.0] },
        ];
        let grid = SensitivityGrid::cross_product(&space, vec![0, 0, 0], axes).unwrap();
        assert_eq!(grid.len(), 15);
        assert_eq!(grid.points()[0].coords, vec![-5.0, -1.0]);
        assert_eq!(grid.points()[1].coords, vec![-5.0, 0.0]);
        assert_eq!(grid.points()[0].label, "x1:2=-5;x3:2=-1");

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f = loop {
            let f = random_observed(&mut rng, 3, 2);
            if f.space().levels() == [2, 2, 2] && f.patterns().len() == 8 {
                break f;
            }
        };
        let functionals = vec![
            Functional::new("all", Event::always()),
            Functional::new("x1_yes", Event::new(vec![(0, 0)])),
        ];
        let rows = run_grid(&f, &grid, &functionals);
        assert_eq!(rows.len(), 15);
        for r in &rows {
            let v = r.values.as_ref().unwrap();
            assert!((v[0] - 1.0).abs() < 1e-12);
        }
        // increasing ξ on X1 = level 2 moves mass of X1 = 1 monotonically
        let x1: Vec<f64> = rows.iter().filter(|r| r.coords[1] == 0.0).map(|r| r.values.as_ref().unwrap()[1]).collect();
        let increasing = x1.windows(2).all(|w| w[1] < w[0]);
        let decreasing = x1.windows(2).all(|w| w[1] > w[0]);
        assert!(increasing || decreasing, "{x1:?}");
    }

    #[test]
    fn grid_rejects_duplicates_and_empty() {
        let space = CategoricalSpace::new(vec![2]).unwrap();
        let z = SensitivityFunction::zero(&space);
        assert!(SensitivityGrid::new(vec![]).is_err());
        assert!(SensitivityGrid::new(vec![("a".into(), z.clone()), ("a".into(), z)]).is_err());
    }

    #[test]
    fn grid_records_point_errors() {
        let space = CategoricalSpace::new(vec![2, 2]).unwrap();
        let pats = PatternSet::full(2).unwrap();
        let f = ObservedDistribution::from_masses(space.clone(), pats, vec![vec![0.15; 4], vec![0.1, 0.1], vec![0.1, 0.1], vec![0.0]]).unwrap();
        let grid = SensitivityGrid::new(vec![("zero".into(), SensitivityFunction::zero(&space))]).unwrap();
        let rows = run_grid(&f, &grid, &[Functional::new("all", Event::always())]);
        assert!(rows[0].values.is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn saturation_and_log_odds_under_random_xi(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = random_observed(&mut rng, 3, 3);
            let xi = random_xi(&mut rng, f.space());
            let g = build_full_data_xi(&f, &xi).unwrap();
            for m in f.patterns().iter() {
                for (a, b) in g.observed_margin(m).unwrap().iter().zip(f.pattern_masses(m).unwrap()) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
            let p = f.space().item_count();
            for m in f.patterns().iter() {
                for j in 0..p {
                    if !m.is_missing(j) || !f.patterns().contains(&m.sibling(j, false).unwrap()) {
                        continue;
                    }
                    for cell in f.space().cells() {
                        for z in 0..f.space().levels()[j] {
                            let got = conditional_log_odds_ratio(&g, j, m, &cell, z).unwrap();
                            prop_assert!((got - xi.log_odds_ratio(j, &cell, z)).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }
}
