//! Observable necessary condition for `X_k ⊥ M_j | X_{-k}, M_{-j}`.
//!
//! Under that assumption the distribution of `X_k` among records missing
//! only item `j` is a mixture, over the unseen `X_j = l`, of the complete-case
//! conditionals `pr(X_k | X_j = l, rest, M = 0)`. A target outside the convex
//! hull of those columns refutes the assumption.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::categorical::ObservedDistribution;
use crate::error::{invalid, Error, Result};
use crate::lattice::Pattern;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Largest `K_j` for the exact subset search.
pub const MAX_HULL_COLUMNS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Overall {
    #[serde(rename = "refuted")]
    Refuted,
    #[serde(rename = "not refuted")]
    NotRefuted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumReport {
    /// `(item, level)` for every item other than `j` and `k`.
    pub values: Vec<(usize, usize)>,
    pub verdict: Verdict,
    /// Total-variation distance between the target and its projection onto the hull.
    pub violation: Option<f64>,
    /// Mixture weights of the projection.
    pub weights: Option<Vec<f64>>,
    /// The hull has lower dimension than the space it sits in.
    pub degenerate: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub j: usize,
    pub k: usize,
    pub tol: f64,
    pub strata: Vec<StratumReport>,
    pub overall: Overall,
    pub worst_violation: f64,
}

impl FeasibilityReport {
    /// Human-readable statement of the assumption, 1-based.
    pub fn assumption(&self) -> String {
        format!(
            "X{k} independent of M{j} given X_-{k}, M_-{j}",
            j = self.j + 1,
            k = self.k + 1
        )
    }
}

/// Check the convex-hull condition in every stratum of the items other
/// than `j` and `k`.
pub fn convex_feasibility(observed: &ObservedDistribution, j: usize, k: usize, tol: f64) -> Result<FeasibilityReport> {
    let space = observed.space();
    let p = space.item_count();
    if j >= p || k >= p {
        return Err(invalid(format!("items must be in 1..={p}")));
    }
    if j == k {
        return Err(invalid("j and k must differ"));
    }
    if !(tol >= 0.0) {
        return Err(invalid("tolerance must be nonnegative"));
    }
    let kj = space.levels()[j];
    let kk = space.levels()[k];
    if kj > MAX_HULL_COLUMNS {
        return Err(Error::UnsupportedSize(format!(
            "item {} has {kj} levels; at most {MAX_HULL_COLUMNS} supported",
            j + 1
        )));
    }
    let complete = Pattern::complete(p);
    let target = complete.sibling(j, true)?;
    for m in [&complete, &target] {
        if !observed.patterns().contains(m) {
            return Err(invalid(format!("pattern {m} is required but not in the pattern set")));
        }
    }
    let rest: Vec<usize> = (0..p).filter(|&i| i != j && i != k).collect();
    let mut strata = Vec::new();
    let mut assignment = vec![0usize; rest.len()];
    loop {
        let mut cell = vec![0usize; p];
        for (&i, &l) in rest.iter().zip(&assignment) {
            cell[i] = l;
        }
        let values = rest.iter().copied().zip(assignment.iter().copied()).collect();
        strata.push(stratum(observed, &complete, &target, j, k, kj, kk, cell, values, tol));
        let mut d = rest.len();
        loop {
            if d == 0 {
                let worst = strata
                    .iter()
                    .filter_map(|s| s.violation)
                    .fold(0.0, f64::max);
                let overall = if strata.iter().any(|s| s.verdict == Verdict::Infeasible) {
                    Overall::Refuted
                } else {
                    Overall::NotRefuted
                };
                return Ok(FeasibilityReport {
                    j,
                    k,
                    tol,
                    strata,
                    overall,
                    worst_violation: worst,
                });
            }
            d -= 1;
            assignment[d] += 1;
            if assignment[d] < space.levels()[rest[d]] {
                break;
            }
            assignment[d] = 0;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn stratum(
    observed: &ObservedDistribution,
    complete: &Pattern,
    target: &Pattern,
    j: usize,
    k: usize,
    kj: usize,
    kk: usize,
    mut cell: Vec<usize>,
    values: Vec<(usize, usize)>,
    tol: f64,
) -> StratumReport {
    let undetermined = |note: String| StratumReport {
        values: values.clone(),
        verdict: Verdict::Undetermined,
        violation: None,
        weights: None,
        degenerate: false,
        note: Some(note),
    };
    let mut v = DVector::zeros(kk);
    for x in 0..kk {
        cell[k] = x;
        v[x] = observed.mass(target, &cell).expect("member pattern");
    }
    let sv = v.sum();
    if !(sv > 0.0) {
        return undetermined(format!("no mass under pattern {target}"));
    }
    v /= sv;
    let mut u = DMatrix::zeros(kk, kj);
    for l in 0..kj {
        cell[j] = l;
        for x in 0..kk {
            cell[k] = x;
            u[(x, l)] = observed.mass(complete, &cell).expect("member pattern");
        }
        let s: f64 = u.column(l).sum();
        if !(s > 0.0) {
            return undetermined(format!("no complete-case mass at level {} of item {}", l + 1, j + 1));
        }
        u.column_mut(l).scale_mut(1.0 / s);
    }
    let (c, _) = simplex_least_squares(&u, &v);
    let residual = &u * &c - &v;
    let violation = 0.5 * residual.iter().map(|r| r.abs()).sum::<f64>();
    StratumReport {
        values,
        verdict: if violation <= tol { Verdict::Feasible } else { Verdict::Infeasible },
        violation: Some(violation),
        weights: Some(c.iter().copied().collect()),
        degenerate: hull_is_degenerate(&u),
        note: None,
    }
}

/// `argmin ||U c − v||²` over the probability simplex, by solving the
/// equality-constrained problem on every face and keeping the best feasible
/// candidate.
pub fn simplex_least_squares(u: &DMatrix<f64>, v: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = u.ncols();
    let objective = |c: &DVector<f64>| (u * c - v).norm_squared();
    let mut best_c = DVector::zeros(n);
    best_c[0] = 1.0;
    let mut best = objective(&best_c);
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        let s = cols.len();
        let us = u.select_columns(&cols);
        let mut kkt = DMatrix::zeros(s + 1, s + 1);
        kkt.view_mut((0, 0), (s, s)).copy_from(&(us.transpose() * &us * 2.0));
        for i in 0..s {
            kkt[(i, s)] = 1.0;
            kkt[(s, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(s + 1);
        rhs.rows_mut(0, s).copy_from(&(us.transpose() * v * 2.0));
        rhs[s] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().take(s).any(|x| !x.is_finite() || *x < -1e-12) {
            continue;
        }
        let mut c = DVector::zeros(n);
        for (i, &col) in cols.iter().enumerate() {
            c[col] = sol[i].max(0.0);
        }
        let total = c.sum();
        if !(total > 0.0) {
            continue;
        }
        c /= total;
        let obj = objective(&c);
        if obj < best {
            best = obj;
            best_c = c;
        }
    }
    (best_c, best)
}

fn hull_is_degenerate(u: &DMatrix<f64>) -> bool {
    let (rows, cols) = u.shape();
    if cols < 2 {
        return false;
    }
    let mut d = DMatrix::zeros(rows, cols - 1);
    for l in 1..cols {
        d.set_column(l - 1, &(u.column(l) - u.column(0)));
    }
    let rank = d.rank(1e-10);
    rank < (rows - 1).min(cols - 1)
}

/// Full-data masses for two binary items where only `X2` can be missing and
/// `X1 ⊥ M2 | X2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HausmanWiseFit {
    /// `pr(X2 = l | M2 = 1)`.
    pub missing_distribution: Vec<f64>,
    /// `g(x, 00)` and `g(x, 01)` over full cells in row-major order.
    pub complete_masses: Vec<f64>,
    pub missing_masses: Vec<f64>,
}

impl HausmanWiseFit {
    pub fn mass(&self, cell: &[usize], m: &Pattern) -> Option<f64> {
        let i = 2 * cell[0] + cell[1];
        match m.to_string().as_str() {
            "00" => Some(self.complete_masses[i]),
            "01" => Some(self.missing_masses[i]),
            _ => None,
        }
    }
}

pub fn hausman_wise_closed_form(observed: &ObservedDistribution) -> Result<HausmanWiseFit> {
    let space = observed.space();
    if space.levels() != [2, 2] {
        return Err(invalid("the closed form needs two binary items"));
    }
    let m00: Pattern = "00".parse().expect("literal");
    let m01: Pattern = "01".parse().expect("literal");
    if observed.patterns().iter().any(|m| *m != m00 && *m != m01) || !observed.patterns().contains(&m01) {
        return Err(invalid("the closed form needs patterns {00, 01}: X1 always observed, X2 sometimes missing"));
    }
    let mut a = DMatrix::zeros(2, 2);
    for l in 0..2 {
        for x in 0..2 {
            a[(x, l)] = observed.mass(&m00, &[x, l]).expect("member pattern");
        }
        let s: f64 = a.column(l).sum();
        if !(s > 0.0) {
            return Err(Error::Degenerate(format!("no complete cases with X2 = {}", l + 1)));
        }
        a.column_mut(l).scale_mut(1.0 / s);
    }
    let pi01 = observed.pattern_probability(&m01);
    if !(pi01 > 0.0) {
        return Err(Error::Degenerate("pattern 01 has no mass".into()));
    }
    let b = DVector::from_fn(2, |x, _| observed.mass(&m01, &[x, 0]).expect("member pattern") / pi01);
    let det = a.determinant();
    if det.abs() < 1e-12 {
        return Err(Error::Degenerate(
            "X1 is independent of X2 among complete cases; the system is singular".into(),
        ));
    }
    let q = a.clone().lu().solve(&b).ok_or_else(|| Error::Degenerate("singular system".into()))?;
    let missing_masses: Vec<f64> = (0..4).map(|i| pi01 * q[i % 2] * a[(i / 2, i % 2)]).collect();
    let worst = missing_masses.iter().copied().fold(f64::INFINITY, f64::min);
    if worst < 0.0 {
        return Err(Error::Infeasible {
            message: format!(
                "negative estimated probabilities pr(X2 | M2 = 1) = ({:.6}, {:.6})",
                q[0], q[1]
            ),
            mass: worst,
        });
    }
    let complete_masses = (0..4)
        .map(|i| observed.mass(&m00, &[i / 2, i % 2]).expect("member pattern"))
        .collect();
    Ok(HausmanWiseFit {
        missing_distribution: q.iter().copied().collect(),
        complete_masses,
        missing_masses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::{build_full_data, CategoricalSpace};
    use crate::lattice::PatternSet;
    use rand::{Rng, SeedableRng};

    fn pat(s: &str) -> Pattern {
        s.parse().unwrap()
    }

    /// Two binary items, patterns {00, 01}; `a = pr(X1 = 1 | X2 = l, M = 00)`,
    /// `target = pr(X1 = 1 | M = 01)`.
    fn binary_fixture(a: [f64; 2], target: f64) -> ObservedDistribution {
        let space = CategoricalSpace::new(vec![2, 2]).unwrap();
        let pats = PatternSet::new(2, [pat("00"), pat("01")]).unwrap();
        ObservedDistribution::from_fn(space, pats, |m, c| {
            if m.is_complete() {
                let (x1, x2) = (c[0].unwrap(), c[1].unwrap());
                0.25 * if x1 == 0 { a[x2] } else { 1.0 - a[x2] }
            } else {
                0.5 * if c[0].unwrap() == 0 { target } else { 1.0 - target }
            }
        })
        .unwrap()
    }

    #[test]
    fn interval_membership() {
        let bad = binary_fixture([0.3, 0.4], 0.6);
        let r = convex_feasibility(&bad, 1, 0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.overall, Overall::Refuted);
        assert_eq!(r.strata.len(), 1);
        assert!((r.strata[0].violation.unwrap() - 0.2).abs() < 1e-12);
        assert!(!r.strata[0].degenerate);

        let good = binary_fixture([0.3, 0.4], 0.35);
        let r = convex_feasibility(&good, 1, 0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.overall, Overall::NotRefuted);
        let c = r.strata[0].weights.as_ref().unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collapsed_hull_is_flagged() {
        let f = binary_fixture([0.3, 0.3], 0.5);
        let r = convex_feasibility(&f, 1, 0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.strata[0].verdict, Verdict::Infeasible);
        assert!(r.strata[0].degenerate);
        assert!(matches!(hausman_wise_closed_form(&f), Err(Error::Degenerate(_))));
    }

    #[test]
    fn argument_checks() {
        let f = binary_fixture([0.3, 0.4], 0.35);
        assert!(convex_feasibility(&f, 0, 0, 1e-9).is_err());
        assert!(convex_feasibility(&f, 2, 0, 1e-9).is_err());
        // pattern 10 is absent
        assert!(convex_feasibility(&f, 0, 1, 1e-9).is_err());
    }

    #[test]
    fn infeasible_closed_form_reports_negative_mass() {
        match hausman_wise_closed_form(&binary_fixture([0.3, 0.4], 0.6)) {
            Err(Error::Infeasible { mass, .. }) => assert!(mass < 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_form_recovers_generator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let joint: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = joint.iter().sum();
            let rho = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
            let g00: Vec<f64> = (0..4).map(|i| joint[i] / z * (1.0 - rho[i % 2])).collect();
            let g01: Vec<f64> = (0..4).map(|i| joint[i] / z * rho[i % 2]).collect();
            let space = CategoricalSpace::new(vec![2, 2]).unwrap();
            let pats = PatternSet::new(2, [pat("00"), pat("01")]).unwrap();
            let f = ObservedDistribution::from_masses(space, pats, vec![g00.clone(), vec![g01[0] + g01[1], g01[2] + g01[3]]]).unwrap();
            let fit = hausman_wise_closed_form(&f).unwrap();
            for i in 0..4 {
                assert!((fit.missing_masses[i] - g01[i]).abs() < 1e-10);
                assert!((fit.complete_masses[i] - g00[i]).abs() < 1e-15);
            }
            assert!((fit.mass(&[1, 0], &pat("01")).unwrap() - g01[2]).abs() < 1e-10);
        }
    }

    #[test]
    fn agreement_with_closed_form_and_icin_immunity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let (mut refuted, mut fine) = (0, 0);
        for _ in 0..1000 {
            let a = [rng.random_range(0.02..0.98), rng.random_range(0.02..0.98)];
            let f = binary_fixture(a, rng.random_range(0.02..0.98));
            let r = convex_feasibility(&f, 1, 0, DEFAULT_TOLERANCE).unwrap();
            let hw = hausman_wise_closed_form(&f);
            assert_eq!(r.overall == Overall::NotRefuted, hw.is_ok(), "{a:?}");
            if hw.is_ok() {
                fine += 1;
            } else {
                refuted += 1;
            }
            let g = build_full_data(&f).unwrap();
            assert!((g.total_mass() - 1.0).abs() < 1e-12);
        }
        assert!(refuted > 100 && fine > 100);
    }

    #[test]
    fn soundness_on_generated_tables() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let levels = vec![3, 2, 3];
            let space = CategoricalSpace::new(levels.clone()).unwrap();
            let (j, k) = (2, 0);
            // g(x, e_j) = g(x, 0) r(x_-k): X_k ⊥ M_j given the rest
            let base: Vec<f64> = (0..space.cell_count()).map(|_| rng.random_range(0.05..1.0)).collect();
            let r: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..2.0)).collect();
            let ratio = |c: &[usize]| r[c[1] * 3 + c[2]];
            let pats = PatternSet::new(3, [pat("000"), pat("001")]).unwrap();
            let mut f0 = vec![0.0; 18];
            let mut fj = vec![0.0; 6];
            for (i, c) in space.cells().enumerate() {
                f0[i] = base[i];
                fj[c[0] * 2 + c[1]] += base[i] * ratio(&c);
            }
            let f = ObservedDistribution::from_weights(space, pats, vec![f0, fj]).unwrap();
            let rep = convex_feasibility(&f, j, k, DEFAULT_TOLERANCE).unwrap();
            assert_eq!(rep.overall, Overall::NotRefuted, "{rep:?}");
            assert_eq!(rep.strata.len(), 2);
        }
    }

    #[test]
    fn simplex_projection_against_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        for _ in 0..30 {
            let u = DMatrix::from_fn(3, 3, |_, _| rng.random_range(0.0..1.0));
            let v = DVector::from_fn(3, |_, _| rng.random_range(0.0..1.0));
            let (_, best) = simplex_least_squares(&u, &v);
            let mut brute = f64::INFINITY;
            let n = 200;
            for a in 0..=n {
                for b in 0..=(n - a) {
                    let c = DVector::from_vec(vec![a as f64 / n as f64, b as f64 / n as f64, (n - a - b) as f64 / n as f64]);
                    brute = brute.min((&u * c - &v).norm_squared());
                }
            }
            assert!(best <= brute + 1e-12, "{best} vs {brute}");
            assert!(brute - best < 1e-3);
        }
    }

    #[test]
    fn undetermined_stratum() {
        let space = CategoricalSpace::new(vec![2, 2, 2]).unwrap();
        let pats = PatternSet::new(3, [pat("000"), pat("010")]).unwrap();
        let f = ObservedDistribution::from_fn(space, pats, |m, c| {
            if !m.is_complete() && c[2] == Some(1) {
                0.0
            } else {
                0.1
            }
        })
        .unwrap();
        let r = convex_feasibility(&f, 1, 0, 1e-9).unwrap();
        assert_eq!(r.strata.len(), 2);
        assert_eq!(r.strata[1].verdict, Verdict::Undetermined);
        assert_eq!(r.strata[1].values, vec![(2, 1)]);
    }
}
