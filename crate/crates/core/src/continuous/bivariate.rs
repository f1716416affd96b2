//! Full-data densities for two continuous items.
//!
//! With `f_m` the kernel density of the observed coordinates within pattern
//! `m`, the conditional full-data densities are
//!
//! ```text
//! g_00 = f_00
//! g_01 = f_00(x2 | x1) f_01(x1)
//! g_10 = f_00(x1 | x2) f_10(x2)
//! g_11 ∝ f_00(x1, x2) f_01(x1) f_10(x2) / (f_00(x1) f_00(x2))
//! ```
//!
//! The conditionals of `f_00` are evaluated through kernel responsibilities
//! on the log scale, so they stay accurate where the marginals underflow.

use rayon::prelude::*;
use serde::Serialize;

use super::kde::{log_sum_exp, KdeDensity};
use super::sample::{pattern_at, pattern_index, pattern_proportions, WeightedSample, PATTERN_ORDER};
use crate::error::{invalid, Error, Result};
use crate::lattice::Pattern;

pub const DEFAULT_GRID_POINTS: usize = 256;
pub const MIN_GRID_POINTS: usize = 32;
/// Default padding beyond the data range, in multiples of the largest bandwidth.
pub const GRID_PADDING: f64 = 4.0;

/// Responsibilities this far below the largest (log scale) are dropped.
const LOG_PRUNE: f64 = 40.0;
/// Kernels are truncated beyond this many bandwidths.
const KERNEL_REACH: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxisGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl AxisGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        if points < MIN_GRID_POINTS {
            return Err(invalid(format!("grid needs at least {MIN_GRID_POINTS} points, got {points}")));
        }
        Ok(AxisGrid { lo, hi, points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            self.hi
        } else {
            self.lo + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.node(k)).collect()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points)
            .map(|k| if k == 0 || k + 1 == self.points { 0.5 * h } else { h })
            .collect()
    }

    fn interpolate(&self, values: &[f64], x: f64) -> Result<f64> {
        if !(x >= self.lo && x <= self.hi) {
            return Err(Error::Extrapolation {
                point: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let pos = ((x - self.lo) / self.step()).min((self.points - 1) as f64);
        let k = (pos.floor() as usize).min(self.points - 2);
        let t = pos - k as f64;
        Ok(values[k] + t * (values[k + 1] - values[k]))
    }
}

/// Tensor quadrature grid over `(x1, x2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub x1: AxisGrid,
    pub x2: AxisGrid,
}

impl GridSpec {
    pub fn new(x1: AxisGrid, x2: AxisGrid) -> Self {
        GridSpec { x1, x2 }
    }

    pub fn axis(&self, axis: usize) -> &AxisGrid {
        match axis {
            0 => &self.x1,
            _ => &self.x2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatternFunctionals {
    pub prob_x1_greater: f64,
    pub mean_x1: f64,
    pub mean_x2: f64,
    pub corr: f64,
}

/// Fitted bivariate model.
#[derive(Clone, Debug)]
pub struct BivariateIcin {
    f00: KdeDensity,
    f00_1: KdeDensity,
    f00_2: KdeDensity,
    f01: Option<KdeDensity>,
    f10: Option<KdeDensity>,
    proportions: [f64; 4],
    counts: [usize; 4],
    grid: GridSpec,
    /// `log` of the normalizing constant of `g_11`, when defined.
    g11_log_norm: Option<f64>,
    grids: [Option<Vec<f64>>; 4],
    /// Marginal of each `g_m` along x1 and x2.
    marginals: [Option<[Vec<f64>; 2]>; 4],
}

pub fn fit_bivariate(sample: &WeightedSample, grid: Option<GridSpec>) -> Result<BivariateIcin> {
    let proportions = pattern_proportions(sample);
    let counts = sample.pattern_counts();
    let mut c00 = Vec::new();
    let mut w00 = Vec::new();
    let mut c01 = Vec::new();
    let mut w01 = Vec::new();
    let mut c10 = Vec::new();
    let mut w10 = Vec::new();
    for r in sample.records() {
        match (r.x1, r.x2) {
            (Some(a), Some(b)) => {
                c00.extend([a, b]);
                w00.push(r.weight);
            }
            (Some(a), None) => {
                c01.push(a);
                w01.push(r.weight);
            }
            (None, Some(b)) => {
                c10.push(b);
                w10.push(r.weight);
            }
            (None, None) => {}
        }
    }
    let fit_err = |pattern: &'static str| {
        move |e: Error| Error::Fit {
            pattern: pattern.to_string(),
            reason: e.to_string(),
        }
    };
    let f00 = KdeDensity::fit(2, c00, w00).map_err(fit_err("00"))?;
    let need01 = counts[1] > 0 || counts[3] > 0;
    let need10 = counts[2] > 0 || counts[3] > 0;
    let f01 = if need01 {
        if c01.is_empty() {
            return Err(Error::Fit {
                pattern: "01".into(),
                reason: "no records observe x1 alone, which pattern 11 requires".into(),
            });
        }
        Some(KdeDensity::fit(1, c01, w01).map_err(fit_err("01"))?)
    } else {
        None
    };
    let f10 = if need10 {
        if c10.is_empty() {
            return Err(Error::Fit {
                pattern: "10".into(),
                reason: "no records observe x2 alone, which pattern 11 requires".into(),
            });
        }
        Some(KdeDensity::fit(1, c10, w10).map_err(fit_err("10"))?)
    } else {
        None
    };
    let grid = match grid {
        Some(g) => g,
        None => default_grid(&f00, f01.as_ref(), f10.as_ref())?,
    };
    let mut model = BivariateIcin::from_parts(f00, f01, f10, proportions, grid)?;
    model.counts = counts;
    Ok(model)
}

/// Data range padded by [`GRID_PADDING`] times the largest bandwidth, with
/// [`DEFAULT_GRID_POINTS`] points per axis.
pub fn default_grid(f00: &KdeDensity, f01: Option<&KdeDensity>, f10: Option<&KdeDensity>) -> Result<GridSpec> {
    let all = [Some(f00), f01, f10];
    let hmax = all
        .iter()
        .flatten()
        .flat_map(|k| k.bandwidths().iter().copied())
        .fold(0.0, f64::max);
    let pad = GRID_PADDING * hmax;
    let (mut r1, mut r2) = (f00.range(0), f00.range(1));
    if let Some(k) = f01 {
        let r = k.range(0);
        r1 = (r1.0.min(r.0), r1.1.max(r.1));
    }
    if let Some(k) = f10 {
        let r = k.range(0);
        r2 = (r2.0.min(r.0), r2.1.max(r.1));
    }
    Ok(GridSpec::new(
        AxisGrid::new(r1.0 - pad, r1.1 + pad, DEFAULT_GRID_POINTS)?,
        AxisGrid::new(r2.0 - pad, r2.1 + pad, DEFAULT_GRID_POINTS)?,
    ))
}

impl BivariateIcin {
    /// Assemble a model from fitted densities. `f01` is a density in `x1`
    /// and `f10` a density in `x2`; each may be absent only when no pattern
    /// with positive proportion needs it.
    pub fn from_parts(
        f00: KdeDensity,
        f01: Option<KdeDensity>,
        f10: Option<KdeDensity>,
        proportions: [f64; 4],
        grid: GridSpec,
    ) -> Result<Self> {
        if f00.dimension() != 2 {
            return Err(invalid("f00 must be two-dimensional"));
        }
        if [&f01, &f10].iter().any(|k| k.as_ref().is_some_and(|k| k.dimension() != 1)) {
            return Err(invalid("f01 and f10 must be one-dimensional"));
        }
        let total: f64 = proportions.iter().sum();
        if proportions.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("pattern proportions must be nonnegative and sum to 1, got {proportions:?}")));
        }
        let needs = [
            (1, f01.is_some(), "01"),
            (2, f10.is_some(), "10"),
            (3, f01.is_some() && f10.is_some(), "11"),
        ];
        if let Some((_, _, m)) = needs.iter().find(|(i, ok, _)| proportions[*i] > 0.0 && !ok) {
            return Err(Error::Fit {
                pattern: m.to_string(),
                reason: "positive proportion but no density for the observed coordinates".into(),
            });
        }
        let f00_1 = f00.marginal(0);
        let f00_2 = f00.marginal(1);
        let mut model = BivariateIcin {
            f00,
            f00_1,
            f00_2,
            f01,
            f10,
            proportions,
            counts: [0; 4],
            grid,
            g11_log_norm: None,
            grids: [None, None, None, None],
            marginals: [None, None, None, None],
        };
        model.tabulate()?;
        Ok(model)
    }

    fn tabulate(&mut self) -> Result<()> {
        let (g1, g2) = (self.grid.x1, self.grid.x2);
        let (n1, n2) = (g1.points, g2.points);
        let x1 = g1.nodes();
        let x2 = g2.nodes();
        let log_m1: Vec<f64> = x1.par_iter().map(|&x| self.f00_1.log_eval(&[x])).collect();
        let log_m2: Vec<f64> = x2.par_iter().map(|&x| self.f00_2.log_eval(&[x])).collect();
        // cond12[j * n2 + k] = f00(x2_k | x1_j); cond21[k * n1 + j] = f00(x1_j | x2_k)
        let cond12 = conditional_rows(&self.f00, 0, &x1, &g2);
        let cond21 = conditional_rows(&self.f00, 1, &x2, &g1);

        let mut g00 = vec![0.0; n1 * n2];
        for j in 0..n1 {
            let m = log_m1[j].exp();
            for k in 0..n2 {
                g00[j * n2 + k] = m * cond12[j * n2 + k];
            }
        }
        self.grids[0] = Some(g00);

        let log_f01: Option<Vec<f64>> = self.f01.as_ref().map(|f| x1.par_iter().map(|&x| f.log_eval(&[x])).collect());
        let log_f10: Option<Vec<f64>> = self.f10.as_ref().map(|f| x2.par_iter().map(|&x| f.log_eval(&[x])).collect());
        if let Some(l01) = &log_f01 {
            let mut g = vec![0.0; n1 * n2];
            for j in 0..n1 {
                let a = l01[j].exp();
                for k in 0..n2 {
                    g[j * n2 + k] = cond12[j * n2 + k] * a;
                }
            }
            self.grids[1] = Some(g);
        }
        if let Some(l10) = &log_f10 {
            let mut g = vec![0.0; n1 * n2];
            for j in 0..n1 {
                for k in 0..n2 {
                    g[j * n2 + k] = cond21[k * n1 + j] * l10[k].exp();
                }
            }
            self.grids[2] = Some(g);
        }
        if let (Some(l01), Some(l10)) = (&log_f01, &log_f10) {
            let mut g = vec![0.0; n1 * n2];
            for j in 0..n1 {
                for k in 0..n2 {
                    let c = cond12[j * n2 + k];
                    if c > 0.0 {
                        g[j * n2 + k] = (c.ln() + l01[j] + l10[k] - log_m2[k]).exp();
                    }
                }
            }
            let (w1, w2) = (g1.weights(), g2.weights());
            let z: f64 = (0..n1)
                .map(|j| w1[j] * (0..n2).map(|k| w2[k] * g[j * n2 + k]).sum::<f64>())
                .sum();
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::Quadrature(format!(
                    "normalizing constant of g_11 evaluated to {z}"
                )));
            }
            g.iter_mut().for_each(|v| *v /= z);
            self.g11_log_norm = Some(z.ln());
            self.grids[3] = Some(g);
        }
        for (i, g) in self.grids.iter().enumerate() {
            if let Some(g) = g {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Quadrature(format!(
                        "non-finite density values for pattern {}",
                        PATTERN_ORDER[i]
                    )));
                }
                let (w1, w2) = (g1.weights(), g2.weights());
                let m1 = (0..n1).map(|j| (0..n2).map(|k| w2[k] * g[j * n2 + k]).sum()).collect();
                let m2 = (0..n2).map(|k| (0..n1).map(|j| w1[j] * g[j * n2 + k]).sum()).collect();
                self.marginals[i] = Some([m1, m2]);
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Weighted pattern shares in the order 00, 01, 10, 11.
    pub fn proportions(&self) -> [f64; 4] {
        self.proportions
    }

    /// Record counts per pattern (zero for models built from parts).
    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    pub fn f00(&self) -> &KdeDensity {
        &self.f00
    }

    pub fn f01(&self) -> Option<&KdeDensity> {
        self.f01.as_ref()
    }

    pub fn f10(&self) -> Option<&KdeDensity> {
        self.f10.as_ref()
    }

    /// Normalizing constant of `g_11` on the grid.
    pub fn g11_normalizer(&self) -> Option<f64> {
        self.g11_log_norm.map(f64::exp)
    }

    pub fn has_pattern(&self, m: &Pattern) -> bool {
        pattern_index(m).is_ok_and(|i| self.grids[i].is_some())
    }

    fn pattern_grid(&self, m: &Pattern) -> Result<(usize, &[f64])> {
        let i = pattern_index(m)?;
        self.grids[i]
            .as_deref()
            .map(|g| (i, g))
            .ok_or_else(|| invalid(format!("pattern {m} has no fitted density")))
    }

    /// `g_m` on the grid, row-major with `x1` outermost.
    pub fn grid_values(&self, m: &Pattern) -> Result<&[f64]> {
        self.pattern_grid(m).map(|(_, g)| g)
    }

    /// Trapezoid mass of `g_m` over the grid.
    pub fn grid_mass(&self, m: &Pattern) -> Result<f64> {
        let (i, _) = self.pattern_grid(m)?;
        let marg = self.marginals[i].as_ref().expect("tabulated");
        Ok(marg[0].iter().zip(self.grid.x1.weights()).map(|(a, w)| a * w).sum())
    }

    /// `log g_m(x1, x2)` evaluated directly from the kernel densities.
    pub fn log_density(&self, m: &Pattern, x1: f64, x2: f64) -> Result<f64> {
        let i = pattern_index(m)?;
        let f00 = self.f00.log_eval(&[x1, x2]);
        let v = match i {
            0 => f00,
            1 => f00 - self.f00_1.log_eval(&[x1]) + self.require(&self.f01, m)?.log_eval(&[x1]),
            2 => f00 - self.f00_2.log_eval(&[x2]) + self.require(&self.f10, m)?.log_eval(&[x2]),
            _ => {
                let z = self
                    .g11_log_norm
                    .ok_or_else(|| invalid("pattern 11 has no fitted density"))?;
                f00 - self.f00_1.log_eval(&[x1]) - self.f00_2.log_eval(&[x2])
                    + self.require(&self.f01, m)?.log_eval(&[x1])
                    + self.require(&self.f10, m)?.log_eval(&[x2])
                    - z
            }
        };
        Ok(v)
    }

    pub fn density(&self, m: &Pattern, x1: f64, x2: f64) -> Result<f64> {
        self.log_density(m, x1, x2).map(f64::exp)
    }

    fn require<'a>(&self, k: &'a Option<KdeDensity>, m: &Pattern) -> Result<&'a KdeDensity> {
        k.as_ref().ok_or_else(|| invalid(format!("pattern {m} has no fitted density")))
    }

    /// `pr(X1 > X2 | m)`, means and correlation under `g_m` by grid quadrature.
    pub fn pattern_functionals(&self, m: &Pattern) -> Result<PatternFunctionals> {
        let (_, g) = self.pattern_grid(m)?;
        let (x1, x2) = (self.grid.x1.nodes(), self.grid.x2.nodes());
        let (w1, w2) = (self.grid.x1.weights(), self.grid.x2.weights());
        let n2 = x2.len();
        let mut s = [0.0f64; 7];
        for j in 0..x1.len() {
            for k in 0..n2 {
                let w = w1[j] * w2[k] * g[j * n2 + k];
                let above = if x1[j] > x2[k] {
                    1.0
                } else if x1[j] == x2[k] {
                    0.5
                } else {
                    0.0
                };
                s[0] += w;
                s[1] += w * above;
                s[2] += w * x1[j];
                s[3] += w * x2[k];
                s[4] += w * x1[j] * x1[j];
                s[5] += w * x2[k] * x2[k];
                s[6] += w * x1[j] * x2[k];
            }
        }
        if !(s[0] > 0.0) {
            return Err(Error::Quadrature(format!("pattern {m} has no mass on the grid")));
        }
        let e = |i: usize| s[i] / s[0];
        let (m1, m2) = (e(2), e(3));
        let v1 = e(4) - m1 * m1;
        let v2 = e(5) - m2 * m2;
        let cov = e(6) - m1 * m2;
        Ok(PatternFunctionals {
            prob_x1_greater: e(1),
            mean_x1: m1,
            mean_x2: m2,
            corr: cov / (v1 * v2).sqrt(),
        })
    }

    /// Marginal of `g_m` along `axis` (0 for x1, 1 for x2) at the grid nodes.
    pub fn marginal(&self, m: &Pattern, axis: usize) -> Result<&[f64]> {
        let (i, _) = self.pattern_grid(m)?;
        if axis > 1 {
            return Err(invalid(format!("axis must be 0 or 1, got {axis}")));
        }
        Ok(&self.marginals[i].as_ref().expect("tabulated")[axis])
    }

    /// `pr(M_a = 1 | X_a = x)` for item `axis` (0 or 1) at each point, from
    /// linear interpolation of the grid marginals.
    pub fn missingness_curve(&self, axis: usize, points: &[f64]) -> Result<Vec<f64>> {
        if axis > 1 {
            return Err(invalid(format!("axis must be 0 or 1, got {axis}")));
        }
        let grid = self.grid.axis(axis);
        points
            .iter()
            .map(|&x| {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..4 {
                    if self.proportions[i] == 0.0 {
                        continue;
                    }
                    let marg = &self.marginals[i].as_ref().expect("positive proportion is tabulated")[axis];
                    let v = self.proportions[i] * grid.interpolate(marg, x)?;
                    den += v;
                    if pattern_at(i).is_missing(axis) {
                        num += v;
                    }
                }
                if !(den > 0.0) {
                    return Err(Error::Quadrature(format!("no density mass at x = {x}")));
                }
                Ok(num / den)
            })
            .collect()
    }
}

/// Rows of a conditional density of the 2-D kernel density `kde`: row `j`
/// holds `f(· | x_by = nodes[j])` at the nodes of `out`.
fn conditional_rows(kde: &KdeDensity, by: usize, nodes: &[f64], out: &AxisGrid) -> Vec<f64> {
    let other = 1 - by;
    let hb = kde.bandwidths()[by];
    let ho = kde.bandwidths()[other];
    let scale = 1.0 / (ho * (2.0 * std::f64::consts::PI).sqrt());
    let n = kde.len();
    let mut rows = vec![0.0; nodes.len() * out.points];
    rows.par_chunks_mut(out.points).zip(nodes.par_iter()).for_each(|(row, &x)| {
        let lr: Vec<f64> = (0..n)
            .map(|i| {
                let z = (x - kde.center(i)[by]) / hb;
                kde.log_weights()[i] - 0.5 * z * z
            })
            .collect();
        let lse = log_sum_exp(lr.iter().copied());
        let max = lr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (i, &l) in lr.iter().enumerate() {
            if l < max - LOG_PRUNE {
                continue;
            }
            add_kernel(row, out, kde.center(i)[other], ho, scale * (l - lse).exp());
        }
    });
    rows
}

/// Add `scale · exp(-z²/2)` for a kernel at `c` with bandwidth `h` to the
/// grid nodes within [`KERNEL_REACH`] bandwidths, by a multiplicative
/// recurrence along the evenly spaced nodes.
fn add_kernel(row: &mut [f64], grid: &AxisGrid, c: f64, h: f64, scale: f64) {
    let step = grid.step();
    let last = (grid.points - 1) as f64;
    let k0 = ((c - KERNEL_REACH * h - grid.lo) / step).ceil().max(0.0);
    let k1 = ((c + KERNEL_REACH * h - grid.lo) / step).floor().min(last);
    if k0 > k1 {
        return;
    }
    let (k0, k1) = (k0 as usize, k1 as usize);
    let d = step / h;
    let z0 = (grid.lo + k0 as f64 * step - c) / h;
    let mut e = scale * (-0.5 * z0 * z0).exp();
    let mut r = (-(z0 * d + 0.5 * d * d)).exp();
    let q = (-d * d).exp();
    for v in &mut row[k0..=k1] {
        *v += e;
        e *= r;
        r *= q;
    }
}
