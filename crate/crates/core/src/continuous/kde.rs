use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Weighted Gaussian product-kernel density in one or two dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeDensity {
    dim: usize,
    /// Row-major `n × dim`.
    centers: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    bandwidths: Vec<f64>,
}

impl KdeDensity {
    /// `centers` is row-major `n × dim`; weights are normalized to sum to 1.
    pub fn new(dim: usize, centers: Vec<f64>, weights: Vec<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(invalid(format!("kernel densities support 1 or 2 dimensions, got {dim}")));
        }
        if centers.len() != weights.len() * dim || weights.is_empty() {
            return Err(invalid("centers and weights disagree in length"));
        }
        if bandwidths.len() != dim || bandwidths.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(invalid(format!("bandwidths must be {dim} positive values")));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) || centers.iter().any(|c| !c.is_finite()) {
            return Err(invalid("weights must be positive and centers finite"));
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(KdeDensity {
            dim,
            centers,
            weights,
            log_weights,
            bandwidths,
        })
    }

    /// Fit with Silverman bandwidths chosen per coordinate.
    pub fn fit(dim: usize, centers: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || centers.len() != weights.len() * dim {
            return Err(invalid("centers and weights disagree in length"));
        }
        let bandwidths = (0..dim)
            .map(|d| {
                let coord: Vec<f64> = centers.iter().skip(d).step_by(dim).copied().collect();
                silverman_bandwidth(&coord, &weights)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, centers, weights, bandwidths)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// Smallest and largest center along `axis`.
    pub fn range(&self, axis: usize) -> (f64, f64) {
        self.centers
            .iter()
            .skip(axis)
            .step_by(self.dim)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)))
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.log_eval(point).exp()
    }

    /// Log density by log-sum-exp over the kernel components.
    pub fn log_eval(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.dim, "point dimension");
        let norm: f64 = self.bandwidths.iter().map(|h| h.ln() + 0.5 * (2.0 * PI).ln()).sum();
        let terms = (0..self.len()).map(|i| {
            let c = self.center(i);
            let q: f64 = (0..self.dim)
                .map(|d| {
                    let z = (point[d] - c[d]) / self.bandwidths[d];
                    z * z
                })
                .sum();
            self.log_weights[i] - 0.5 * q
        });
        log_sum_exp(terms) - norm
    }

    /// The one-dimensional marginal along `axis`.
    pub fn marginal(&self, axis: usize) -> KdeDensity {
        assert!(axis < self.dim, "axis out of range");
        let centers = self.centers.iter().skip(axis).step_by(self.dim).copied().collect();
        KdeDensity {
            dim: 1,
            centers,
            weights: self.weights.clone(),
            log_weights: self.log_weights.clone(),
            bandwidths: vec![self.bandwidths[axis]],
        }
    }
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `0.9 · min(σ, IQR / 1.34) · n_eff^(-1/5)`, falling back to `σ` when the
/// interquartile range is zero.
pub fn silverman_rule(sd: f64, iqr: f64, n_eff: f64) -> f64 {
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n_eff.powf(-0.2)
}

/// Silverman bandwidth with weighted standard deviation, weighted quartiles
/// and Kish effective sample size.
pub fn silverman_bandwidth(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() || values.is_empty() {
        return Err(invalid("values and weights disagree in length"));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) || values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("weights must be positive and values finite"));
    }
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total;
    let sd = var.sqrt();
    // a sample of identical values can still leave rounding noise in `var`
    if !(sd > 1e-12 * mean.abs().max(f64::MIN_POSITIVE)) || values.iter().all(|v| *v == values[0]) {
        return Err(Error::DegenerateSample("all values are identical".into()));
    }
    let iqr = weighted_quantile(values, weights, 0.75) - weighted_quantile(values, weights, 0.25);
    let n_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(silverman_rule(sd, iqr, n_eff))
}

/// Weighted quantile: sorted values are placed at the midpoints of their
/// cumulative weight and interpolated linearly, clamping outside.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut cum = 0.0;
    let positions: Vec<f64> = pairs
        .iter()
        .map(|&(_, w)| {
            let pos = (cum + 0.5 * w) / total;
            cum += w;
            pos
        })
        .collect();
    if q <= positions[0] {
        return pairs[0].0;
    }
    for i in 1..pairs.len() {
        if q <= positions[i] {
            let t = (q - positions[i - 1]) / (positions[i] - positions[i - 1]);
            return pairs[i - 1].0 + t * (pairs[i].0 - pairs[i - 1].0);
        }
    }
    pairs[pairs.len() - 1].0
}
