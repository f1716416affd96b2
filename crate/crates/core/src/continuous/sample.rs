use crate::error::{invalid, Error, Result};
use crate::lattice::Pattern;

/// Pattern labels in index order; index `2·m1 + m2`.
pub const PATTERN_ORDER: [&str; 4] = ["00", "01", "10", "11"];

/// Index of a length-2 pattern in [`PATTERN_ORDER`].
pub fn pattern_index(m: &Pattern) -> Result<usize> {
    if m.len() != 2 {
        return Err(invalid(format!("bivariate models need length-2 patterns, got {m}")));
    }
    Ok(2 * usize::from(m.is_missing(0)) + usize::from(m.is_missing(1)))
}

pub fn pattern_at(index: usize) -> Pattern {
    Pattern::new(vec![index & 2 != 0, index & 1 != 0])
}

/// One record; `None` marks a missing coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedRecord {
    pub x1: Option<f64>,
    pub x2: Option<f64>,
    pub weight: f64,
}

impl WeightedRecord {
    pub fn new(x1: Option<f64>, x2: Option<f64>, weight: f64) -> Self {
        WeightedRecord { x1, x2, weight }
    }

    pub fn pattern_index(&self) -> usize {
        2 * usize::from(self.x1.is_none()) + usize::from(self.x2.is_none())
    }

    pub fn pattern(&self) -> Pattern {
        pattern_at(self.pattern_index())
    }
}

/// Weighted bivariate records with at least two complete cases.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    records: Vec<WeightedRecord>,
}

impl WeightedSample {
    pub fn new(records: Vec<WeightedRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.weight > 0.0 && r.weight.is_finite()) {
                return Err(invalid(format!("record {} has non-positive weight {}", i + 1, r.weight)));
            }
            if r.x1.iter().chain(&r.x2).any(|v| !v.is_finite()) {
                return Err(invalid(format!("record {} has a non-finite value", i + 1)));
            }
        }
        let complete = records.iter().filter(|r| r.pattern_index() == 0).count();
        if complete < 2 {
            return Err(Error::DegenerateSample(format!(
                "{complete} complete records; at least 2 are required"
            )));
        }
        Ok(WeightedSample { records })
    }

    pub fn records(&self) -> &[WeightedRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record counts per pattern in [`PATTERN_ORDER`].
    pub fn pattern_counts(&self) -> [usize; 4] {
        let mut n = [0; 4];
        for r in &self.records {
            n[r.pattern_index()] += 1;
        }
        n
    }

    pub fn total_weight(&self) -> f64 {
        self.records.iter().map(|r| r.weight).sum()
    }
}

/// Weighted share of records per pattern, in [`PATTERN_ORDER`].
pub fn pattern_proportions(sample: &WeightedSample) -> [f64; 4] {
    let mut w = [0.0; 4];
    for r in sample.records() {
        w[r.pattern_index()] += r.weight;
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}
