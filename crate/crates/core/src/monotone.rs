//! Monotone (dropout) missingness.
//!
//! Under dropout every pattern is a suffix of ones, so patterns are indexed
//! by the dropout time `T = 1 + p − Σ_j m_j` (`T = p + 1` means no dropout).
//! The full-data distribution then factorizes along the chain,
//! `g(x, T = j) = exp{η_j(x_<j)} g(x, T = j + 1)`.

use crate::categorical::{build_full_data, FullDataDistribution, ObservedDistribution};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Pattern, PatternSet};

/// Dropout time `t ∈ {1, …, p + 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DropoutTime(pub usize);

impl DropoutTime {
    pub fn value(self) -> usize {
        self.0
    }

    /// The pattern with items `t, …, p` (1-based) missing.
    pub fn pattern(self, p: usize) -> Result<Pattern> {
        if self.0 == 0 || self.0 > p + 1 {
            return Err(invalid(format!("dropout time {} outside 1..={}", self.0, p + 1)));
        }
        Ok(Pattern::new((0..p).map(|j| j + 1 >= self.0).collect()))
    }
}

pub fn is_monotone(m: &Pattern) -> bool {
    m.bits().windows(2).all(|w| !w[0] || w[1])
}

pub fn dropout_time(m: &Pattern) -> Result<DropoutTime> {
    if !is_monotone(m) {
        return Err(invalid(format!("pattern {m} is not monotone")));
    }
    Ok(DropoutTime(1 + m.len() - m.missing_count()))
}

/// Dropout pattern of a longitudinal record; missing values must be trailing.
pub fn record_pattern<T>(values: &[Option<T>]) -> Result<Pattern> {
    let m = Pattern::new(values.iter().map(Option::is_none).collect());
    if !is_monotone(&m) {
        return Err(invalid(format!(
            "record has pattern {m}; only trailing values may be missing"
        )));
    }
    Ok(m)
}

/// A contiguous chain of dropout patterns ending at `0_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropoutPatternSet {
    patterns: PatternSet,
    earliest: DropoutTime,
}

impl DropoutPatternSet {
    /// All times `earliest, …, p + 1`.
    pub fn from_earliest(p: usize, earliest: usize) -> Result<Self> {
        if earliest == 0 || earliest > p + 1 {
            return Err(invalid(format!("dropout time {earliest} outside 1..={}", p + 1)));
        }
        let patterns = (earliest..=p + 1)
            .map(|t| DropoutTime(t).pattern(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(DropoutPatternSet {
            patterns: PatternSet::new(p, patterns)?,
            earliest: DropoutTime(earliest),
        })
    }

    /// The full chain `T ∈ {1, …, p + 1}`.
    pub fn full(p: usize) -> Result<Self> {
        Self::from_earliest(p, 1)
    }

    pub fn from_pattern_set(patterns: &PatternSet) -> Result<Self> {
        let mut times = patterns
            .iter()
            .map(dropout_time)
            .collect::<Result<Vec<_>>>()?;
        times.sort();
        let p = patterns.item_count();
        let contiguous = times.windows(2).all(|w| w[1].0 == w[0].0 + 1);
        if !contiguous || times.last() != Some(&DropoutTime(p + 1)) {
            return Err(invalid("dropout patterns must form a contiguous chain ending at no dropout"));
        }
        Ok(DropoutPatternSet {
            patterns: patterns.clone(),
            earliest: times[0],
        })
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn item_count(&self) -> usize {
        self.patterns.item_count()
    }

    pub fn earliest(&self) -> DropoutTime {
        self.earliest
    }

    pub fn contains(&self, t: DropoutTime) -> bool {
        t >= self.earliest && t.0 <= self.item_count() + 1
    }
}

/// Build the full-data distribution on a dropout chain and check the
/// factorization along the chain cellwise.
pub fn build_monotone(observed: &ObservedDistribution) -> Result<FullDataDistribution> {
    let chain = DropoutPatternSet::from_pattern_set(observed.patterns())?;
    let g = build_full_data(observed)?;
    let p = chain.item_count();
    for t in chain.earliest.0..=p {
        let m = DropoutTime(t).pattern(p)?;
        let next = DropoutTime(t + 1).pattern(p)?;
        for cell in g.space().cells() {
            let eta = g.eta().get(&m, &cell).expect("chain pattern");
            let lhs = g.log_mass(&cell, &m);
            let rhs = eta + g.log_mass(&cell, &next);
            if (lhs - rhs).abs() > 1e-12 * lhs.abs().max(1.0) {
                return Err(Error::Invariant(format!(
                    "dropout factorization fails at T = {t}, cell {}: {lhs} vs {rhs}",
                    g.space().format_cell(&cell.iter().map(|&l| Some(l)).collect::<Vec<_>>())
                )));
            }
        }
    }
    Ok(g)
}

/// `log pr(T = j + 1 | X = x) / pr(T = j | X = x) = −η_j(x_<j)`.
pub fn sequential_log_odds(g: &FullDataDistribution, j: usize, cell: &[usize]) -> Result<f64> {
    let p = g.space().item_count();
    g.space().check_cell(cell)?;
    if j == 0 || j > p {
        return Err(invalid(format!("time {j} has no successor in 1..={}", p + 1)));
    }
    let m = DropoutTime(j).pattern(p)?;
    let next = DropoutTime(j + 1).pattern(p)?;
    if !g.patterns().contains(&m) || !g.patterns().contains(&next) {
        return Err(invalid(format!("times {j} and {} are not both in the dropout chain", j + 1)));
    }
    Ok(-g.eta().get(&m, cell).expect("chain pattern"))
}
