//! Missingness patterns and the pattern lattice.
//!
//! A [`Pattern`] is a vector of nonresponse indicators (`true` = item missing).
//! Patterns are partially ordered by inclusion of their missing sets:
//! `a ≼ b` when every item missing in `a` is also missing in `b`.
//!
//! Item indices in the Rust API are zero-based. The textual form is a bit
//! string such as `"010"`, read left to right as items 1..p.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// A missingness pattern over `p` items.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    bits: Box<[bool]>,
}

impl Pattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Pattern {
            bits: bits.into_boxed_slice(),
        }
    }

    /// The all-observed pattern `0_p`.
    pub fn complete(p: usize) -> Self {
        Pattern::new(vec![false; p])
    }

    /// The all-missing pattern `1_p`.
    pub fn all_missing(p: usize) -> Self {
        Pattern::new(vec![true; p])
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_missing(&self, item: usize) -> bool {
        self.bits[item]
    }

    pub fn is_complete(&self) -> bool {
        self.bits.iter().all(|b| !b)
    }

    pub fn missing_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn missing_items(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn observed_items(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| !b).map(|(j, _)| j)
    }

    /// `m ≼ other`: `other` misses at least the items `self` misses.
    pub fn precedes(&self, other: &Pattern) -> Result<bool> {
        if self.len() != other.len() {
            return Err(invalid(format!(
                "pattern length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self.precedes_unchecked(other))
    }

    pub(crate) fn precedes_unchecked(&self, other: &Pattern) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .all(|(&a, &b)| !a || b)
    }

    /// Strict order `m ≺ other`.
    pub fn strictly_precedes(&self, other: &Pattern) -> Result<bool> {
        Ok(self.precedes(other)? && self != other)
    }

    /// Copy of this pattern with item `item` set to `missing`.
    pub fn sibling(&self, item: usize, missing: bool) -> Result<Pattern> {
        if item >= self.len() {
            return Err(invalid(format!(
                "item index {item} out of range for pattern of length {}",
                self.len()
            )));
        }
        let mut bits = self.bits.to_vec();
        bits[item] = missing;
        Ok(Pattern::new(bits))
    }

    /// Sort key of the canonical linear extension: ones count, then bits.
    fn traversal_key(&self) -> (usize, &[bool]) {
        (self.missing_count(), &self.bits)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({self})")
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid(format!("invalid pattern character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(invalid("empty pattern"));
        }
        Ok(Pattern::new(bits))
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The set `M` of realizable patterns, always containing `0_p`.
///
/// Members are kept in traversal order (number of missing items, then
/// lexicographic), which is a linear extension of `≼`.
#[derive(Clone, PartialEq, Eq)]
pub struct PatternSet {
    p: usize,
    patterns: Vec<Pattern>,
    index: HashMap<Pattern, usize>,
}

impl PatternSet {
    pub fn new(p: usize, patterns: impl IntoIterator<Item = Pattern>) -> Result<Self> {
        if p == 0 {
            return Err(invalid("pattern set needs at least one item"));
        }
        let mut patterns: Vec<Pattern> = patterns.into_iter().collect();
        if let Some(bad) = patterns.iter().find(|m| m.len() != p) {
            return Err(invalid(format!("pattern {bad} does not have length {p}")));
        }
        patterns.sort_by(|a, b| a.traversal_key().cmp(&b.traversal_key()));
        if let Some(w) = patterns.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate pattern {}", w[0])));
        }
        if patterns.first().is_none_or(|m| !m.is_complete()) {
            return Err(invalid(format!(
                "pattern set must contain the all-observed pattern {}",
                Pattern::complete(p)
            )));
        }
        let index = patterns
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(PatternSet { p, patterns, index })
    }

    /// All `2^p` patterns.
    pub fn full(p: usize) -> Result<Self> {
        if p >= usize::BITS as usize - 1 {
            return Err(invalid(format!("cannot enumerate 2^{p} patterns")));
        }
        let all = (0..1usize << p).map(|code| {
            Pattern::new((0..p).map(|j| code >> (p - 1 - j) & 1 == 1).collect())
        });
        PatternSet::new(p, all)
    }

    pub fn item_count(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn contains(&self, m: &Pattern) -> bool {
        self.index.contains_key(m)
    }

    /// Position of `m` in traversal order.
    pub fn position(&self, m: &Pattern) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn get(&self, i: usize) -> &Pattern {
        &self.patterns[i]
    }

    /// Members in traversal order.
    pub fn traversal_order(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Pattern> {
        self.patterns.iter()
    }

    /// Members `s` with `s ≺ m`, in traversal order.
    pub fn strict_predecessors(&self, m: &Pattern) -> Vec<Pattern> {
        self.strict_predecessor_positions(m)
            .map(|i| self.patterns[i].clone())
            .collect()
    }

    pub(crate) fn strict_predecessor_positions<'a>(
        &'a self,
        m: &'a Pattern,
    ) -> impl Iterator<Item = usize> + 'a {
        self.patterns
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.len() == m.len() && *s != m && s.precedes_unchecked(m))
            .map(|(i, _)| i)
    }
}

impl fmt::Debug for PatternSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.patterns.iter()).finish()
    }
}

impl Serialize for PatternSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.patterns.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PatternSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let patterns = Vec::<Pattern>::deserialize(deserializer)?;
        let p = patterns
            .first()
            .map(Pattern::len)
            .ok_or_else(|| serde::de::Error::custom("empty pattern set"))?;
        PatternSet::new(p, patterns).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pat(s: &str) -> Pattern {
        s.parse().unwrap()
    }

    fn set(p: usize, items: &[&str]) -> PatternSet {
        PatternSet::new(p, items.iter().map(|s| pat(s))).unwrap()
    }

    #[test]
    fn precedes_examples() {
        assert!(pat("001").precedes(&pat("101")).unwrap());
        assert!(pat("101").precedes(&pat("111")).unwrap());
        assert!(!pat("001").precedes(&pat("110")).unwrap());
        assert!(pat("010").precedes(&pat("010")).unwrap());
        assert!(pat("01").precedes(&pat("011")).is_err());
    }

    #[test]
    fn strict_predecessors_examples() {
        let full = set(2, &["00", "01", "10", "11"]);
        assert_eq!(
            full.strict_predecessors(&pat("11")),
            vec![pat("00"), pat("01"), pat("10")]
        );
        assert!(full.strict_predecessors(&pat("00")).is_empty());
        let sparse = set(2, &["00", "11"]);
        assert_eq!(sparse.strict_predecessors(&pat("11")), vec![pat("00")]);
        // m need not be a member
        assert_eq!(sparse.strict_predecessors(&pat("01")), vec![pat("00")]);
    }

    #[test]
    fn traversal_order_examples() {
        let s = set(2, &["11", "10", "01", "00"]);
        assert_eq!(s.traversal_order(), &[pat("00"), pat("01"), pat("10"), pat("11")]);
        let chain = set(3, &["111", "000", "011"]);
        assert_eq!(chain.traversal_order(), &[pat("000"), pat("011"), pat("111")]);
        let trivial = set(4, &["0000"]);
        assert_eq!(trivial.traversal_order(), &[pat("0000")]);
        assert_eq!(
            PatternSet::full(3).unwrap().traversal_order(),
            &["000", "001", "010", "100", "011", "101", "110", "111"].map(pat)
        );
    }

    #[test]
    fn pattern_set_rejects_bad_input() {
        assert!(PatternSet::new(2, [pat("01"), pat("11")]).is_err());
        assert!(PatternSet::new(2, [pat("00"), pat("00")]).is_err());
        assert!(PatternSet::new(2, [pat("00"), pat("011")]).is_err());
    }

    #[test]
    fn sibling_examples() {
        assert_eq!(pat("010").sibling(0, true).unwrap(), pat("110"));
        assert_eq!(pat("010").sibling(1, false).unwrap(), pat("000"));
        assert_eq!(pat("111").sibling(2, true).unwrap(), pat("111"));
        assert!(pat("111").sibling(3, true).is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(pat("0101").to_string(), "0101");
        assert!("01a".parse::<Pattern>().is_err());
        assert!("".parse::<Pattern>().is_err());
        let json = serde_json::to_string(&set(2, &["00", "11"])).unwrap();
        assert_eq!(json, r#"["00","11"]"#);
        let back: PatternSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set(2, &["00", "11"]));
    }

    #[test]
    fn partial_order_axioms_exhaustive() {
        for p in 1..=4 {
            let all = PatternSet::full(p).unwrap();
            for a in all.iter() {
                assert!(a.precedes(a).unwrap());
                for b in all.iter() {
                    let ab = a.precedes(b).unwrap();
                    let ba = b.precedes(a).unwrap();
                    if ab && ba {
                        assert_eq!(a, b);
                    }
                    for c in all.iter() {
                        if ab && b.precedes(c).unwrap() {
                            assert!(a.precedes(c).unwrap());
                        }
                    }
                }
            }
        }
    }

    fn pattern_subset(p: usize) -> impl Strategy<Value = PatternSet> {
        proptest::collection::vec(any::<bool>(), 1usize << p).prop_map(move |keep| {
            let full = PatternSet::full(p).unwrap();
            let chosen = full
                .iter()
                .zip(keep)
                .filter(|(m, k)| *k || m.is_complete())
                .map(|(m, _)| m.clone());
            PatternSet::new(p, chosen).unwrap()
        })
    }

    proptest! {
        #[test]
        fn traversal_is_linear_extension(s in (1usize..=5).prop_flat_map(pattern_subset)) {
            let order = s.traversal_order();
            for (i, a) in order.iter().enumerate() {
                for (k, b) in order.iter().enumerate() {
                    if a.strictly_precedes(b).unwrap() {
                        prop_assert!(i < k);
                    }
                }
            }
        }

        #[test]
        fn sibling_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..8), j in 0usize..8) {
            let m = Pattern::new(bits);
            let j = j % m.len();
            let back = m.sibling(j, true).unwrap().sibling(j, m.is_missing(j)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
