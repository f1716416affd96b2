use crate::error::{invalid, Error, Result};
use crate::lattice::Pattern;

/// Upper bound on materialized `(cell, pattern)` entries.
pub const MAX_TABLE_ENTRIES: usize = 10_000_000;

/// Product space of `p` categorical items with `K_j >= 2` levels each.
///
/// Levels are zero-based in the API; names and labels are carried along for
/// file formats and the CLI, defaulting to `x1..xp` and `1..K_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoricalSpace {
    levels: Vec<usize>,
    names: Vec<String>,
    labels: Vec<Vec<String>>,
    strides: Vec<usize>,
    cells: usize,
}

impl CategoricalSpace {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        let names = (1..=levels.len()).map(|j| format!("x{j}")).collect();
        let labels = levels
            .iter()
            .map(|&k| (1..=k).map(|l| l.to_string()).collect())
            .collect();
        Self::with_labels(levels, names, labels)
    }

    pub fn with_labels(
        levels: Vec<usize>,
        names: Vec<String>,
        labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("categorical space needs at least one item"));
        }
        if let Some((j, k)) = levels.iter().enumerate().find(|(_, &k)| k < 2) {
            return Err(invalid(format!("item {} has {k} levels; at least 2 required", j + 1)));
        }
        if names.len() != levels.len() || labels.len() != levels.len() {
            return Err(invalid("names and labels must have one entry per item"));
        }
        for (j, (l, &k)) in labels.iter().zip(&levels).enumerate() {
            if l.len() != k {
                return Err(invalid(format!(
                    "item {} declares {k} levels but {} labels",
                    j + 1,
                    l.len()
                )));
            }
        }
        let mut cells: usize = 1;
        for &k in &levels {
            cells = cells
                .checked_mul(k)
                .filter(|&c| c <= MAX_TABLE_ENTRIES)
                .ok_or_else(|| {
                    Error::UnsupportedSize(format!(
                        "table with levels {levels:?} exceeds {MAX_TABLE_ENTRIES} cells"
                    ))
                })?;
        }
        let mut strides = vec![1; levels.len()];
        for j in (0..levels.len() - 1).rev() {
            strides[j] = strides[j + 1] * levels[j + 1];
        }
        Ok(CategoricalSpace {
            levels,
            names,
            labels,
            strides,
            cells,
        })
    }

    pub fn item_count(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    /// Number of full cells, `Π K_j`.
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// Row-major index of a full cell (last item varies fastest).
    pub fn cell_index(&self, cell: &[usize]) -> usize {
        cell.iter().zip(&self.strides).map(|(x, s)| x * s).sum()
    }

    pub fn cell_at(&self, mut index: usize) -> Vec<usize> {
        let mut cell = vec![0; self.levels.len()];
        for j in (0..self.levels.len()).rev() {
            cell[j] = index % self.levels[j];
            index /= self.levels[j];
        }
        cell
    }

    pub fn check_cell(&self, cell: &[usize]) -> Result<()> {
        if cell.len() != self.levels.len() {
            return Err(invalid(format!(
                "cell has {} coordinates, expected {}",
                cell.len(),
                self.levels.len()
            )));
        }
        if let Some(j) = (0..cell.len()).find(|&j| cell[j] >= self.levels[j]) {
            return Err(invalid(format!(
                "level {} of item {} out of range 1..={}",
                cell[j] + 1,
                j + 1,
                self.levels[j]
            )));
        }
        Ok(())
    }

    /// All full cells in index order.
    pub fn cells(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.cells).map(|i| self.cell_at(i))
    }

    /// Resolve an item by name, by `x<j>`, or by 1-based position.
    pub fn item_index(&self, key: &str) -> Option<usize> {
        if let Some(j) = self.names.iter().position(|n| n == key) {
            return Some(j);
        }
        let digits = key.strip_prefix('x').unwrap_or(key);
        digits
            .parse::<usize>()
            .ok()
            .filter(|&j| j >= 1 && j <= self.levels.len())
            .map(|j| j - 1)
    }

    /// Resolve a level of `item` by label or 1-based position.
    pub fn level_index(&self, item: usize, key: &str) -> Option<usize> {
        if let Some(l) = self.labels[item].iter().position(|n| n == key) {
            return Some(l);
        }
        key.parse::<usize>()
            .ok()
            .filter(|&l| l >= 1 && l <= self.levels[item])
            .map(|l| l - 1)
    }

    pub(crate) fn check_pattern(&self, m: &Pattern) -> Result<()> {
        if m.len() != self.levels.len() {
            return Err(invalid(format!(
                "pattern {m} has length {}, expected {}",
                m.len(),
                self.levels.len()
            )));
        }
        Ok(())
    }

    /// Render a possibly partial cell with 1-based levels, `*` for missing.
    pub fn format_cell(&self, cell: &[Option<usize>]) -> String {
        let parts: Vec<String> = cell
            .iter()
            .map(|x| x.map_or_else(|| "*".to_string(), |l| (l + 1).to_string()))
            .collect();
        format!("({})", parts.join(","))
    }
}

/// Indexing of the observed cells `x_m̄` of one pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pattern: Pattern,
    /// Stride of each item within the observed-cell index; 0 for missing items.
    strides: Vec<usize>,
    size: usize,
}

impl Layout {
    pub fn new(space: &CategoricalSpace, m: &Pattern) -> Self {
        let p = space.item_count();
        let mut strides = vec![0; p];
        let mut size = 1;
        for j in (0..p).rev() {
            if !m.is_missing(j) {
                strides[j] = size;
                size *= space.levels()[j];
            }
        }
        Layout {
            pattern: m.clone(),
            strides,
            size,
        }
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Observed-cell index of a full cell; coordinates of missing items are ignored.
    pub fn index(&self, cell: &[usize]) -> usize {
        cell.iter().zip(&self.strides).map(|(x, s)| x * s).sum()
    }

    /// Index of an observed cell given as a full-length vector with `None`
    /// at missing coordinates.
    pub fn index_partial(&self, cell: &[Option<usize>]) -> Result<usize> {
        let mut idx = 0;
        for (j, x) in cell.iter().enumerate() {
            match (self.pattern.is_missing(j), x) {
                (true, None) => {}
                (false, Some(l)) => idx += l * self.strides[j],
                (true, Some(_)) => {
                    return Err(invalid(format!(
                        "item {} is missing under pattern {} but a level was given",
                        j + 1,
                        self.pattern
                    )))
                }
                (false, None) => {
                    return Err(invalid(format!(
                        "item {} is observed under pattern {} but no level was given",
                        j + 1,
                        self.pattern
                    )))
                }
            }
        }
        Ok(idx)
    }

    pub fn cell_at(&self, space: &CategoricalSpace, mut index: usize) -> Vec<Option<usize>> {
        let p = space.item_count();
        let mut cell = vec![None; p];
        for j in (0..p).rev() {
            if !self.pattern.is_missing(j) {
                let k = space.levels()[j];
                cell[j] = Some(index % k);
                index /= k;
            }
        }
        cell
    }

    /// Observed-cell index for every full cell, in full-cell index order.
    pub fn full_to_observed(&self, space: &CategoricalSpace) -> Vec<usize> {
        let p = space.item_count();
        let levels = space.levels();
        let mut out = Vec::with_capacity(space.cell_count());
        let mut digits = vec![0usize; p];
        let mut idx = 0usize;
        for _ in 0..space.cell_count() {
            out.push(idx);
            // odometer increment, last item fastest
            for j in (0..p).rev() {
                digits[j] += 1;
                idx += self.strides[j];
                if digits[j] < levels[j] {
                    break;
                }
                idx -= self.strides[j] * levels[j];
                digits[j] = 0;
            }
        }
        out
    }
}
