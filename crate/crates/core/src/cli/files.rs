//! JSON and CSV file formats for tables, sensitivity functions and grids.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::format::{format_float, to_json_string, CsvBuffer};
use crate::categorical::{CategoricalSpace, FullDataDistribution, Layout, ObservedDistribution};
use crate::continuous::{AxisGrid, GridSpec};
use crate::error::{Error, Result};
use crate::lattice::{Pattern, PatternSet};
use crate::posterior::ObservedCounts;
use crate::sensitivity::{GridAxis, SensitivityFunction, SensitivityGrid};

fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Observed,
    Counts,
}

/// A level given as a 1-based position or as a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelKey {
    Index(usize),
    Label(String),
}

impl LevelKey {
    fn resolve(&self, space: &CategoricalSpace, item: usize) -> Result<usize> {
        let found = match self {
            LevelKey::Index(l) => (*l >= 1 && *l <= space.levels()[item]).then(|| l - 1),
            LevelKey::Label(s) => space.level_index(item, s),
        };
        found.ok_or_else(|| input(format!("level {self:?} outside the domain of item {}", space.names()[item])))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellEntry {
    cell: Vec<Option<LevelKey>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternEntry {
    pattern: Pattern,
    cells: Vec<CellEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    kind: TableKind,
    levels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    items: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Vec<String>>>,
    patterns: Vec<PatternEntry>,
}

/// A categorical table read from JSON.
#[derive(Clone, Debug)]
pub enum Table {
    Observed(ObservedDistribution),
    Counts(ObservedCounts),
}

impl Table {
    pub fn space(&self) -> &CategoricalSpace {
        match self {
            Table::Observed(d) => d.space(),
            Table::Counts(c) => c.space(),
        }
    }

    /// The observed-data distribution, normalizing counts.
    pub fn observed(&self) -> Result<ObservedDistribution> {
        match self {
            Table::Observed(d) => Ok(d.clone()),
            Table::Counts(c) => c.to_observed(),
        }
    }
}

fn space_from(levels: Vec<usize>, items: Option<Vec<String>>, labels: Option<Vec<Vec<String>>>) -> Result<CategoricalSpace> {
    let default = CategoricalSpace::new(levels.clone())?;
    CategoricalSpace::with_labels(
        levels,
        items.unwrap_or_else(|| default.names().to_vec()),
        labels.unwrap_or_else(|| default.labels().to_vec()),
    )
}

pub fn parse_table(text: &str) -> Result<Table> {
    let file: TableFile = serde_json::from_str(text)?;
    let space = space_from(file.levels, file.items, file.labels)?;
    let p = space.item_count();
    let patterns = PatternSet::new(p, file.patterns.iter().map(|e| e.pattern.clone()))?;
    let layouts: Vec<Layout> = patterns.iter().map(|m| Layout::new(&space, m)).collect();
    let mut masses: Vec<Vec<f64>> = layouts.iter().map(|l| vec![0.0; l.size()]).collect();
    let mut counts: Vec<Vec<u64>> = layouts.iter().map(|l| vec![0; l.size()]).collect();
    for entry in &file.patterns {
        let pos = patterns.position(&entry.pattern).expect("listed pattern");
        let mut seen = HashSet::new();
        for c in &entry.cells {
            if c.cell.len() != p {
                return Err(input(format!("pattern {}: cell has {} entries, expected {p}", entry.pattern, c.cell.len())));
            }
            let mut cell = Vec::with_capacity(p);
            for (j, key) in c.cell.iter().enumerate() {
                match (key, entry.pattern.is_missing(j)) {
                    (None, true) => cell.push(None),
                    (Some(k), false) => cell.push(Some(k.resolve(&space, j)?)),
                    (None, false) => {
                        return Err(input(format!("pattern {}: item {} is observed but null", entry.pattern, j + 1)))
                    }
                    (Some(_), true) => {
                        return Err(input(format!("pattern {}: item {} is missing but has a value", entry.pattern, j + 1)))
                    }
                }
            }
            let idx = layouts[pos].index_partial(&cell)?;
            if !seen.insert(idx) {
                return Err(input(format!("pattern {}: duplicate cell {}", entry.pattern, space.format_cell(&cell))));
            }
            match (file.kind, c.mass, c.count) {
                (TableKind::Observed, Some(v), None) => masses[pos][idx] = v,
                (TableKind::Counts, None, Some(n)) => counts[pos][idx] = n,
                (TableKind::Observed, ..) => return Err(input("observed tables give each cell a \"mass\"")),
                (TableKind::Counts, ..) => return Err(input("count tables give each cell a \"count\"")),
            }
        }
    }
    match file.kind {
        TableKind::Observed => Ok(Table::Observed(ObservedDistribution::from_masses(space, patterns, masses)?)),
        TableKind::Counts => Ok(Table::Counts(ObservedCounts::new(space, patterns, counts)?)),
    }
}

fn table_file(space: &CategoricalSpace, patterns: &PatternSet, kind: TableKind, value: impl Fn(usize, usize) -> (Option<f64>, Option<u64>)) -> TableFile {
    let entries = patterns
        .iter()
        .enumerate()
        .map(|(pos, m)| {
            let layout = Layout::new(space, m);
            let cells = (0..layout.size())
                .map(|i| {
                    let (mass, count) = value(pos, i);
                    CellEntry {
                        cell: layout.cell_at(space, i).into_iter().map(|x| x.map(|l| LevelKey::Index(l + 1))).collect(),
                        mass,
                        count,
                    }
                })
                .collect();
            PatternEntry { pattern: m.clone(), cells }
        })
        .collect();
    TableFile {
        kind,
        levels: space.levels().to_vec(),
        items: Some(space.names().to_vec()),
        labels: Some(space.labels().to_vec()),
        patterns: entries,
    }
}

pub fn observed_to_json(dist: &ObservedDistribution) -> Result<String> {
    let file = table_file(dist.space(), dist.patterns(), TableKind::Observed, |pos, i| {
        (Some(dist.masses()[pos][i]), None)
    });
    to_json_string(&file)
}

pub fn counts_to_json(counts: &ObservedCounts) -> Result<String> {
    let file = table_file(counts.space(), counts.patterns(), TableKind::Counts, |pos, i| {
        (None, Some(counts.counts()[pos][i]))
    });
    to_json_string(&file)
}

fn resolve_item(space: &CategoricalSpace, key: &str) -> Result<usize> {
    space.item_index(key).ok_or_else(|| input(format!("unknown item {key:?}")))
}

fn resolve_reference(space: &CategoricalSpace, given: &BTreeMap<String, LevelKey>) -> Result<Vec<usize>> {
    let mut reference = vec![0; space.item_count()];
    for (item, level) in given {
        let j = resolve_item(space, item)?;
        reference[j] = level.resolve(space, j)?;
    }
    Ok(reference)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct XiFile {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    reference: BTreeMap<String, LevelKey>,
    #[serde(default)]
    offsets: BTreeMap<String, BTreeMap<String, f64>>,
}

fn check_additive(kind: &Option<String>) -> Result<()> {
    match kind.as_deref() {
        None | Some("additive") => Ok(()),
        Some(other) => Err(input(format!(
            "sensitivity functions of kind {other:?} are not supported; only additive offsets are"
        ))),
    }
}

/// Parse an additive sensitivity function. The reference level of each item
/// defaults to its first level.
pub fn parse_xi(text: &str, space: &CategoricalSpace) -> Result<SensitivityFunction> {
    let file: XiFile = serde_json::from_str(text)?;
    check_additive(&file.kind)?;
    let reference = resolve_reference(space, &file.reference)?;
    let mut assignments = Vec::new();
    for (item, levels) in &file.offsets {
        let j = resolve_item(space, item)?;
        for (level, &v) in levels {
            let l = LevelKey::Label(level.clone()).resolve(space, j)?;
            assignments.push((j, l, v));
        }
    }
    SensitivityFunction::from_assignments(space, reference, &assignments)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisEntry {
    item: String,
    level: LevelKey,
    values: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    reference: BTreeMap<String, LevelKey>,
    axes: Vec<AxisEntry>,
}

/// Parse a cross-product grid of additive offsets; the first axis varies
/// slowest.
pub fn parse_sensitivity_grid(text: &str, space: &CategoricalSpace) -> Result<SensitivityGrid> {
    let file: GridFile = serde_json::from_str(text)?;
    check_additive(&file.kind)?;
    let reference = resolve_reference(space, &file.reference)?;
    let axes = file
        .axes
        .iter()
        .map(|a| {
            let item = resolve_item(space, &a.item)?;
            Ok(GridAxis {
                item,
                level: a.level.resolve(space, item)?,
                values: a.values.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if axes.is_empty() {
        return Err(input("sensitivity grid has no axes"));
    }
    SensitivityGrid::cross_product(space, reference, axes)
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisEntryContinuous {
    lo: f64,
    hi: f64,
    points: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureFile {
    x1: AxisEntryContinuous,
    x2: AxisEntryContinuous,
}

/// Parse `{"x1": {"lo", "hi", "points"}, "x2": {...}}`.
pub fn parse_quadrature_grid(text: &str) -> Result<GridSpec> {
    let f: QuadratureFile = serde_json::from_str(text)?;
    Ok(GridSpec::new(
        AxisGrid::new(f.x1.lo, f.x1.hi, f.x1.points)?,
        AxisGrid::new(f.x2.lo, f.x2.hi, f.x2.points)?,
    ))
}

/// `g(x, m)` for every full cell and pattern: item columns, `m`, `g`.
pub fn full_data_csv(g: &FullDataDistribution) -> Result<Vec<u8>> {
    let space = g.space();
    let mut header: Vec<String> = space.names().to_vec();
    header.push("m".into());
    header.push("g".into());
    let mut out = CsvBuffer::new(&header)?;
    for m in g.patterns().iter() {
        for cell in space.cells() {
            let mut row: Vec<String> = cell.iter().enumerate().map(|(j, &l)| space.labels()[j][l].clone()).collect();
            row.push(m.to_string());
            row.push(format_float(g.mass(&cell, m)));
            out.row(&row)?;
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::testing::fixture_p2;

    #[test]
    fn observed_json_round_trip_is_exact() {
        let f = fixture_p2();
        let text = observed_to_json(&f).unwrap();
        let Table::Observed(back) = parse_table(&text).unwrap() else {
            panic!("kind changed")
        };
        for m in f.patterns().iter() {
            let a = f.pattern_masses(m).unwrap();
            let b = back.pattern_masses(m).unwrap();
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn labelled_cells_and_validation() {
        let text = r#"{"kind":"counts","levels":[2,2],"items":["a","b"],
            "labels":[["yes","no"],["yes","no"]],
            "patterns":[{"pattern":"00","cells":[{"cell":["yes","no"],"count":3},{"cell":[2,2],"count":1}]},
                        {"pattern":"01","cells":[{"cell":["no",null],"count":2}]}]}"#;
        let Table::Counts(c) = parse_table(text).unwrap() else { panic!() };
        assert_eq!(c.counts()[0], vec![0, 3, 0, 1]);
        assert_eq!(c.counts()[1], vec![0, 2]);
        let bad = text.replace("[\"no\",null]", "[\"no\",\"yes\"]");
        assert!(parse_table(&bad).is_err());
        let dup = text.replace("\"cell\":[2,2]", "\"cell\":[\"yes\",\"no\"]");
        assert!(parse_table(&dup).unwrap_err().to_string().contains("duplicate"));
        let unknown = text.replace("\"cell\":[2,2]", "\"cell\":[3,2]");
        assert!(parse_table(&unknown).is_err());
    }

    #[test]
    fn xi_and_grid_files() {
        let space = CategoricalSpace::new(vec![2, 2, 2]).unwrap();
        let xi = parse_xi(r#"{"offsets":{"x1":{"2":-5}}}"#, &space).unwrap();
        assert_eq!(xi.offset(0, 1), -5.0);
        assert_eq!(xi.reference(), &[0, 0, 0]);
        assert!(parse_xi(r#"{"kind":"general","offsets":{}}"#, &space).is_err());
        assert!(parse_xi(r#"{"offsets":{"x1":{"1":1}}}"#, &space).is_err());
        let grid = parse_sensitivity_grid(
            r#"{"axes":[{"item":"x1","level":2,"values":[-5,-1,0,1,5]},{"item":"x3","level":"2","values":[-1,0,1]}]}"#,
            &space,
        )
        .unwrap();
        assert_eq!(grid.len(), 15);
        assert_eq!(grid.points()[0].label, "x1:2=-5;x3:2=-1");
        assert_eq!(grid.points()[1].label, "x1:2=-5;x3:2=0");
    }

    #[test]
    fn quadrature_file() {
        let g = parse_quadrature_grid(r#"{"x1":{"lo":0,"hi":1,"points":64},"x2":{"lo":-1,"hi":1,"points":40}}"#).unwrap();
        assert_eq!(g.x2.points, 40);
        assert!(parse_quadrature_grid(r#"{"x1":{"lo":1,"hi":0,"points":64},"x2":{"lo":-1,"hi":1,"points":40}}"#).is_err());
    }
}
