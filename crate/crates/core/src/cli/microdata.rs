//! CSV microdata: schema, recoding, row filters and aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::categorical::{CategoricalSpace, Layout, MaskedRecord, ObservedDistribution};
use crate::continuous::{WeightedRecord, WeightedSample};
use crate::error::{Error, Result};
use crate::lattice::{Pattern, PatternSet};
use crate::posterior::ObservedCounts;

fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

fn row_error(line: u64, msg: impl Into<String>) -> Error {
    Error::Row {
        line,
        message: msg.into(),
    }
}

/// One categorical item of a schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemSchema {
    pub name: String,
    /// CSV column; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    pub levels: Vec<String>,
    /// Raw value → replacement, applied before the missing check.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub recode: BTreeMap<String, String>,
}

impl ItemSchema {
    fn column(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.name)
    }
}

/// Column schema for categorical microdata.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default)]
    pub items: Vec<ItemSchema>,
    /// Extra tokens read as missing, on top of the empty string.
    #[serde(default)]
    pub missing: Vec<String>,
    /// Recode applied to every item column before the per-item map.
    #[serde(default)]
    pub recode: BTreeMap<String, String>,
    #[serde(default)]
    pub weight: Option<String>,
}

impl Schema {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Ge,
    Le,
    Ne,
    Eq,
    Gt,
    Lt,
}

/// A row filter `column<op>value` with `op` one of `>= <= != == = > <`.
#[derive(Clone, Debug, PartialEq)]
pub struct Filter {
    column: String,
    op: Op,
    value: String,
}

impl Filter {
    pub fn parse(spec: &str) -> Result<Self> {
        const OPS: [(&str, Op); 7] = [
            (">=", Op::Ge),
            ("<=", Op::Le),
            ("!=", Op::Ne),
            ("==", Op::Eq),
            ("=", Op::Eq),
            (">", Op::Gt),
            ("<", Op::Lt),
        ];
        let (pos, tok, op) = OPS
            .iter()
            .filter_map(|&(tok, op)| spec.find(tok).map(|i| (i, tok, op)))
            .min_by_key(|&(i, tok, _)| (i, std::cmp::Reverse(tok.len())))
            .ok_or_else(|| input(format!("filter {spec:?} has no comparison operator")))?;
        let column = spec[..pos].trim().to_string();
        let value = spec[pos + tok.len()..].trim().to_string();
        if column.is_empty() {
            return Err(input(format!("filter {spec:?} names no column")));
        }
        Ok(Filter { column, op, value })
    }

    fn keeps(&self, raw: &str, line: u64) -> Result<bool> {
        let ord = match (raw.parse::<f64>(), self.value.parse::<f64>()) {
            (Ok(a), Ok(b)) => a.partial_cmp(&b),
            _ => match self.op {
                Op::Eq | Op::Ne => Some(raw.cmp(&self.value)),
                _ => {
                    return Err(row_error(
                        line,
                        format!("column {:?}: {raw:?} is not numeric", self.column),
                    ))
                }
            },
        };
        let Some(ord) = ord else { return Ok(false) };
        use std::cmp::Ordering::*;
        Ok(match self.op {
            Op::Ge => ord != Less,
            Op::Le => ord != Greater,
            Op::Ne => ord != Equal,
            Op::Eq => ord == Equal,
            Op::Gt => ord == Greater,
            Op::Lt => ord == Less,
        })
    }
}

/// How to read a microdata file.
#[derive(Clone, Debug, Default)]
pub struct ReadOptions {
    pub schema: Option<Schema>,
    /// Item columns, overriding the schema's and the default.
    pub columns: Option<Vec<String>>,
    pub weight: Option<String>,
    /// Token read as missing besides the empty string.
    pub missing_token: Option<String>,
    pub filters: Vec<Filter>,
}

impl ReadOptions {
    fn weight_column(&self) -> Option<&str> {
        self.weight
            .as_deref()
            .or_else(|| self.schema.as_ref().and_then(|s| s.weight.as_deref()))
    }

    fn is_missing(&self, v: &str) -> bool {
        v.is_empty()
            || self.missing_token.as_deref().unwrap_or("NA") == v
            || self.schema.as_ref().is_some_and(|s| s.missing.iter().any(|t| t == v))
    }
}

/// Header plus parsed rows that passed the filters, each with its line.
struct RawTable {
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl RawTable {
    fn read(text: &str, opts: &ReadOptions) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(input("input file is empty"));
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let lookup = |c: &str| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| input(format!("no column {c:?} in header")))
        };
        let filters = opts
            .filters
            .iter()
            .map(|f| Ok((lookup(&f.column)?, f)))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut keep = true;
            for (c, f) in &filters {
                let v = rec.get(*c).unwrap_or("");
                if opts.is_missing(v) || !f.keeps(v, line)? {
                    keep = false;
                    break;
                }
            }
            if keep {
                rows.push((line, rec));
            }
        }
        if rows.is_empty() {
            return Err(input("no data rows"));
        }
        Ok(RawTable { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| input(format!("no column {name:?} in header")))
    }

    fn weights(&self, opts: &ReadOptions) -> Result<Option<Vec<f64>>> {
        let Some(name) = opts.weight_column() else { return Ok(None) };
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|(line, rec)| {
                let raw = rec.get(c).unwrap_or("");
                match raw.parse::<f64>() {
                    Ok(w) if w > 0.0 && w.is_finite() => Ok(w),
                    _ => Err(row_error(*line, format!("weight {raw:?} is not a positive number"))),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Categorical microdata after recoding: one masked record per row.
#[derive(Clone, Debug)]
pub struct CategoricalData {
    pub space: CategoricalSpace,
    pub records: Vec<MaskedRecord>,
    /// CSV line of each record.
    pub lines: Vec<u64>,
    /// `None` when the file has no weight column.
    pub weights: Option<Vec<f64>>,
}

fn sort_levels(values: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = values.into_iter().collect();
    if v.iter().all(|s| s.parse::<f64>().is_ok()) {
        v.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    v
}

/// Read categorical microdata. Without a schema, every non-weight column is
/// an item and its levels are the values seen, in numeric order when all are
/// numbers and lexicographic order otherwise.
pub fn read_categorical(text: &str, opts: &ReadOptions) -> Result<CategoricalData> {
    let table = RawTable::read(text, opts)?;
    let weight_col = opts.weight_column();
    let schema_items: Vec<ItemSchema> = match (&opts.columns, &opts.schema) {
        (Some(cols), Some(schema)) => cols
            .iter()
            .map(|c| {
                schema
                    .items
                    .iter()
                    .find(|i| i.name == *c || i.column() == c)
                    .cloned()
                    .ok_or_else(|| input(format!("column {c:?} is not in the schema")))
            })
            .collect::<Result<_>>()?,
        (None, Some(schema)) if !schema.items.is_empty() => schema.items.clone(),
        (cols, _) => {
            let names: Vec<String> = match cols {
                Some(c) => c.clone(),
                None => table.header.iter().filter(|h| Some(h.as_str()) != weight_col).cloned().collect(),
            };
            names
                .into_iter()
                .map(|name| ItemSchema {
                    name,
                    column: None,
                    levels: Vec::new(),
                    recode: BTreeMap::new(),
                })
                .collect()
        }
    };
    if schema_items.is_empty() {
        return Err(input("no item columns"));
    }
    let global = opts.schema.as_ref().map(|s| s.recode.clone()).unwrap_or_default();
    let cols = schema_items.iter().map(|i| table.column(i.column())).collect::<Result<Vec<_>>>()?;

    let mut raw: Vec<Vec<Option<String>>> = Vec::with_capacity(table.rows.len());
    for (_, rec) in &table.rows {
        let values = schema_items
            .iter()
            .zip(&cols)
            .map(|(item, &c)| {
                let mut v = rec.get(c).unwrap_or("").to_string();
                if let Some(r) = global.get(&v) {
                    v = r.clone();
                }
                if let Some(r) = item.recode.get(&v) {
                    v = r.clone();
                }
                (!opts.is_missing(&v)).then_some(v)
            })
            .collect();
        raw.push(values);
    }

    if !raw.iter().any(|r| r.iter().all(Option::is_some)) {
        return Err(input("no row observes every item; the all-observed pattern is required"));
    }
    let labels: Vec<Vec<String>> = schema_items
        .iter()
        .enumerate()
        .map(|(j, item)| {
            if item.levels.is_empty() {
                sort_levels(raw.iter().filter_map(|r| r[j].clone()).collect())
            } else {
                item.levels.clone()
            }
        })
        .collect();
    let space = CategoricalSpace::with_labels(
        labels.iter().map(Vec::len).collect(),
        schema_items.iter().map(|i| i.name.clone()).collect(),
        labels.clone(),
    )?;
    let index: Vec<HashMap<&str, usize>> = labels
        .iter()
        .map(|ls| ls.iter().enumerate().map(|(l, s)| (s.as_str(), l)).collect())
        .collect();

    let mut records = Vec::with_capacity(raw.len());
    for ((line, _), values) in table.rows.iter().zip(&raw) {
        let mut cell = Vec::with_capacity(values.len());
        for (j, v) in values.iter().enumerate() {
            cell.push(match v {
                None => None,
                Some(s) => Some(*index[j].get(s.as_str()).ok_or_else(|| {
                    row_error(*line, format!("level {s:?} outside the domain of item {}", space.names()[j]))
                })?),
            });
        }
        records.push(MaskedRecord {
            pattern: Pattern::new(cell.iter().map(Option::is_none).collect()),
            values: cell,
        });
    }
    Ok(CategoricalData {
        space,
        lines: table.rows.iter().map(|(l, _)| *l).collect(),
        weights: table.weights(opts)?,
        records,
    })
}

fn accumulate(data: &CategoricalData) -> Result<(PatternSet, Vec<Layout>, Vec<Vec<f64>>)> {
    let p = data.space.item_count();
    let mut seen: Vec<Pattern> = data.records.iter().map(|r| r.pattern.clone()).collect();
    seen.sort_by_key(|m| m.to_string());
    seen.dedup();
    let patterns = PatternSet::new(p, seen)?;
    let layouts: Vec<Layout> = patterns.iter().map(|m| Layout::new(&data.space, m)).collect();
    let mut totals: Vec<Vec<f64>> = layouts.iter().map(|l| vec![0.0; l.size()]).collect();
    for (i, r) in data.records.iter().enumerate() {
        let pos = patterns.position(&r.pattern).expect("collected pattern");
        let w = data.weights.as_ref().map_or(1.0, |w| w[i]);
        totals[pos][layouts[pos].index_partial(&r.values)?] += w;
    }
    Ok((patterns, layouts, totals))
}

/// Unweighted counts per realized pattern and observed cell.
pub fn aggregate(data: &CategoricalData) -> Result<ObservedCounts> {
    if data.weights.is_some() {
        return Err(input("counts cannot be formed from weighted rows; drop the weight column"));
    }
    let (patterns, _, totals) = accumulate(data)?;
    let counts = totals.into_iter().map(|v| v.into_iter().map(|x| x as u64).collect()).collect();
    ObservedCounts::new(data.space.clone(), patterns, counts)
}

/// Weighted empirical observed-data distribution.
pub fn weighted_observed(data: &CategoricalData) -> Result<ObservedDistribution> {
    let (patterns, _, totals) = accumulate(data)?;
    ObservedDistribution::from_weights(data.space.clone(), patterns, totals)
}

/// Read two continuous columns (default `x1`, `x2`, else the first two
/// non-weight columns).
pub fn read_bivariate(text: &str, opts: &ReadOptions) -> Result<(WeightedSample, [String; 2])> {
    let table = RawTable::read(text, opts)?;
    let weight_col = opts.weight_column();
    let names: Vec<String> = match &opts.columns {
        Some(c) => c.clone(),
        None if table.header.iter().any(|h| h == "x1") && table.header.iter().any(|h| h == "x2") => {
            vec!["x1".into(), "x2".into()]
        }
        None => table
            .header
            .iter()
            .filter(|h| Some(h.as_str()) != weight_col)
            .take(2)
            .cloned()
            .collect(),
    };
    if names.len() != 2 {
        return Err(input(format!("need exactly two value columns, got {}", names.len())));
    }
    let c = [table.column(&names[0])?, table.column(&names[1])?];
    let weights = table.weights(opts)?;
    let mut records = Vec::with_capacity(table.rows.len());
    for (i, (line, rec)) in table.rows.iter().enumerate() {
        let mut x = [None, None];
        for a in 0..2 {
            let raw = rec.get(c[a]).unwrap_or("");
            if opts.is_missing(raw) {
                continue;
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => x[a] = Some(v),
                _ => return Err(row_error(*line, format!("column {:?}: {raw:?} is not a finite number", names[a]))),
            }
        }
        records.push(WeightedRecord::new(x[0], x[1], weights.as_ref().map_or(1.0, |w| w[i])));
    }
    let [a, b]: [String; 2] = names.try_into().expect("two names");
    Ok((WeightedSample::new(records)?, [a, b]))
}
