//! Mode pipelines, run manifests and replay.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::files::{
    full_data_csv, observed_to_json, parse_quadrature_grid, parse_sensitivity_grid, parse_table, parse_xi, Table,
};
use super::format::{format_float, sha256_hex, to_json_string, write_atomic, CsvBuffer};
use super::microdata::{aggregate, read_bivariate, read_categorical, weighted_observed, Filter, ReadOptions, Schema};
use crate::categorical::{construct, simulate, CategoricalSpace, Event, FullDataDistribution, Functional, ObservedDistribution};
use crate::continuous::{fit_bivariate, pattern_at, weighted_quantile, PATTERN_ORDER};
use crate::diagnostics::{convex_feasibility, hausman_wise_closed_form, Overall, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::lattice::Pattern;
use crate::monotone::{build_monotone, record_pattern, sequential_log_odds, DropoutTime};
use crate::posterior::{
    push_forward, push_forward_with, sample_posterior, summarize, DirichletSpec, FunctionalTable, ObservedCounts,
    PosteriorDraws, DEFAULT_LEVELS,
};
use crate::sensitivity::{run_grid, SensitivityFunction, SensitivityGrid};

pub const DEFAULT_DRAWS: usize = 5000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_RECORDS: usize = 1000;
pub const DEFAULT_CURVE_POINTS: usize = 101;
pub const DEFAULT_MISSING_TOKEN: &str = "NA";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Categorical,
    Posterior,
    Sensitivity,
    Continuous,
    Monotone,
    Diagnose,
    Simulate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Categorical => "categorical",
            Mode::Posterior => "posterior",
            Mode::Sensitivity => "sensitivity",
            Mode::Continuous => "continuous",
            Mode::Monotone => "monotone",
            Mode::Diagnose => "diagnose",
            Mode::Simulate => "simulate",
        }
    }
}

/// Everything a run depends on besides the contents of its input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub input: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub weights: Option<String>,
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    #[serde(default)]
    pub filters: Vec<String>,
    #[serde(default)]
    pub missing_token: Option<String>,
    #[serde(default)]
    pub prior: Option<f64>,
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub xi: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<PathBuf>,
    #[serde(default)]
    pub functionals: Vec<String>,
    #[serde(default)]
    pub records: Option<usize>,
    #[serde(default)]
    pub j: Option<String>,
    #[serde(default)]
    pub k: Option<String>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub hausman_wise: bool,
    #[serde(default)]
    pub dump_grid: bool,
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub curve_points: Option<usize>,
}

impl RunConfig {
    pub fn new(mode: Mode, input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            mode,
            input: input.into(),
            out: out.into(),
            schema: None,
            weights: None,
            columns: None,
            filters: Vec::new(),
            missing_token: None,
            prior: None,
            draws: None,
            seed: None,
            xi: None,
            grid: None,
            functionals: Vec::new(),
            records: None,
            j: None,
            k: None,
            tol: None,
            hausman_wise: false,
            dump_grid: false,
            baseline: false,
            curve_points: None,
        }
    }

    /// Reject options that the mode does not use and check required ones.
    pub fn validate(&self) -> Result<()> {
        use Mode::*;
        let used: &[(&str, bool, &[Mode])] = &[
            ("--prior", self.prior.is_some(), &[Posterior, Sensitivity]),
            ("--draws", self.draws.is_some(), &[Posterior, Sensitivity]),
            ("--seed", self.seed.is_some(), &[Posterior, Sensitivity, Simulate]),
            ("--xi", self.xi.is_some(), &[Categorical, Posterior, Sensitivity, Simulate]),
            ("--grid", self.grid.is_some(), &[Sensitivity, Continuous]),
            ("--functional", !self.functionals.is_empty(), &[Categorical, Posterior, Sensitivity, Monotone]),
            ("-n/--records", self.records.is_some(), &[Simulate]),
            ("--j", self.j.is_some(), &[Diagnose]),
            ("--k", self.k.is_some(), &[Diagnose]),
            ("--tol", self.tol.is_some(), &[Diagnose]),
            ("--hausman-wise", self.hausman_wise, &[Diagnose]),
            ("--dump-grid", self.dump_grid, &[Continuous]),
            ("--curve-points", self.curve_points.is_some(), &[Continuous]),
            ("--baseline", self.baseline, &[Categorical, Posterior]),
        ];
        for (flag, given, modes) in used {
            if *given && !modes.contains(&self.mode) {
                return Err(invalid_config(format!("{flag} does not apply to mode {}", self.mode.name())));
            }
        }
        match self.mode {
            Sensitivity if self.xi.is_some() == self.grid.is_some() => {
                Err(invalid_config("sensitivity needs exactly one of --xi and --grid"))
            }
            Diagnose if self.j.is_none() || self.k.is_none() => Err(invalid_config("diagnose needs --j and --k")),
            Posterior | Sensitivity if self.draws == Some(0) => Err(invalid_config("--draws must be positive")),
            Simulate if self.records == Some(0) => Err(invalid_config("-n must be positive")),
            Continuous if self.curve_points.is_some_and(|n| n < 2) => {
                Err(invalid_config("--curve-points must be at least 2"))
            }
            _ => Ok(()),
        }
    }

    fn read_options(&self, schema: Option<Schema>) -> Result<ReadOptions> {
        Ok(ReadOptions {
            schema,
            columns: self.columns.clone(),
            weight: self.weights.clone(),
            missing_token: self.missing_token.clone(),
            filters: self.filters.iter().map(|f| Filter::parse(f)).collect::<Result<_>>()?,
        })
    }
}

fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Result of a completed run. `exit_code` is nonzero when the run finished
/// but its finding calls for one (a refuted assumption).
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub outputs: Vec<PathBuf>,
    pub exit_code: i32,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub defaults: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub exit_code: i32,
    pub notes: Vec<String>,
}

/// Files read by a run, hashed as they are loaded.
struct Inputs {
    digests: Vec<FileDigest>,
}

impl Inputs {
    fn read(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        self.digests.push(FileDigest {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).map_err(|_| Error::Input(format!("{} is not UTF-8", path.display())))
    }
}

/// Output files, written once the pipeline has succeeded.
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    defaults: serde_json::Map<String, serde_json::Value>,
    notes: Vec<String>,
    exit_code: i32,
}

impl Outputs {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn default(&mut self, key: &str, value: serde_json::Value) {
        self.defaults.insert(key.to_string(), value);
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).map_err(|e| Error::Input(format!("cannot resolve {}: {e}", path.display())))
}

/// Execute the mode's pipeline and write its outputs and manifest to
/// `config.out`.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let mut config = config.clone();
    config.input = absolute(&config.input)?;
    for p in [&mut config.schema, &mut config.xi, &mut config.grid].into_iter().flatten() {
        *p = absolute(p)?;
    }
    let mut inputs = Inputs { digests: Vec::new() };
    let mut out = Outputs {
        files: Vec::new(),
        defaults: serde_json::Map::new(),
        notes: Vec::new(),
        exit_code: 0,
    };
    match config.mode {
        Mode::Categorical => categorical(&config, &mut inputs, &mut out)?,
        Mode::Posterior => posterior(&config, &mut inputs, &mut out)?,
        Mode::Sensitivity => sensitivity(&config, &mut inputs, &mut out)?,
        Mode::Continuous => continuous(&config, &mut inputs, &mut out)?,
        Mode::Monotone => monotone(&config, &mut inputs, &mut out)?,
        Mode::Diagnose => diagnose(&config, &mut inputs, &mut out)?,
        Mode::Simulate => simulate_mode(&config, &mut inputs, &mut out)?,
    }

    fs::create_dir_all(&config.out)?;
    let mut written = Vec::new();
    let mut digests = Vec::new();
    for (name, bytes) in &out.files {
        let path = config.out.join(name);
        write_atomic(&path, bytes)?;
        digests.push(FileDigest {
            role: "output".into(),
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
        });
        written.push(path);
    }
    let seed = uses_seed(&config).then(|| config.seed.unwrap_or(DEFAULT_SEED));
    let manifest = Manifest {
        tool: "icin".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: config.mode,
        seed,
        defaults: serde_json::Value::Object(out.defaults),
        inputs: inputs.digests,
        outputs: digests,
        exit_code: out.exit_code,
        notes: out.notes.clone(),
        config,
    };
    let path = manifest.config.out.join(MANIFEST);
    write_atomic(&path, to_json_string(&manifest)?.as_bytes())?;
    written.push(path);
    Ok(RunOutcome {
        outputs: written,
        exit_code: out.exit_code,
        notes: out.notes,
    })
}

fn uses_seed(config: &RunConfig) -> bool {
    match config.mode {
        Mode::Posterior | Mode::Simulate => true,
        Mode::Sensitivity => config.draws.is_some(),
        _ => false,
    }
}

/// Re-run the configuration recorded in a manifest into `out`, checking that
/// the inputs are unchanged and that every output is reproduced byte for byte.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<RunOutcome> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    for d in &manifest.inputs {
        let bytes = fs::read(&d.path).map_err(|e| Error::Input(format!("cannot read {}: {e}", d.path.display())))?;
        if sha256_hex(&bytes) != d.sha256 {
            return Err(Error::Input(format!("{} changed since the recorded run", d.path.display())));
        }
    }
    let mut config = manifest.config.clone();
    config.out = out.to_path_buf();
    let outcome = run(&config)?;
    for d in &manifest.outputs {
        let bytes = fs::read(out.join(&d.path))?;
        if sha256_hex(&bytes) != d.sha256 {
            return Err(Error::Invariant(format!("{} was not reproduced", d.path.display())));
        }
    }
    Ok(outcome)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load_schema(config: &RunConfig, inputs: &mut Inputs) -> Result<Option<Schema>> {
    config
        .schema
        .as_ref()
        .map(|p| Schema::parse(&inputs.read("schema", p)?))
        .transpose()
}

/// A JSON table, or CSV microdata (weighted rows give an observed
/// distribution, unweighted rows give counts).
fn load_table(config: &RunConfig, inputs: &mut Inputs) -> Result<Table> {
    if is_json(&config.input) {
        return parse_table(&inputs.read("input", &config.input)?);
    }
    let schema = load_schema(config, inputs)?;
    let text = inputs.read("input", &config.input)?;
    let data = read_categorical(&text, &config.read_options(schema)?)?;
    if data.weights.is_some() {
        Ok(Table::Observed(weighted_observed(&data)?))
    } else {
        Ok(Table::Counts(aggregate(&data)?))
    }
}

fn load_counts(config: &RunConfig, inputs: &mut Inputs) -> Result<ObservedCounts> {
    match load_table(config, inputs)? {
        Table::Counts(c) => Ok(c),
        Table::Observed(_) => Err(Error::Input(format!(
            "mode {} needs counts: a JSON table of kind \"counts\" or unweighted microdata",
            config.mode.name()
        ))),
    }
}

fn load_xi(config: &RunConfig, inputs: &mut Inputs, space: &CategoricalSpace) -> Result<Option<SensitivityFunction>> {
    config
        .xi
        .as_ref()
        .map(|p| parse_xi(&inputs.read("xi", p)?, space))
        .transpose()
}

/// Declared functionals, or the marginal probability of every level.
fn functionals(config: &RunConfig, space: &CategoricalSpace, out: &mut Outputs) -> Result<Vec<Functional>> {
    if !config.functionals.is_empty() {
        return config.functionals.iter().map(|f| Functional::parse(f, space)).collect();
    }
    let mut fs = Vec::new();
    for j in 0..space.item_count() {
        for l in 0..space.levels()[j] {
            fs.push(Functional::new(
                format!("{}={}", space.names()[j], space.labels()[j][l]),
                Event::new(vec![(j, l)]),
            ));
        }
    }
    out.default("functionals", json!("marginal probability of every level"));
    Ok(fs)
}

fn event_probability(g: &FullDataDistribution, event: &Event) -> f64 {
    g.event_probability(|c| event.contains(c))
}

/// Functional values among complete cases, `f(x, 0_p) / π_{0_p}`.
fn complete_case(observed: &ObservedDistribution, fs: &[Functional]) -> Vec<f64> {
    let space = observed.space();
    let m0 = Pattern::complete(space.item_count());
    let masses = observed.pattern_masses(&m0).expect("complete pattern present");
    let total: f64 = masses.iter().sum();
    fs.iter()
        .map(|f| {
            space
                .cells()
                .zip(masses)
                .filter(|(c, _)| f.event.contains(c))
                .map(|(_, v)| v)
                .sum::<f64>()
                / total
        })
        .collect()
}

fn categorical(config: &RunConfig, inputs: &mut Inputs, out: &mut Outputs) -> Result<()> {
    let observed = load_table(config, inputs)?.observed()?;
    let xi = load_xi(config, inputs, observed.space())?;
    let g = construct(&observed, xi.as_ref())?;
    let fs = functionals(config, observed.space(), out)?;
    out.add("observed.json", observed_to_json(&observed)?.into_bytes());
    out.add("full_data.csv", full_data_csv(&g)?);
    let mut header = vec!["functional", "value"];
    if config.baseline {
        header.push("complete_case");
    }
    let mut csv = CsvBuffer::new(&header)?;
    let cc = complete_case(&observed, &fs);
    for (i, f) in fs.iter().enumerate() {
        let mut row = vec![f.name.clone(), format_float(event_probability(&g, &f.event))];
        if config.baseline {
            row.push(format_float(cc[i]));
        }
        csv.row(&row)?;
    }
    out.add("functionals.csv", csv.into_bytes()?);
    Ok(())
}

fn draw_posterior(config: &RunConfig, counts: &ObservedCounts, out: &mut Outputs) -> Result<PosteriorDraws> {
    let prior = match config.prior {
        Some(a) => DirichletSpec::symmetric(a)?,
        None => {
            let alpha = 1.0 / counts.cell_count() as f64;
            out.default("prior", json!(alpha));
            DirichletSpec::symmetric(alpha)?
        }
    };
    let n = config.draws.unwrap_or_else(|| {
        out.default("draws", json!(DEFAULT_DRAWS));
        DEFAULT_DRAWS
    });
    let seed = config.seed.unwrap_or_else(|| {
        out.default("seed", json!(DEFAULT_SEED));
        DEFAULT_SEED
    });
    sample_posterior(counts, &prior, n, seed)
}

fn summary_header(prefix: &[String]) -> Vec<String> {
    let mut h = prefix.to_vec();
    h.push("functional".into());
    h.push("mean".into());
    h.extend(DEFAULT_LEVELS.iter().map(|q| format!("q{q}")));
    h
}

fn write_summary(csv: &mut CsvBuffer, prefix: &[String], table: &FunctionalTable) -> Result<()> {
    for s in summarize(table, &DEFAULT_LEVELS)? {
        let mut row = prefix.to_vec();
        row.push(s.name);
        row.push(format_float(s.mean));
        row.extend(s.quantiles.iter().map(|(_, v)| format_float(*v)));
        csv.row(&row)?;
    }
    Ok(())
}

fn posterior(config: &RunConfig, inputs: &mut Inputs, out: &mut Outputs) -> Result<()> {
    let counts = load_counts(config, inputs)?;
    let xi = load_xi(config, inputs, counts.space())?;
    let fs = functionals(config, counts.space(), out)?;
    let draws = draw_posterior(config, &counts, out)?;
    let mut table = push_forward(&draws, xi.as_ref(), &fs)?;
    if config.baseline {
        let cc = push_forward_with(&draws, |d| Ok(complete_case(d, &fs)))?;
        table.names.extend(fs.iter().map(|f| format!("{}@complete-case", f.name)));
        for (row, extra) in table.rows.iter_mut().zip(cc) {
            row.extend(extra);
        }
    }
    let mut csv = CsvBuffer::new(["draw", "functional", "value"])?;
    for (j, name) in table.names.iter().enumerate() {
        for (d, row) in table.rows.iter().enumerate() {
            csv.row([(d + 1).to_string(), name.clone(), format_float(row[j])])?;
        }
    }
    out.add("draws.csv", csv.into_bytes()?);
    let mut summary = CsvBuffer::new(summary_header(&[]))?;
    write_summary(&mut summary, &[], &table)?;
    out.add("summary.csv", summary.into_bytes()?);
    Ok(())
}

fn sensitivity(config: &RunConfig, inputs: &mut Inputs, out: &mut Outputs) -> Result<()> {
    let table = load_table(config, inputs)?;
    let space = table.space().clone();
    let grid = match (&config.grid, load_xi(config, inputs, &space)?) {
        (Some(p), _) => parse_sensitivity_grid(&inputs.read("grid", p)?, &space)?,
        (None, Some(xi)) => SensitivityGrid::new(vec![("xi".into(), xi)])?,
        (None, None) => unreachable!("validated"),
    };
    let fs = functionals(config, &space, out)?;
    let axis_names: Vec<String> = grid
        .axes()
        .iter()
        .map(|a| format!("{}:{}", space.names()[a.item], space.labels()[a.item][a.level]))
        .collect();
    let mut prefix_header = axis_names.clone();
    prefix_header.push("point".into());
    let prefix = |coords: &[f64], label: &str| -> Vec<String> {
        let mut v: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
        v.push(label.to_string());
        v
    };
    let mut errors = CsvBuffer::new(["point", "error"])?;
    let mut failed = 0;

    if config.draws.is_none() {
        let observed = table.observed()?;
        let mut header = prefix_header.clone();
        header.extend(["functional".into(), "value".into()]);
        let mut csv = CsvBuffer::new(&header)?;
        for row in run_grid(&observed, &grid, &fs) {
            match row.values {
                Ok(values) => {
                    for (f, v) in fs.iter().zip(values) {
                        let mut r = prefix(&row.coords, &row.label);
                        r.push(f.name.clone());
                        r.push(format_float(v));
                        csv.row(&r)?;
                    }
                }
                Err(e) => {
                    failed += 1;
                    errors.row([row.label.clone(), e])?;
                }
            }
        }
        out.add("sensitivity.csv", csv.into_bytes()?);
    } else {
        let counts = match table {
            Table::Counts(c) => c,
            Table::Observed(_) => {
                return Err(Error::Input("posterior sensitivity needs counts".into()));
            }
        };
        let draws = draw_posterior(config, &counts, out)?;
        let mut header = prefix_header.clone();
        header.extend(["functional".into(), "draw".into(), "value".into()]);
        let mut csv = CsvBuffer::new(&header)?;
        let mut summary = CsvBuffer::new(summary_header(&prefix_header))?;
        for point in grid.points() {
            let pre = prefix(&point.coords, &point.label);
            match push_forward(&draws, Some(&point.xi), &fs) {
                Ok(t) => {
                    for (j, f) in fs.iter().enumerate() {
                        for (d, row) in t.rows.iter().enumerate() {
                            let mut r = pre.clone();
                            r.extend([f.name.clone(), (d + 1).to_string(), format_float(row[j])]);
                            csv.row(&r)?;
                        }
                    }
                    write_summary(&mut summary, &pre, &t)?;
                }
                Err(e) => {
                    failed += 1;
                    errors.row([point.label.clone(), e.to_string()])?;
                }
            }
        }
        out.add("sensitivity.csv", csv.into_bytes()?);
        out.add("sensitivity_summary.csv", summary.into_bytes()?);
    }
    if failed > 0 {
        out.notes.push(format!("{failed} of {} grid points failed; see errors.csv", grid.len()));
        out.add("errors.csv", errors.into_bytes()?);
    }
    Ok(())
}

fn simulate_mode(config: &RunConfig, inputs: &mut Inputs, out: &mut Outputs) -> Result<()> {
    let observed = load_table(config, inputs)?.observed()?;
    let xi = load_xi(config, inputs, observed.space())?;
    let g = construct(&observed, xi.as_ref())?;
    let n = config.records.unwrap_or_else(|| {
        out.default("records", json!(DEFAULT_RECORDS));
        DEFAULT_RECORDS
    });
    let seed = config.seed.unwrap_or_else(|| {
        out.default("seed", json!(DEFAULT_SEED));
        DEFAULT_SEED
    });
    let token = config.missing_token.as_deref().unwrap_or(DEFAULT_MISSING_TOKEN);
    let space = g.space();
    let mut csv = CsvBuffer::new(space.names())?;
    for r in simulate(&g, n, seed)? {
        let row: Vec<String> = r
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| v.map_or_else(|| token.to_string(), |l| space.labels()[j][l].clone()))
            .collect();
        csv.row(&row)?;
    }
    out.add("records.csv", csv.into_bytes()?);
    Ok(())
}

fn monotone(config: &RunConfig, inputs: &mut Inputs, out: &mut Outputs) -> Result<()> {
    let observed = if is_json(&config.input) {
        parse_table(&inputs.read("input", &config.input)?)?.observed()?
    } else {
        let schema = load_schema(config, inputs)?;
        let text = inputs.read("input", &config.input)?;
        let data = read_categorical(&text, &config.read_options(schema)?)?;
        for (r, &line) in data.records.iter().zip(&data.lines) {
            record_pattern(&r.values).map_err(|e| Error::Row {
                line,
                message: e.to_string(),
            })?;
        }
        match data.weights {
            Some(_) => weighted_observed(&data)?,
            None => aggregate(&data)?.to_observed()?,
        }
    };
    let g = build_monotone(&observed)?;
    let space = g.space();
    let p = space.item_count();
    let fs = functionals(config, space, out)?;
    out.add("full_data.csv", full_data_csv(&g)?);

    let mut header = vec!["time".to_string()];
    header.extend(space.names().iter().cloned());
    header.push("log_odds".into());
    let mut csv = CsvBuffer::new(&header)?;
    for j in 1..=p {
        let both = [DropoutTime(j), DropoutTime(j + 1)]
            .iter()
            .all(|t| t.pattern(p).is_ok_and(|m| g.patterns().contains(&m)));
        if !both {
            continue;
        }
        // η_j depends on the first j − 1 items only
        for cell in space.cells().filter(|c| c[j - 1..].iter().all(|&l| l == 0)) {
            let mut row = vec![j.to_string()];
            for (i, &l) in cell.iter().enumerate() {
                row.push(if i < j - 1 { space.labels()[i][l].clone() } else { String::new() });
            }
            row.push(format_float(sequential_log_odds(&g, j, &cell)?));
            csv.row(&row)?;
        }
    }
    out.add("sequential_odds.csv", csv.into_bytes()?);
    let mut fcsv = CsvBuffer::new(["functional", "value"])?;
    for f in &fs {
        fcsv.row([f.name.clone(), format_float(event_probability(&g, &f.event))])?;
    }
    out.add("functionals.csv", fcsv.into_bytes()?);
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn continuous(config: &RunConfig, inputs: &mut Inputs, out: &mut Outputs) -> Result<()> {
    let text = inputs.read("input", &config.input)?;
    let (sample, names) = read_bivariate(&text, &config.read_options(None)?)?;
    let grid = config
        .grid
        .as_ref()
        .map(|p| parse_quadrature_grid(&inputs.read("grid", p)?))
        .transpose()?;
    let model = fit_bivariate(&sample, grid)?;
    if grid.is_none() {
        out.default("grid", serde_json::to_value(model.grid())?);
    }

    let mut t1 = CsvBuffer::new([
        "pattern".to_string(),
        "n".into(),
        "proportion".into(),
        format!("pr({}>{})", names[0], names[1]),
        format!("mean_{}", names[0]),
        format!("mean_{}", names[1]),
        "corr".into(),
    ])?;
    let counts = model.counts();
    let props = model.proportions();
    for (i, label) in PATTERN_ORDER.iter().enumerate() {
        let m = pattern_at(i);
        let mut row = vec![label.to_string(), counts[i].to_string(), format_float(props[i])];
        if model.has_pattern(&m) {
            let f = model.pattern_functionals(&m)?;
            row.extend([f.prob_x1_greater, f.mean_x1, f.mean_x2, f.corr].map(format_float));
        } else {
            row.extend(std::iter::repeat_n(String::new(), 4));
        }
        t1.row(&row)?;
    }
    out.add("table1.csv", t1.into_bytes()?);

    let n = config.curve_points.unwrap_or_else(|| {
        out.default("curve_points", json!(DEFAULT_CURVE_POINTS));
        DEFAULT_CURVE_POINTS
    });
    out.default("curve_range", json!("weighted 5% to 95% quantiles of the observed values"));
    let mut curves = CsvBuffer::new(["item", "x", "probability"])?;
    for axis in 0..2 {
        let (vals, ws): (Vec<f64>, Vec<f64>) = sample
            .records()
            .iter()
            .filter_map(|r| [r.x1, r.x2][axis].map(|v| (v, r.weight)))
            .unzip();
        let xs = linspace(
            weighted_quantile(&vals, &ws, 0.05),
            weighted_quantile(&vals, &ws, 0.95),
            n,
        );
        for (x, pr) in xs.iter().zip(model.missingness_curve(axis, &xs)?) {
            curves.row([names[axis].clone(), format_float(*x), format_float(pr)])?;
        }
    }
    out.add("curves.csv", curves.into_bytes()?);

    if config.dump_grid {
        let mut header = vec![names[0].clone(), names[1].clone()];
        header.extend(PATTERN_ORDER.iter().map(|m| format!("g{m}")));
        let mut csv = CsvBuffer::new(&header)?;
        let values: Vec<Option<&[f64]>> = (0..4).map(|i| model.grid_values(&pattern_at(i)).ok()).collect();
        let (x1, x2) = (model.grid().x1.nodes(), model.grid().x2.nodes());
        for (a, u) in x1.iter().enumerate() {
            for (b, v) in x2.iter().enumerate() {
                let mut row = vec![format_float(*u), format_float(*v)];
                row.extend(values.iter().map(|g| g.map_or_else(String::new, |g| format_float(g[a * x2.len() + b]))));
                csv.row(&row)?;
            }
        }
        out.add("density_grid.csv", csv.into_bytes()?);
    }
    Ok(())
}

fn diagnose(config: &RunConfig, inputs: &mut Inputs, out: &mut Outputs) -> Result<()> {
    let observed = load_table(config, inputs)?.observed()?;
    let space = observed.space();
    let item = |key: &Option<String>, flag: &str| {
        let key = key.as_deref().expect("validated");
        space
            .item_index(key)
            .ok_or_else(|| invalid_config(format!("{flag}: unknown item {key:?}")))
    };
    let (j, k) = (item(&config.j, "--j")?, item(&config.k, "--k")?);
    let tol = config.tol.unwrap_or_else(|| {
        out.default("tol", json!(DEFAULT_TOLERANCE));
        DEFAULT_TOLERANCE
    });
    let report = convex_feasibility(&observed, j, k, tol)?;
    let strata: Vec<serde_json::Value> = report
        .strata
        .iter()
        .map(|s| {
            let values: serde_json::Map<String, serde_json::Value> = s
                .values
                .iter()
                .map(|&(i, l)| (space.names()[i].clone(), json!(space.labels()[i][l])))
                .collect();
            json!({
                "values": values,
                "verdict": s.verdict,
                "violation": s.violation,
                "weights": s.weights,
                "degenerate": s.degenerate,
                "note": s.note,
            })
        })
        .collect();
    let doc = json!({
        "assumption": format!(
            "{} independent of M_{} given the other items and indicators",
            space.names()[k],
            space.names()[j]
        ),
        "j": space.names()[j],
        "k": space.names()[k],
        "tol": tol,
        "strata": strata,
        "overall": report.overall,
        "worst_violation": report.worst_violation,
    });
    out.add("report.json", to_json_string(&doc)?.into_bytes());
    if config.hausman_wise {
        let fit = hausman_wise_closed_form(&observed)?;
        let doc = json!({
            "missing_distribution": fit.missing_distribution,
            "complete_masses": fit.complete_masses,
            "missing_masses": fit.missing_masses,
        });
        out.add("hausman_wise.json", to_json_string(&doc)?.into_bytes());
    }
    if report.overall == Overall::Refuted {
        out.exit_code = crate::error::ErrorCategory::Infeasible.exit_code();
        out.notes.push(format!(
            "the assumption is refuted: worst violation {:.6e}",
            report.worst_violation
        ));
    }
    Ok(())
}
