//! C ABI over the `icin` library.
//!
//! Every function returns an [`IcinStatus`] and writes results through out
//! pointers. Items, levels and patterns are 1-based, as in the file formats.
//! On failure the message is kept per thread and read with
//! [`icin_last_error_message`]. Objects are opaque handles released with
//! their `_free` function; strings returned by the library are released with
//! [`icin_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use icin::cli::{parse_table, Table};
use icin::cli::files::{full_data_csv, observed_to_json, parse_xi};
use icin::continuous::{fit_bivariate, pattern_at, BivariateIcin, WeightedRecord, WeightedSample};
use icin::diagnostics::{convex_feasibility, Overall};
use icin::posterior::{push_forward_with, sample_posterior, DirichletSpec};
use icin::{build_full_data, build_full_data_xi, Error, ErrorCategory, Event, FullDataDistribution, ObservedDistribution, Pattern};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcinStatus {
    Ok = 0,
    Other = 1,
    Input = 2,
    Numeric = 3,
    Infeasible = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Functionals of one pattern's density in the bivariate model.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IcinPatternFunctionals {
    pub prob_x1_greater: f64,
    pub mean_x1: f64,
    pub mean_x2: f64,
    pub corr: f64,
}

/// Observed-data distribution.
pub struct IcinObserved(ObservedDistribution);

/// Full-data distribution.
pub struct IcinFullData(FullDataDistribution);

/// Fitted bivariate kernel-density model.
pub struct IcinBivariate(BivariateIcin);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IcinStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.category() {
            ErrorCategory::Input => IcinStatus::Input,
            ErrorCategory::Numeric => IcinStatus::Numeric,
            ErrorCategory::Infeasible => IcinStatus::Infeasible,
            ErrorCategory::Other => IcinStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure(IcinStatus::Input, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IcinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IcinStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IcinStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(IcinStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    nonnull(s, name)?;
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| input(format!("{name} is not UTF-8")))
}

unsafe fn read_slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_slice<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn to_cstring(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(IcinStatus::Other, "string contains NUL".into()))
}

fn full_cell(cell: &[i32], levels: &[usize]) -> Result<Vec<usize>, Failure> {
    if cell.len() != levels.len() {
        return Err(input(format!("cell has {} entries, expected {}", cell.len(), levels.len())));
    }
    cell.iter()
        .zip(levels)
        .enumerate()
        .map(|(j, (&l, &k))| {
            if l >= 1 && (l as usize) <= k {
                Ok(l as usize - 1)
            } else {
                Err(input(format!("level {l} of item {} outside 1..={k}", j + 1)))
            }
        })
        .collect()
}

/// Constraints per item: a 1-based level, or 0 for any level.
fn event(constraints: &[i32], levels: &[usize]) -> Result<Event, Failure> {
    if constraints.len() != levels.len() {
        return Err(input(format!(
            "{} constraints for {} items",
            constraints.len(),
            levels.len()
        )));
    }
    let mut c = Vec::new();
    for (j, (&l, &k)) in constraints.iter().zip(levels).enumerate() {
        if l == 0 {
            continue;
        }
        if l < 0 || l as usize > k {
            return Err(input(format!("level {l} of item {} outside 1..={k}", j + 1)));
        }
        c.push((j, l as usize - 1));
    }
    Ok(Event::new(c))
}

fn parse_pattern(s: &str, p: usize) -> Result<Pattern, Failure> {
    let m: Pattern = s.parse()?;
    if m.len() != p {
        return Err(input(format!("pattern {m} has length {}, expected {p}", m.len())));
    }
    Ok(m)
}

/// Read an observed table (kind `observed` or `counts`, counts normalized)
/// from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn icin_observed_from_json(json: *const c_char, out: *mut *mut IcinObserved) -> IcinStatus {
    guard(|| {
        nonnull(out, "out")?;
        let table = parse_table(read_str(json, "json")?)?;
        let observed = match table {
            Table::Observed(d) => d,
            Table::Counts(c) => c.to_observed()?,
        };
        *out = Box::into_raw(Box::new(IcinObserved(observed)));
        Ok(())
    })
}

/// # Safety
/// `obs` must come from [`icin_observed_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn icin_observed_free(obs: *mut IcinObserved) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Number of items.
///
/// # Safety
/// `obs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_observed_item_count(obs: *const IcinObserved, out: *mut usize) -> IcinStatus {
    guard(|| {
        nonnull(obs, "obs")?;
        nonnull(out, "out")?;
        *out = (*obs).0.space().item_count();
        Ok(())
    })
}

/// Serialize to the JSON table format; free the result with
/// [`icin_string_free`].
///
/// # Safety
/// `obs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_observed_to_json(obs: *const IcinObserved, out: *mut *mut c_char) -> IcinStatus {
    guard(|| {
        nonnull(obs, "obs")?;
        nonnull(out, "out")?;
        *out = to_cstring(observed_to_json(&(*obs).0)?)?;
        Ok(())
    })
}

/// Build the full-data distribution under itemwise conditional independence.
///
/// # Safety
/// `obs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_full_data_build(obs: *const IcinObserved, out: *mut *mut IcinFullData) -> IcinStatus {
    guard(|| {
        nonnull(obs, "obs")?;
        nonnull(out, "out")?;
        let g = build_full_data(&(*obs).0)?;
        *out = Box::into_raw(Box::new(IcinFullData(g)));
        Ok(())
    })
}

/// Build the full-data distribution shifted by the additive sensitivity
/// function given as JSON.
///
/// # Safety
/// `obs` must be a live handle, `xi_json` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_full_data_build_xi(
    obs: *const IcinObserved,
    xi_json: *const c_char,
    out: *mut *mut IcinFullData,
) -> IcinStatus {
    guard(|| {
        nonnull(obs, "obs")?;
        nonnull(out, "out")?;
        let observed = &(*obs).0;
        let xi = parse_xi(read_str(xi_json, "xi_json")?, observed.space())?;
        let g = build_full_data_xi(observed, &xi)?;
        *out = Box::into_raw(Box::new(IcinFullData(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from a `icin_full_data_build*` call and not be used again.
#[no_mangle]
pub unsafe extern "C" fn icin_full_data_free(g: *mut IcinFullData) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// `g(x, m)` for a full cell of 1-based levels and a pattern such as `"01"`.
/// Patterns outside the model have mass 0.
///
/// # Safety
/// `g` must be a live handle, `cell` must hold `len` values, `pattern` must
/// be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_full_data_mass(
    g: *const IcinFullData,
    cell: *const i32,
    len: usize,
    pattern: *const c_char,
    out: *mut f64,
) -> IcinStatus {
    guard(|| {
        nonnull(g, "g")?;
        nonnull(out, "out")?;
        let g = &(*g).0;
        let cell = full_cell(read_slice(cell, len, "cell")?, g.space().levels())?;
        let m = parse_pattern(read_str(pattern, "pattern")?, g.space().item_count())?;
        *out = g.mass(&cell, &m);
        Ok(())
    })
}

/// Logit of `pr(M_item = 1 | x, M_-item = rest)`; `item` is 1-based and
/// `rest` is a full pattern whose entry for `item` is ignored.
///
/// # Safety
/// `g` must be a live handle, `cell` must hold `len` values, `rest` must be
/// NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_full_data_missingness_logit(
    g: *const IcinFullData,
    item: usize,
    rest: *const c_char,
    cell: *const i32,
    len: usize,
    out: *mut f64,
) -> IcinStatus {
    guard(|| {
        nonnull(g, "g")?;
        nonnull(out, "out")?;
        let g = &(*g).0;
        let p = g.space().item_count();
        if item == 0 || item > p {
            return Err(input(format!("item {item} outside 1..={p}")));
        }
        let cell = full_cell(read_slice(cell, len, "cell")?, g.space().levels())?;
        let rest = parse_pattern(read_str(rest, "rest")?, p)?;
        *out = g.missingness_logit(item - 1, &rest, &cell)?;
        Ok(())
    })
}

/// Probability under the full-data item marginal of the event given by one
/// constraint per item: a 1-based level, or 0 for any level.
///
/// # Safety
/// `g` must be a live handle, `constraints` must hold `len` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn icin_full_data_event_probability(
    g: *const IcinFullData,
    constraints: *const i32,
    len: usize,
    out: *mut f64,
) -> IcinStatus {
    guard(|| {
        nonnull(g, "g")?;
        nonnull(out, "out")?;
        let g = &(*g).0;
        let e = event(read_slice(constraints, len, "constraints")?, g.space().levels())?;
        *out = g.event_probability(|c| e.contains(c));
        Ok(())
    })
}

/// Full-data masses as CSV with columns `x1..xp, m, g`; free the result with
/// [`icin_string_free`].
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_full_data_to_csv(g: *const IcinFullData, out: *mut *mut c_char) -> IcinStatus {
    guard(|| {
        nonnull(g, "g")?;
        nonnull(out, "out")?;
        let bytes = full_data_csv(&(*g).0)?;
        *out = to_cstring(String::from_utf8(bytes).map_err(|_| input("CSV is not UTF-8"))?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be a string returned by this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn icin_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Posterior draws of an event probability from a counts table (JSON).
/// `alpha <= 0` selects the default concentration `1 / (number of observed
/// cells)`. Writes `n_draws` values to `out`.
///
/// # Safety
/// `counts_json` must be NUL-terminated, `constraints` must hold `len`
/// values and `out` must have room for `n_draws` values.
#[no_mangle]
pub unsafe extern "C" fn icin_posterior_event_draws(
    counts_json: *const c_char,
    alpha: f64,
    n_draws: usize,
    seed: u64,
    constraints: *const i32,
    len: usize,
    out: *mut f64,
) -> IcinStatus {
    guard(|| {
        let counts = match parse_table(read_str(counts_json, "counts_json")?)? {
            Table::Counts(c) => c,
            Table::Observed(_) => return Err(input("posterior draws need a table of kind \"counts\"")),
        };
        let e = event(read_slice(constraints, len, "constraints")?, counts.space().levels())?;
        let out = write_slice(out, n_draws, "out")?;
        let prior = if alpha > 0.0 {
            DirichletSpec::symmetric(alpha)?
        } else {
            DirichletSpec::default_for(&counts)
        };
        let draws = sample_posterior(&counts, &prior, n_draws, seed)?;
        let values = push_forward_with(&draws, |d| {
            let g = build_full_data(d)?;
            Ok(g.event_probability(|c| e.contains(c)))
        })?;
        out.copy_from_slice(&values);
        Ok(())
    })
}

/// Convex-hull check of `X_k ⊥ M_j | X_-k, M_-j` (1-based items). Sets
/// `refuted` to 1 when some stratum is infeasible and reports the largest
/// violation.
///
/// # Safety
/// `obs` must be a live handle; `refuted` and `worst_violation` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_convex_feasibility(
    obs: *const IcinObserved,
    j: usize,
    k: usize,
    tol: f64,
    refuted: *mut i32,
    worst_violation: *mut f64,
) -> IcinStatus {
    guard(|| {
        nonnull(obs, "obs")?;
        nonnull(refuted, "refuted")?;
        nonnull(worst_violation, "worst_violation")?;
        if j == 0 || k == 0 {
            return Err(input("items are 1-based"));
        }
        let report = convex_feasibility(&(*obs).0, j - 1, k - 1, tol)?;
        *refuted = i32::from(report.overall == Overall::Refuted);
        *worst_violation = report.worst_violation;
        Ok(())
    })
}

/// Fit the bivariate model to `n` records; NaN marks a missing value and a
/// null `weights` gives every record weight 1.
///
/// # Safety
/// `x1` and `x2` must hold `n` values, `weights` must be null or hold `n`
/// values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icin_bivariate_fit(
    x1: *const f64,
    x2: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut *mut IcinBivariate,
) -> IcinStatus {
    guard(|| {
        nonnull(out, "out")?;
        let a = read_slice(x1, n, "x1")?;
        let b = read_slice(x2, n, "x2")?;
        let w = if weights.is_null() { None } else { Some(read_slice(weights, n, "weights")?) };
        let present = |v: f64| (!v.is_nan()).then_some(v);
        let records = (0..n)
            .map(|i| WeightedRecord::new(present(a[i]), present(b[i]), w.map_or(1.0, |w| w[i])))
            .collect();
        let model = fit_bivariate(&WeightedSample::new(records)?, None)?;
        *out = Box::into_raw(Box::new(IcinBivariate(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`icin_bivariate_fit`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn icin_bivariate_free(model: *mut IcinBivariate) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Functionals of pattern `pattern` in the order 0 = "00", 1 = "01",
/// 2 = "10", 3 = "11".
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn icin_bivariate_pattern_functionals(
    model: *const IcinBivariate,
    pattern: u32,
    out: *mut IcinPatternFunctionals,
) -> IcinStatus {
    guard(|| {
        nonnull(model, "model")?;
        nonnull(out, "out")?;
        if pattern > 3 {
            return Err(input(format!("pattern index {pattern} outside 0..=3")));
        }
        let f = (*model).0.pattern_functionals(&pattern_at(pattern as usize))?;
        *out = IcinPatternFunctionals {
            prob_x1_greater: f.prob_x1_greater,
            mean_x1: f.mean_x1,
            mean_x2: f.mean_x2,
            corr: f.corr,
        };
        Ok(())
    })
}

/// `pr(M_item = 1 | X_item = x)` at `n` points; `item` is 1 or 2.
///
/// # Safety
/// `model` must be a live handle and `points` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn icin_bivariate_missingness_curve(
    model: *const IcinBivariate,
    item: usize,
    points: *const f64,
    n: usize,
    out: *mut f64,
) -> IcinStatus {
    guard(|| {
        nonnull(model, "model")?;
        if item != 1 && item != 2 {
            return Err(input(format!("item must be 1 or 2, got {item}")));
        }
        let xs = read_slice(points, n, "points")?;
        let out = write_slice(out, n, "out")?;
        out.copy_from_slice(&(*model).0.missingness_curve(item - 1, xs)?);
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn icin_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn icin_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
