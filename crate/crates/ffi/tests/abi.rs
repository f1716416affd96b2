use std::ffi::{CStr, CString};
use std::ptr;

use icin_ffi::*;

const FIXTURE: &str = r#"{"kind":"observed","levels":[2,2],"patterns":[
 {"pattern":"00","cells":[{"cell":[1,1],"mass":0.2},{"cell":[1,2],"mass":0.1},{"cell":[2,1],"mass":0.1},{"cell":[2,2],"mass":0.2}]},
 {"pattern":"01","cells":[{"cell":[1,null],"mass":0.1},{"cell":[2,null],"mass":0.1}]},
 {"pattern":"10","cells":[{"cell":[null,1],"mass":0.05},{"cell":[null,2],"mass":0.05}]},
 {"pattern":"11","cells":[{"cell":[null,null],"mass":0.1}]}]}"#;

fn observed(json: &str) -> *mut IcinObserved {
    let s = CString::new(json).unwrap();
    let mut obs = ptr::null_mut();
    assert_eq!(unsafe { icin_observed_from_json(s.as_ptr(), &mut obs) }, IcinStatus::Ok);
    obs
}

fn last_error() -> String {
    let p = icin_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn fixture_masses_and_queries() {
    let obs = observed(FIXTURE);
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(icin_full_data_build(obs, &mut g), IcinStatus::Ok);
        let m01 = CString::new("01").unwrap();
        let m11 = CString::new("11").unwrap();
        let mut v = 0.0;
        assert_eq!(icin_full_data_mass(g, [1, 1].as_ptr(), 2, m01.as_ptr(), &mut v), IcinStatus::Ok);
        assert!((v - 0.2 / 3.0).abs() < 1e-12);
        assert_eq!(icin_full_data_mass(g, [1, 1].as_ptr(), 2, m11.as_ptr(), &mut v), IcinStatus::Ok);
        assert!((v - 0.1 / 3.0).abs() < 1e-12);

        // logit pr(M2 = 1 | x = (1,1), M1 = 0) = ln(g(11,01)/g(11,00)) = ln(1/3)
        let rest = CString::new("00").unwrap();
        assert_eq!(
            icin_full_data_missingness_logit(g, 2, rest.as_ptr(), [1, 1].as_ptr(), 2, &mut v),
            IcinStatus::Ok
        );
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-12);

        let mut by_pattern = 0.0;
        for m in ["00", "01", "10", "11"] {
            let m = CString::new(m).unwrap();
            icin_full_data_mass(g, [1, 1].as_ptr(), 2, m.as_ptr(), &mut v);
            by_pattern += v;
        }
        assert_eq!(icin_full_data_event_probability(g, [1, 1].as_ptr(), 2, &mut v), IcinStatus::Ok);
        assert!((v - by_pattern).abs() < 1e-15);
        let mut total = 0.0;
        for c in [[1, 1], [1, 2], [2, 1], [2, 2]] {
            icin_full_data_event_probability(g, c.as_ptr(), 2, &mut v);
            total += v;
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(icin_full_data_event_probability(g, [0, 0].as_ptr(), 2, &mut v), IcinStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);

        let mut csv = ptr::null_mut();
        assert_eq!(icin_full_data_to_csv(g, &mut csv), IcinStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_string();
        assert_eq!(text.lines().count(), 17);
        icin_string_free(csv);
        icin_full_data_free(g);
        icin_observed_free(obs);
    }
}

#[test]
fn json_round_trip() {
    let obs = observed(FIXTURE);
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(icin_observed_to_json(obs, &mut s), IcinStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_string();
        icin_string_free(s);
        let again = observed(&text);
        let mut n = 0;
        assert_eq!(icin_observed_item_count(again, &mut n), IcinStatus::Ok);
        assert_eq!(n, 2);
        icin_observed_free(again);
        icin_observed_free(obs);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let bad = CString::new(r#"{"kind":"observed","levels":[2,2],"patterns":[]}"#).unwrap();
    let mut obs = ptr::null_mut();
    let status = unsafe { icin_observed_from_json(bad.as_ptr(), &mut obs) };
    assert_eq!(status, IcinStatus::Input);
    assert!(obs.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe { icin_observed_from_json(ptr::null(), &mut obs) };
    assert_eq!(status, IcinStatus::NullPointer);
    assert!(last_error().contains("json"));

    let obs = observed(FIXTURE);
    let mut g = ptr::null_mut();
    unsafe {
        icin_full_data_build(obs, &mut g);
        let m = CString::new("00").unwrap();
        let mut v = 0.0;
        assert_eq!(icin_full_data_mass(g, [3, 1].as_ptr(), 2, m.as_ptr(), &mut v), IcinStatus::Input);
        let m3 = CString::new("000").unwrap();
        assert_eq!(icin_full_data_mass(g, [1, 1].as_ptr(), 2, m3.as_ptr(), &mut v), IcinStatus::Input);
        icin_full_data_free(g);
        icin_observed_free(obs);
    }
}

#[test]
fn sensitivity_shift() {
    let obs = observed(FIXTURE);
    let xi = CString::new(r#"{"offsets":{"x2":{"2":1.0}}}"#).unwrap();
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(icin_full_data_build_xi(obs, xi.as_ptr(), &mut g), IcinStatus::Ok);
        let rest = CString::new("00").unwrap();
        let (mut a, mut b) = (0.0, 0.0);
        icin_full_data_missingness_logit(g, 2, rest.as_ptr(), [1, 2].as_ptr(), 2, &mut a);
        icin_full_data_missingness_logit(g, 2, rest.as_ptr(), [1, 1].as_ptr(), 2, &mut b);
        assert!((a - b - 1.0).abs() < 1e-10);
        icin_full_data_free(g);
        icin_observed_free(obs);
    }
}

#[test]
fn posterior_draws_are_seeded() {
    let counts = CString::new(
        r#"{"kind":"counts","levels":[2,2],"patterns":[
        {"pattern":"00","cells":[{"cell":[1,1],"count":40},{"cell":[1,2],"count":20},{"cell":[2,1],"count":20},{"cell":[2,2],"count":40}]},
        {"pattern":"01","cells":[{"cell":[1,null],"count":10},{"cell":[2,null],"count":15}]}]}"#,
    )
    .unwrap();
    let mut a = vec![0.0; 200];
    let mut b = vec![0.0; 200];
    unsafe {
        assert_eq!(
            icin_posterior_event_draws(counts.as_ptr(), 0.0, 200, 9, [1, 0].as_ptr(), 2, a.as_mut_ptr()),
            IcinStatus::Ok
        );
        icin_posterior_event_draws(counts.as_ptr(), 0.0, 200, 9, [1, 0].as_ptr(), 2, b.as_mut_ptr());
    }
    assert_eq!(a, b);
    assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    assert!((mean - 0.5).abs() < 0.1);
}

#[test]
fn convex_feasibility_flags_fixture() {
    // f(x1 | M1=1, x2) must mix complete-case conditionals 0.3 and 0.4; 0.6 is outside.
    let json = r#"{"kind":"observed","levels":[2,2],"patterns":[
     {"pattern":"00","cells":[{"cell":[1,1],"mass":0.12},{"cell":[1,2],"mass":0.16},{"cell":[2,1],"mass":0.28},{"cell":[2,2],"mass":0.24}]},
     {"pattern":"01","cells":[{"cell":[1,null],"mass":0.12},{"cell":[2,null],"mass":0.08}]}]}"#;
    let obs = observed(json);
    let (mut refuted, mut worst) = (0, 0.0);
    unsafe {
        assert_eq!(icin_convex_feasibility(obs, 2, 1, 1e-9, &mut refuted, &mut worst), IcinStatus::Ok);
        icin_observed_free(obs);
    }
    assert_eq!(refuted, 1);
    assert!((worst - 0.2).abs() < 1e-9);
}

#[test]
fn bivariate_model() {
    let n = 400;
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64 * 6.0 - 3.0;
        let s = ((i * 37) % n) as f64 / n as f64 * 6.0 - 3.0;
        x1.push(t);
        x2.push(if i % 10 == 0 { f64::NAN } else { s });
    }
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(icin_bivariate_fit(x1.as_ptr(), x2.as_ptr(), ptr::null(), n, &mut m), IcinStatus::Ok);
        let mut f = IcinPatternFunctionals::default();
        assert_eq!(icin_bivariate_pattern_functionals(m, 0, &mut f), IcinStatus::Ok);
        assert!(f.prob_x1_greater > 0.0 && f.prob_x1_greater < 1.0);
        assert_eq!(icin_bivariate_pattern_functionals(m, 2, &mut f), IcinStatus::Input);
        let pts = [-1.0, 0.0, 1.0];
        let mut curve = [0.0; 3];
        assert_eq!(icin_bivariate_missingness_curve(m, 2, pts.as_ptr(), 3, curve.as_mut_ptr()), IcinStatus::Ok);
        assert!(curve.iter().all(|p| (0.0..=1.0).contains(p)));
        icin_bivariate_free(m);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(icin_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
