use std::ffi::{CStr, CString};
use std::ptr;

use parallel_cbf_ffi::*;

const SCENARIO: &str = r#"
name = "di"
system = "double_integrator"
filter = "parallel_pair"
x0 = [0.0, 0.5]

[sim]
horizon = 1.0
dt = 0.01

[nominal]
kind = "constant"
u = [3.0]
"#;

fn last_error() -> String {
    let p = pcbf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn solve_upper_clamp() {
    let a = [1.0, 0.0];
    let u0 = [3.0, 0.0];
    let mut u = [0.0; 2];
    let mut branch = PcbfBranch::Nominal;
    let mut corr = 0.0;
    let s = unsafe { pcbf_solve_closed_form(a.as_ptr(), 2, -1.0, 1.0, u0.as_ptr(), 0.0, u.as_mut_ptr(), &mut branch, &mut corr) };
    assert_eq!(s, PcbfStatus::Ok);
    assert_eq!(u, [1.0, 0.0]);
    assert_eq!(branch, PcbfBranch::UpperClamped);
    assert_eq!(corr, 2.0);
    assert!(pcbf_last_error_message().is_null());
}

#[test]
fn solve_errors() {
    let a = [1.0];
    let u0 = [0.0];
    let mut u = [0.0];
    let s = unsafe { pcbf_solve_closed_form(a.as_ptr(), 1, 3.0, 1.0, u0.as_ptr(), 0.0, u.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, PcbfStatus::InfeasibleSlab);
    assert!(last_error().contains("infeasible"));
    let s = unsafe { pcbf_solve_closed_form(ptr::null(), 1, 0.0, 1.0, u0.as_ptr(), 0.0, u.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, PcbfStatus::NullPointer);
    let s = unsafe { pcbf_solve_closed_form(a.as_ptr(), 0, 0.0, 1.0, u0.as_ptr(), 0.0, u.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, PcbfStatus::InvalidArgument);
    let nan = [f64::NAN];
    let s = unsafe { pcbf_solve_closed_form(a.as_ptr(), 1, 0.0, 1.0, nan.as_ptr(), 0.0, u.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, PcbfStatus::NumericalDomain);
}

#[test]
fn gain_bound() {
    let mut out = 0.0;
    assert_eq!(unsafe { pcbf_gain_lower_bound(1.0, 0.5, 2.0, &mut out) }, PcbfStatus::Ok);
    assert_eq!(out, 0.5);
    assert_eq!(unsafe { pcbf_gain_lower_bound(0.0, 0.5, 2.0, &mut out) }, PcbfStatus::NotInterior);
}

#[test]
fn scenario_lifecycle() {
    let text = CString::new(SCENARIO).unwrap();
    let mut scenario = ptr::null_mut();
    assert_eq!(unsafe { pcbf_scenario_from_toml(text.as_ptr(), &mut scenario) }, PcbfStatus::Ok);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { pcbf_scenario_run(scenario, &mut run) }, PcbfStatus::Ok);

    let (mut kind, mut t_event) = (PcbfEvent::CbfInvalidity, 0.0);
    assert_eq!(unsafe { pcbf_run_event(run, &mut kind, &mut t_event) }, PcbfStatus::Ok);
    assert_eq!(kind, PcbfEvent::Completed);
    assert_eq!(t_event, 1.0);
    assert_eq!(unsafe { pcbf_run_len(run) }, 101);

    let (mut n, mut m, mut levels) = (0, 0, 0);
    assert_eq!(unsafe { pcbf_run_dims(run, &mut n, &mut m, &mut levels) }, PcbfStatus::Ok);
    assert_eq!((n, m, levels), (2, 1, 2));

    let mut t = 0.0;
    let mut x = [0.0; 2];
    let mut u = [0.0; 1];
    let mut h = [0.0; 2];
    let mut hbar = [0.0; 2];
    let s = unsafe { pcbf_run_sample(run, 0, &mut t, x.as_mut_ptr(), u.as_mut_ptr(), h.as_mut_ptr(), hbar.as_mut_ptr()) };
    assert_eq!(s, PcbfStatus::Ok);
    assert_eq!((t, x), (0.0, [0.0, 0.5]));
    assert_eq!(h[0] + hbar[0], 2.0);
    for k in 0..101 {
        let s = unsafe { pcbf_run_sample(run, k, &mut t, ptr::null_mut(), ptr::null_mut(), h.as_mut_ptr(), hbar.as_mut_ptr()) };
        assert_eq!(s, PcbfStatus::Ok);
        assert!(h.iter().chain(&hbar).all(|v| *v >= 0.0));
    }
    let s = unsafe { pcbf_run_sample(run, 101, &mut t, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, PcbfStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("run.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { pcbf_run_write_csv(run, path.as_ptr()) }, PcbfStatus::Ok);
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);

    unsafe {
        pcbf_run_free(run);
        pcbf_scenario_free(scenario);
        pcbf_run_free(ptr::null_mut());
        pcbf_scenario_free(ptr::null_mut());
    }
}

#[test]
fn bad_scenarios() {
    let mut scenario = ptr::null_mut();
    let broken = CString::new("name = \n").unwrap();
    assert_eq!(unsafe { pcbf_scenario_from_toml(broken.as_ptr(), &mut scenario) }, PcbfStatus::Config);
    assert!(scenario.is_null());
    assert!(last_error().contains("<scenario>:1:"));

    let outside = CString::new(SCENARIO.replace("[0.0, 0.5]", "[-1.0, 0.0]")).unwrap();
    assert_eq!(unsafe { pcbf_scenario_from_toml(outside.as_ptr(), &mut scenario) }, PcbfStatus::NotInterior);
    assert_eq!(unsafe { pcbf_scenario_from_toml(ptr::null(), &mut scenario) }, PcbfStatus::NullPointer);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(pcbf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
