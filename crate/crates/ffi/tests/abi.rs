use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fluidmatch_ffi::*;

fn last_error() -> String {
    let p = fm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn single_type(theta: f64, lower: f64, upper: f64) -> *mut FmInstance {
    let mut inst = ptr::null_mut();
    let status = unsafe {
        fm_instance_new(1, &theta, &1.0, &1.0, &lower, &upper, &mut inst)
    };
    assert_eq!(status, FmStatus::Ok);
    inst
}

#[test]
fn solve_single_type() {
    let inst = single_type(1.0, 1e-3, 10.0);
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(fm_instance_n_types(inst), 1);
        assert_eq!(fm_solve(inst, &1.0, 1, &mut sol), FmStatus::Ok);
        assert!((fm_solution_objective(sol) - 2.0 / 3.0).abs() < 1e-12);
        let (mut x, mut y, mut g) = (0.0, 0.0, 0.0);
        assert_eq!(fm_solution_x(sol, &mut x, 1), FmStatus::Ok);
        assert_eq!(fm_solution_y(sol, &mut y, 1), FmStatus::Ok);
        assert_eq!(fm_solution_gradient(sol, &mut g, 1), FmStatus::Ok);
        assert!((x - 1.0 / 3.0).abs() < 1e-12 && (y - 1.0 / 3.0).abs() < 1e-12);
        // d/dl of l(1 + l) / (1 + 2l) at l = 1.
        assert!((g - 5.0 / 9.0).abs() < 1e-9);
        let mut c = 0.0;
        assert_eq!(fm_cost(inst, &1.0, 1, &mut c), FmStatus::Ok);
        assert_eq!(c, fm_solution_objective(sol));
        fm_solution_free(sol);
        fm_instance_free(inst);
    }
}

#[test]
fn errors_set_status_and_message() {
    let inst = single_type(1.0, 1e-3, 10.0);
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(fm_solve(inst, &50.0, 1, &mut sol), FmStatus::InvalidInput);
        assert!(sol.is_null());
        assert!(last_error().contains("50"));
        assert_eq!(
            fm_solve(ptr::null(), &1.0, 1, &mut sol),
            FmStatus::NullPointer
        );
        assert!(last_error().contains("inst"));
        let mut buf = [0.0; 3];
        assert_eq!(fm_solve(inst, &1.0, 1, &mut sol), FmStatus::Ok);
        assert_eq!(
            fm_solution_y(sol, buf.as_mut_ptr(), 3),
            FmStatus::InvalidInput
        );
        fm_solution_free(sol);
        fm_instance_free(inst);
        fm_instance_free(ptr::null_mut());
        fm_solution_free(ptr::null_mut());
    }
    let mut bad = ptr::null_mut();
    let status = unsafe { fm_instance_new(1, &1.0, &-1.0, &1.0, &1e-3, &1.0, &mut bad) };
    assert_eq!(status, FmStatus::InvalidInput);
    assert!(bad.is_null());
}

#[test]
fn certify_three_equal_patience_types() {
    let theta = [1.0; 3];
    let solo = [1.0, 1.2, 0.9];
    let pair = [1.0, 1.5, 1.4, 1.5, 1.2, 1.6, 1.4, 1.6, 0.9];
    let (lo, hi) = ([0.01; 3], [5.0; 3]);
    let mut inst = ptr::null_mut();
    let mut verdict = FmVerdict::Inconclusive;
    let mut text = [0 as std::ffi::c_char; 64];
    unsafe {
        assert_eq!(
            fm_instance_new(3, theta.as_ptr(), solo.as_ptr(), pair.as_ptr(), lo.as_ptr(), hi.as_ptr(), &mut inst),
            FmStatus::Ok
        );
        assert_eq!(
            fm_certify(inst, &mut verdict, text.as_mut_ptr(), text.len()),
            FmStatus::Ok
        );
        assert_eq!(verdict, FmVerdict::WeaklyConcaveCertified);
        assert_eq!(
            CStr::from_ptr(text.as_ptr()).to_str().unwrap(),
            "WeaklyConcaveCertified (Cor3_N3_sameTheta)"
        );
        let mut short = [1 as std::ffi::c_char; 8];
        fm_certify(inst, &mut verdict, short.as_mut_ptr(), short.len());
        assert_eq!(CStr::from_ptr(short.as_ptr()).to_str().unwrap(), "WeaklyC");
        fm_instance_free(inst);
    }
}

#[test]
fn price_quadratic_market() {
    // Infinite patience: cost is l / 2 and revenue l (1 - l), optimum 1/4.
    let inst = single_type(0.0, 1e-3, 1.0);
    for solver in [FmSolver::Mm, FmSolver::Pg] {
        let opts = FmPriceOptions {
            solver,
            eps: 1e-12,
            step0: 0.1,
            ..fm_price_options_default()
        };
        let (mut l, mut g, mut iters) = (0.0, 0.0, 0usize);
        let status = unsafe {
            fm_price(inst, &1.0, &1.0, &0.9, 1, &opts, &mut l, &mut g, &mut iters)
        };
        assert_eq!(status, FmStatus::Ok);
        // A change of g below eps leaves the rate within about sqrt(eps).
        assert!((l - 0.25).abs() < 1e-5, "{solver:?}: {l}");
        assert!((g - 0.0625).abs() < 1e-9);
        assert!(iters > 0);
    }
    let opts = FmPriceOptions {
        time_cap: 0.0,
        ..fm_price_options_default()
    };
    let (mut l, mut g, mut iters) = (0.0, 0.0, 0usize);
    let status = unsafe {
        fm_price(inst, &1.0, &1.0, ptr::null(), 1, &opts, &mut l, &mut g, &mut iters)
    };
    assert_eq!(status, FmStatus::TimeCapReached);
    assert_eq!(iters, 0);
    unsafe { fm_instance_free(inst) };
}

#[test]
fn load_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    std::fs::write(
        &path,
        r#"{"theta":[1.0],"solo_cost":[1.0],"pair_cost":[[1.0]],"lambda_lower":[0.001],"lambda_upper":[10.0]}"#,
    )
    .unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut inst = ptr::null_mut();
    unsafe {
        assert_eq!(fm_instance_load(c.as_ptr(), &mut inst), FmStatus::Ok);
        assert_eq!(fm_instance_n_types(inst), 1);
        fm_instance_free(inst);
        let missing = CString::new("/nonexistent/inst.json").unwrap();
        assert_eq!(
            fm_instance_load(missing.as_ptr(), &mut inst),
            FmStatus::InvalidInput
        );
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(fm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/fluidmatch.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["fm_instance_new", "fm_solve", "fm_certify", "fm_price", "fm_last_error"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ FmPriceOptions o = fm_price_options_default(); return o.solver == FM_SOLVER_MM ? FM_STATUS_OK : 1; }}\n",
            header.display()
        ),
    )
    .unwrap();
    match Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-std=c99"])
        .arg(&src)
        .status()
    {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; header syntax check skipped"),
    }
}
