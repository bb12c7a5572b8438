//! C ABI over the fluidmatch library.
//!
//! Instances and LP solutions cross the boundary as opaque handles, each
//! released with its `_free` function. Fallible calls return an [`FmStatus`];
//! the message of the most recent failure on the calling thread is available
//! from [`fm_last_error`]. Pointer arguments must be valid for the lengths
//! documented on each function; handles must be live.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use fluidmatch::concavity::{self, Verdict};
use fluidmatch::data::TypedInstanceBundle;
use fluidmatch::pricing::{self, DemandModel, MmOptions, PgOptions};
use fluidmatch::{Error, FluidSolution, MatchingInstance};
use rand::SeedableRng;

/// Status codes. Nonzero values match the exit codes of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    SolverFailure = 3,
    /// The time cap stopped the solver; outputs hold the last iterate.
    TimeCapReached = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmVerdict {
    ConcaveCertified = 0,
    WeaklyConcaveCertified = 1,
    Inconclusive = 2,
    KnownViolationWitness = 3,
}

impl From<Verdict> for FmVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::ConcaveCertified => FmVerdict::ConcaveCertified,
            Verdict::WeaklyConcaveCertified => FmVerdict::WeaklyConcaveCertified,
            Verdict::Inconclusive => FmVerdict::Inconclusive,
            Verdict::KnownViolationWitness => FmVerdict::KnownViolationWitness,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmSolver {
    Mm = 0,
    Pg = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmPriceOptions {
    pub solver: FmSolver,
    /// Convergence threshold on the change of the objective.
    pub eps: f64,
    /// Wall-clock cap in seconds.
    pub time_cap: f64,
    /// Initial projected-gradient step; ignored by MM.
    pub step0: f64,
    /// Curvature increment for MM; 0 picks the scale-based default.
    pub delta_mm: f64,
    /// Seeds the start point when none is given.
    pub seed: u64,
}

/// Arrival-rate box, patience rates and route costs of a market.
pub struct FmInstance(MatchingInstance);

/// Optimal fluid LP solution at one rate vector.
pub struct FmSolution(FluidSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() {
            FmStatus::InvalidInput
        } else {
            FmStatus::SolverFailure
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FmStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, converting errors and panics into a status and the thread's
/// last error message.
fn guard(f: impl FnOnce() -> Result<FmStatus, Failure>) -> FmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            FmStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an instance of `n` types. `pair_cost` is row-major `n * n`; the
/// other arrays have length `n`.
///
/// Every array pointer must be valid for the stated length and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fm_instance_new(
    n: usize,
    theta: *const f64,
    solo_cost: *const f64,
    pair_cost: *const f64,
    lambda_lower: *const f64,
    lambda_upper: *const f64,
    out: *mut *mut FmInstance,
) -> FmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let pair = input(pair_cost, n * n, "pair_cost")?;
        let inst = MatchingInstance::new(
            input(theta, n, "theta")?.to_vec(),
            input(solo_cost, n, "solo_cost")?.to_vec(),
            pair.chunks(n.max(1)).map(<[f64]>::to_vec).collect(),
            input(lambda_lower, n, "lambda_lower")?.to_vec(),
            input(lambda_upper, n, "lambda_upper")?.to_vec(),
        )?;
        *out = Box::into_raw(Box::new(FmInstance(inst)));
        Ok(FmStatus::Ok)
    })
}

/// Loads an instance JSON file, or the matching part of a bundle file.
///
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_instance_load(
    path: *const c_char,
    out: *mut *mut FmInstance,
) -> FmStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Failure(FmStatus::InvalidInput, format!("path is not UTF-8: {e}")))?;
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::from(Error::Io {
                path: path.into(),
                source: e,
            })
        })?;
        let inst = if text.contains("\"matching\"") {
            TypedInstanceBundle::load(Path::new(path))?.matching
        } else {
            let inst: MatchingInstance = serde_json::from_str(&text).map_err(Error::from)?;
            inst.validate()?;
            inst
        };
        *out = Box::into_raw(Box::new(FmInstance(inst)));
        Ok(FmStatus::Ok)
    })
}

/// `inst` must come from this library and not be used afterwards. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn fm_instance_free(inst: *mut FmInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of types, or 0 for NULL.
///
/// `inst` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_instance_n_types(inst: *const FmInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.n_types())
}

/// Solves the fluid LP at `lambda` (length = number of types).
///
/// `inst` must be a live handle, `lambda` valid for `len` reads, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_solve(
    inst: *const FmInstance,
    lambda: *const f64,
    len: usize,
    out: *mut *mut FmSolution,
) -> FmStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sol = fluidmatch::solve_fluid_lp(&inst.0, input(lambda, len, "lambda")?)?;
        *out = Box::into_raw(Box::new(FmSolution(sol)));
        Ok(FmStatus::Ok)
    })
}

/// Optimal cost at `lambda` without keeping the solution.
///
/// As for [`fm_solve`]; `out_cost` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_cost(
    inst: *const FmInstance,
    lambda: *const f64,
    len: usize,
    out_cost: *mut f64,
) -> FmStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        let out = out_cost.as_mut().ok_or_else(|| null("out_cost"))?;
        *out = fluidmatch::cost(&inst.0, input(lambda, len, "lambda")?)?;
        Ok(FmStatus::Ok)
    })
}

/// `sol` must come from this library and not be used afterwards. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn fm_solution_free(sol: *mut FmSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Optimal cost, or NaN for NULL.
///
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_solution_objective(sol: *const FmSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.objective)
}

fn copy_into(dst: &mut [f64], src: impl ExactSizeIterator<Item = f64>) -> Result<FmStatus, Failure> {
    if dst.len() != src.len() {
        return Err(Failure(
            FmStatus::InvalidInput,
            format!("buffer holds {} values, {} needed", dst.len(), src.len()),
        ));
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d = s;
    }
    Ok(FmStatus::Ok)
}

/// Copies the match rates, row-major `n * n` with rows indexing the active type.
///
/// `sol` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fm_solution_x(sol: *const FmSolution, buf: *mut f64, len: usize) -> FmStatus {
    guard(|| {
        let sol = handle(sol, "sol")?;
        let flat: Vec<f64> = sol.0.x.iter().flatten().copied().collect();
        copy_into(output(buf, len, "buf")?, flat.into_iter())
    })
}

/// Copies the unmatched rates (length `n`).
///
/// `sol` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fm_solution_y(sol: *const FmSolution, buf: *mut f64, len: usize) -> FmStatus {
    guard(|| {
        let sol = handle(sol, "sol")?;
        copy_into(output(buf, len, "buf")?, sol.0.y.iter().copied())
    })
}

/// Copies the envelope supergradient of the cost (length `n`).
///
/// `sol` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fm_solution_gradient(
    sol: *const FmSolution,
    buf: *mut f64,
    len: usize,
) -> FmStatus {
    guard(|| {
        let sol = handle(sol, "sol")?;
        copy_into(output(buf, len, "buf")?, sol.0.envelope_gradient().into_iter())
    })
}

/// Certifies concavity on the instance's rate box. When `summary` is
/// non-NULL, a NUL-terminated description such as
/// `WeaklyConcaveCertified (Cor3_N3_sameTheta)` is written into it,
/// truncated to `summary_len - 1` bytes.
///
/// `inst` must be a live handle, `out_verdict` writable and `summary` NULL or
/// valid for `summary_len` writes.
#[no_mangle]
pub unsafe extern "C" fn fm_certify(
    inst: *const FmInstance,
    out_verdict: *mut FmVerdict,
    summary: *mut c_char,
    summary_len: usize,
) -> FmStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        let verdict = out_verdict.as_mut().ok_or_else(|| null("out_verdict"))?;
        let cert = concavity::certify(&inst.0)?;
        *verdict = cert.verdict.into();
        if !summary.is_null() && summary_len > 0 {
            let text = cert.summary();
            let n = text.len().min(summary_len - 1);
            ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), summary, n);
            *summary.add(n) = 0;
        }
        Ok(FmStatus::Ok)
    })
}

/// Defaults: MM, `eps = 1e-3`, 20-minute cap, `step0 = 1`, default curvature
/// increment, seed 0.
#[no_mangle]
pub extern "C" fn fm_price_options_default() -> FmPriceOptions {
    FmPriceOptions {
        solver: FmSolver::Mm,
        eps: 1e-3,
        time_cap: 1200.0,
        step0: 1.0,
        delta_mm: 0.0,
        seed: 0,
    }
}

/// Maximizes revenue minus matching cost under linear demand with per-type
/// solo trip lengths and zero-price rates. `lambda0` may be NULL to draw a
/// start point from the box. On `FM_STATUS_OK` or `FM_STATUS_TIME_CAP_REACHED`
/// the rates, objective and iteration count are written out.
///
/// Arrays must be valid for `n` elements (`lambda0` may be NULL), `options`
/// may be NULL for defaults, and outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_price(
    inst: *const FmInstance,
    solo_length: *const f64,
    max_rate: *const f64,
    lambda0: *const f64,
    n: usize,
    options: *const FmPriceOptions,
    out_lambda: *mut f64,
    out_objective: *mut f64,
    out_iterations: *mut usize,
) -> FmStatus {
    guard(|| {
        let inst = &handle(inst, "inst")?.0;
        let opts = options.as_ref().copied().unwrap_or_else(|| fm_price_options_default());
        let demand = DemandModel::linear(
            input(solo_length, n, "solo_length")?.to_vec(),
            input(max_rate, n, "max_rate")?.to_vec(),
        )?;
        let start = if lambda0.is_null() {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
            pricing::sample_in_box(inst, &mut rng)
        } else {
            input(lambda0, n, "lambda0")?.to_vec()
        };
        let lambda_out = output(out_lambda, n, "out_lambda")?;
        let objective_out = out_objective.as_mut().ok_or_else(|| null("out_objective"))?;
        let iterations_out = out_iterations.as_mut().ok_or_else(|| null("out_iterations"))?;
        let result = match opts.solver {
            FmSolver::Mm => pricing::mm_solve(
                inst,
                &demand,
                &start,
                &MmOptions {
                    eps: opts.eps,
                    time_cap: opts.time_cap,
                    delta_mm: (opts.delta_mm > 0.0).then_some(opts.delta_mm),
                    seed: opts.seed,
                    ..Default::default()
                },
            )?,
            FmSolver::Pg => pricing::pg_solve(
                inst,
                &demand,
                &start,
                &PgOptions {
                    step0: opts.step0,
                    eps: opts.eps,
                    time_cap: opts.time_cap,
                    max_iterations: None,
                },
            )?,
        };
        copy_into(lambda_out, result.lambda_star.iter().copied())?;
        *objective_out = result.objective;
        *iterations_out = result.iterations;
        Ok(if result.converged {
            FmStatus::Ok
        } else {
            FmStatus::TimeCapReached
        })
    })
}
