//! C ABI over the `gkbo` crate.
//!
//! Objects cross the boundary as opaque heap handles that the caller frees
//! with the matching `*_free` function. Every fallible call returns a
//! [`GkboStatus`]; on failure a message is available from
//! [`gkbo_last_error_message`] on the same thread until the next failing call.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use gkbo::bench::evaluate_success;
use gkbo::{
    run_gkbo, run_pcbo, Diffusion, Error, FunctionKind, GkboState, ObjectiveSpec, PcboConfig,
    RunReport, SolverConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkboStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    EmptyLeaderSet = 4,
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkboDiffusion {
    Isotropic = 0,
    Anisotropic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkboFunctionKind {
    Rastrigin = 0,
    Ackley = 1,
}

/// GKBO hyperparameters, passed by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GkboSolverParams {
    pub nu_f: f64,
    pub nu_l: f64,
    pub sigma_f: f64,
    pub eps: f64,
    pub alpha: f64,
    pub n_leaders: usize,
    pub n_steps: usize,
    pub delta_stall: f64,
    pub j_stall: usize,
    pub diffusion: GkboDiffusion,
    pub seed: u64,
    pub domain_lo: f64,
    pub domain_hi: f64,
}

/// Polarized CBO hyperparameters, passed by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GkboPcboParams {
    pub nu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub n_clusters: usize,
    pub n_steps: usize,
    pub delta_stall: f64,
    pub j_stall: usize,
    pub diffusion: GkboDiffusion,
    pub seed: u64,
    pub domain_lo: f64,
    pub domain_hi: f64,
}

/// Opaque objective handle.
pub struct GkboObjective(ObjectiveSpec);

/// Opaque run report handle.
pub struct GkboReport(RunReport);

/// Opaque handle to a GKBO run advanced one iteration at a time.
pub struct GkboRun(GkboState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GkboStatus {
    match err {
        Error::NonFiniteEnergy { .. } | Error::NonFinitePosition { .. } => GkboStatus::Numeric,
        Error::EmptyLeaderSet => GkboStatus::EmptyLeaderSet,
        _ => GkboStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (GkboStatus, String)>) -> GkboStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkboStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside gkbo");
            GkboStatus::Panic
        }
    }
}

fn lift(err: Error) -> (GkboStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (GkboStatus, String) {
    (GkboStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (GkboStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (GkboStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

impl From<GkboDiffusion> for Diffusion {
    fn from(d: GkboDiffusion) -> Self {
        match d {
            GkboDiffusion::Isotropic => Diffusion::Isotropic,
            GkboDiffusion::Anisotropic => Diffusion::Anisotropic,
        }
    }
}

impl From<Diffusion> for GkboDiffusion {
    fn from(d: Diffusion) -> Self {
        match d {
            Diffusion::Isotropic => GkboDiffusion::Isotropic,
            Diffusion::Anisotropic => GkboDiffusion::Anisotropic,
        }
    }
}

impl From<&GkboSolverParams> for SolverConfig {
    fn from(p: &GkboSolverParams) -> Self {
        SolverConfig {
            nu_f: p.nu_f,
            nu_l: p.nu_l,
            sigma_f: p.sigma_f,
            eps: p.eps,
            alpha: p.alpha,
            n_leaders: p.n_leaders,
            n_steps: p.n_steps,
            delta_stall: p.delta_stall,
            j_stall: p.j_stall,
            diffusion: p.diffusion.into(),
            seed: p.seed,
            domain: [p.domain_lo, p.domain_hi],
        }
    }
}

impl From<&GkboPcboParams> for PcboConfig {
    fn from(p: &GkboPcboParams) -> Self {
        PcboConfig {
            nu: p.nu,
            sigma: p.sigma,
            alpha: p.alpha,
            n_clusters: p.n_clusters,
            n_steps: p.n_steps,
            delta_stall: p.delta_stall,
            j_stall: p.j_stall,
            diffusion: p.diffusion.into(),
            seed: p.seed,
            domain: [p.domain_lo, p.domain_hi],
        }
    }
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gkbo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gkbo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Defaults: ν_F = 1, ν_L = 2, σ_F = 2.5, ε = 0.1, α = 5e6, N_L = 12,
/// N_t = 10000, δ_stall = 1e-4, j_stall = 1000, anisotropic, [-10, 10].
#[no_mangle]
pub extern "C" fn gkbo_solver_params_default() -> GkboSolverParams {
    let c = SolverConfig::default();
    GkboSolverParams {
        nu_f: c.nu_f,
        nu_l: c.nu_l,
        sigma_f: c.sigma_f,
        eps: c.eps,
        alpha: c.alpha,
        n_leaders: c.n_leaders,
        n_steps: c.n_steps,
        delta_stall: c.delta_stall,
        j_stall: c.j_stall,
        diffusion: c.diffusion.into(),
        seed: c.seed,
        domain_lo: c.domain[0],
        domain_hi: c.domain[1],
    }
}

#[no_mangle]
pub extern "C" fn gkbo_pcbo_params_default() -> GkboPcboParams {
    let c = PcboConfig::default();
    GkboPcboParams {
        nu: c.nu,
        sigma: c.sigma,
        alpha: c.alpha,
        n_clusters: c.n_clusters,
        n_steps: c.n_steps,
        delta_stall: c.delta_stall,
        j_stall: c.j_stall,
        diffusion: c.diffusion.into(),
        seed: c.seed,
        domain_lo: c.domain[0],
        domain_hi: c.domain[1],
    }
}

/// Creates a named preset objective ("rastrigin2", "ackley4", ...).
#[no_mangle]
pub unsafe extern "C" fn gkbo_objective_preset(
    name: *const c_char,
    dim: usize,
    out: *mut *mut GkboObjective,
) -> GkboStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (GkboStatus::InvalidArgument, "name is not UTF-8".to_owned()))?;
        let spec = ObjectiveSpec::preset(name, dim).map_err(lift)?;
        *out = Box::into_raw(Box::new(GkboObjective(spec)));
        Ok(())
    })
}

/// Creates an objective from `n_minima` row-major minimizers of length `dim`.
#[no_mangle]
pub unsafe extern "C" fn gkbo_objective_new(
    kind: GkboFunctionKind,
    dim: usize,
    minimizers: *const f64,
    n_minima: usize,
    out: *mut *mut GkboObjective,
) -> GkboStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if minimizers.is_null() {
            return Err(null("minimizers"));
        }
        let len = dim
            .checked_mul(n_minima)
            .ok_or_else(|| (GkboStatus::InvalidArgument, "size overflow".to_owned()))?;
        let flat = slice::from_raw_parts(minimizers, len);
        let rows = if dim == 0 {
            vec![]
        } else {
            flat.chunks_exact(dim).map(<[f64]>::to_vec).collect()
        };
        let kind = match kind {
            GkboFunctionKind::Rastrigin => FunctionKind::Rastrigin,
            GkboFunctionKind::Ackley => FunctionKind::Ackley,
        };
        let spec = ObjectiveSpec::new(kind, dim, rows).map_err(lift)?;
        *out = Box::into_raw(Box::new(GkboObjective(spec)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_objective_free(obj: *mut GkboObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// Dimension of the objective, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn gkbo_objective_dim(obj: *const GkboObjective) -> usize {
    obj.as_ref().map_or(0, |o| o.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_objective_n_minima(obj: *const GkboObjective) -> usize {
    obj.as_ref().map_or(0, |o| o.0.n_minima())
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_objective_eval(
    obj: *const GkboObjective,
    x: *const f64,
    len: usize,
    out_value: *mut f64,
) -> GkboStatus {
    guard(|| {
        let obj = deref(obj, "obj")?;
        let out = out_ptr(out_value, "out_value")?;
        if x.is_null() {
            return Err(null("x"));
        }
        *out = obj.0.eval(slice::from_raw_parts(x, len)).map_err(lift)?;
        Ok(())
    })
}

/// Runs GKBO with `n_agents` agents to termination.
#[no_mangle]
pub unsafe extern "C" fn gkbo_run(
    obj: *const GkboObjective,
    params: *const GkboSolverParams,
    n_agents: usize,
    out: *mut *mut GkboReport,
) -> GkboStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let obj = deref(obj, "obj")?;
        let cfg = SolverConfig::from(deref(params, "params")?);
        let report = run_gkbo(&obj.0, &cfg, n_agents).map_err(lift)?;
        *out = Box::into_raw(Box::new(GkboReport(report)));
        Ok(())
    })
}

/// Runs polarized CBO with `n_particles` particles to termination.
#[no_mangle]
pub unsafe extern "C" fn gkbo_pcbo_run(
    obj: *const GkboObjective,
    params: *const GkboPcboParams,
    n_particles: usize,
    out: *mut *mut GkboReport,
) -> GkboStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let obj = deref(obj, "obj")?;
        let cfg = PcboConfig::from(deref(params, "params")?);
        let report = run_pcbo(&obj.0, &cfg, n_particles).map_err(lift)?;
        *out = Box::into_raw(Box::new(GkboReport(report)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_run_new(
    obj: *const GkboObjective,
    params: *const GkboSolverParams,
    n_agents: usize,
    out: *mut *mut GkboRun,
) -> GkboStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let obj = deref(obj, "obj")?;
        let cfg = SolverConfig::from(deref(params, "params")?);
        let state = GkboState::new(&obj.0, &cfg, n_agents).map_err(lift)?;
        *out = Box::into_raw(Box::new(GkboRun(state)));
        Ok(())
    })
}

/// Advances one iteration; `*out_advanced` is false once the run has
/// terminated.
#[no_mangle]
pub unsafe extern "C" fn gkbo_run_step(run: *mut GkboRun, out_advanced: *mut bool) -> GkboStatus {
    guard(|| {
        let run = out_ptr(run, "run")?;
        let out = out_ptr(out_advanced, "out_advanced")?;
        *out = run.0.step().map_err(lift)?;
        Ok(())
    })
}

/// Snapshot of the run's current state as a report.
#[no_mangle]
pub unsafe extern "C" fn gkbo_run_report(
    run: *const GkboRun,
    out: *mut *mut GkboReport,
) -> GkboStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let run = deref(run, "run")?;
        *out = Box::into_raw(Box::new(GkboReport(run.0.report())));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_run_free(run: *mut GkboRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_report_free(report: *mut GkboReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_report_iterations(report: *const GkboReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.iterations)
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_report_stalled(report: *const GkboReport) -> bool {
    report.as_ref().is_some_and(|r| r.0.stalled)
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_report_evaluations(report: *const GkboReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.evaluations)
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_report_leader_count(report: *const GkboReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.leader_count)
}

/// Lowest objective value in the final ensemble; NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn gkbo_report_best_value(report: *const GkboReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.best_value)
}

#[no_mangle]
pub unsafe extern "C" fn gkbo_report_seed(report: *const GkboReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.seed)
}

/// Number of distinct final consensus points.
#[no_mangle]
pub unsafe extern "C" fn gkbo_report_consensus_count(report: *const GkboReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.final_consensus.len())
}

/// Copies consensus point `index` into `out` (capacity `len`, must equal the
/// objective dimension).
#[no_mangle]
pub unsafe extern "C" fn gkbo_report_consensus(
    report: *const GkboReport,
    index: usize,
    out: *mut f64,
    len: usize,
) -> GkboStatus {
    guard(|| {
        let report = deref(report, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let point = report.0.final_consensus.get(index).ok_or_else(|| {
            (
                GkboStatus::OutOfRange,
                format!(
                    "consensus index {index} out of range ({} points)",
                    report.0.final_consensus.len()
                ),
            )
        })?;
        if len != point.len() {
            return Err((
                GkboStatus::InvalidArgument,
                format!(
                    "buffer length {len} does not match dimension {}",
                    point.len()
                ),
            ));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(point);
        Ok(())
    })
}

/// Scores a report against the objective's planted minimizers with the
/// 0.25 max-norm detection radius.
#[no_mangle]
pub unsafe extern "C" fn gkbo_report_evaluate(
    report: *const GkboReport,
    obj: *const GkboObjective,
    out_success: *mut bool,
    out_detected: *mut usize,
) -> GkboStatus {
    guard(|| {
        let report = deref(report, "report")?;
        let obj = deref(obj, "obj")?;
        let success = out_ptr(out_success, "out_success")?;
        let detected = out_ptr(out_detected, "out_detected")?;
        (*success, *detected) = evaluate_success(&report.0, obj.0.minimizers());
        Ok(())
    })
}
