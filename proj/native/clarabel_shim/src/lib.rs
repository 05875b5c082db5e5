//! C ABI wrapper around the Clarabel interior-point solver.
//!
//! The C++ side hands over one problem in Clarabel's native form
//!   minimize q'x  s.t.  A x + s = b,  s in K
//! with A in compressed-sparse-column layout and K described as an ordered list
//! of (tag, dim) cones. PSD cones use the scaled upper-triangle (svec) layout:
//! columns stacked, off-diagonal entries multiplied by sqrt(2); `dim` is the
//! matrix side length.

use clarabel::algebra::*;
use clarabel::solver::*;
use std::os::raw::{c_double, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};

pub const CONE_ZERO: c_int = 0;
pub const CONE_NONNEG: c_int = 1;
pub const CONE_SOC: c_int = 2;
pub const CONE_PSD_TRIANGLE: c_int = 3;

pub const STATUS_SOLVED: c_int = 0;
pub const STATUS_ALMOST_SOLVED: c_int = 1;
pub const STATUS_PRIMAL_INFEASIBLE: c_int = 2;
pub const STATUS_DUAL_INFEASIBLE: c_int = 3;
pub const STATUS_ALMOST_PRIMAL_INFEASIBLE: c_int = 4;
pub const STATUS_ALMOST_DUAL_INFEASIBLE: c_int = 5;
pub const STATUS_MAX_ITERATIONS: c_int = 6;
pub const STATUS_MAX_TIME: c_int = 7;
pub const STATUS_NUMERICAL_ERROR: c_int = 8;
pub const STATUS_INSUFFICIENT_PROGRESS: c_int = 9;
pub const STATUS_OTHER: c_int = 10;

pub const ERR_BAD_ARGUMENT: c_int = -1;
pub const ERR_BAD_CONE: c_int = -2;
pub const ERR_DIMENSION_MISMATCH: c_int = -3;
pub const ERR_SETUP_FAILED: c_int = -4;
pub const ERR_PANIC: c_int = -5;

#[repr(C)]
pub struct ShimOptions {
    pub verbose: c_int,
    pub max_iter: u32,
    /// seconds; <= 0 means no limit
    pub time_limit: c_double,
    pub tol_feas: c_double,
    pub tol_gap_abs: c_double,
    pub tol_gap_rel: c_double,
    /// <= 0 keeps the solver default for the endgame knobs below.
    pub min_terminate_step_length: c_double,
    pub static_regularization_constant: c_double,
    pub linesearch_backtrack_step: c_double,
    pub dynamic_regularization_delta: c_double,
    pub dynamic_regularization_eps: c_double,
    /// 0 keeps the default.
    pub iterative_refinement_max_iter: u32,
    /// < 0 keeps the default; 0/1 force equilibration off/on.
    pub equilibrate_enable: c_int,
}

#[repr(C)]
#[derive(Default)]
pub struct ShimInfo {
    pub status: c_int,
    pub obj_val: c_double,
    pub obj_val_dual: c_double,
    pub iterations: u32,
    pub solve_time: c_double,
    pub r_prim: c_double,
    pub r_dual: c_double,
}

unsafe fn slice_or_empty<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

fn map_status(status: SolverStatus) -> c_int {
    match status {
        SolverStatus::Solved => STATUS_SOLVED,
        SolverStatus::AlmostSolved => STATUS_ALMOST_SOLVED,
        SolverStatus::PrimalInfeasible => STATUS_PRIMAL_INFEASIBLE,
        SolverStatus::DualInfeasible => STATUS_DUAL_INFEASIBLE,
        SolverStatus::AlmostPrimalInfeasible => STATUS_ALMOST_PRIMAL_INFEASIBLE,
        SolverStatus::AlmostDualInfeasible => STATUS_ALMOST_DUAL_INFEASIBLE,
        SolverStatus::MaxIterations => STATUS_MAX_ITERATIONS,
        SolverStatus::MaxTime => STATUS_MAX_TIME,
        SolverStatus::NumericalError => STATUS_NUMERICAL_ERROR,
        SolverStatus::InsufficientProgress => STATUS_INSUFFICIENT_PROGRESS,
        _ => STATUS_OTHER,
    }
}

/// Solve one conic program. Returns 0 on success (solver ran; see info.status
/// for the solve outcome) or a negative ERR_* code on malformed input.
///
/// # Safety
/// All pointers must be valid for the lengths implied by the dimension
/// arguments; `x_out` must hold `nvar` doubles, `s_out`/`z_out` (optional,
/// may be null) `nrow` doubles each.
#[no_mangle]
pub unsafe extern "C" fn clarabel_shim_solve(
    nvar: usize,
    nrow: usize,
    colptr: *const usize,
    rowidx: *const usize,
    avals: *const c_double,
    b: *const c_double,
    q: *const c_double,
    ncones: usize,
    cone_tags: *const c_int,
    cone_dims: *const usize,
    opts: *const ShimOptions,
    x_out: *mut c_double,
    s_out: *mut c_double,
    z_out: *mut c_double,
    info_out: *mut ShimInfo,
) -> c_int {
    if colptr.is_null() || info_out.is_null() || x_out.is_null() || opts.is_null() {
        return ERR_BAD_ARGUMENT;
    }
    let colptr = match slice_or_empty(colptr, nvar + 1) {
        Some(s) => s.to_vec(),
        None => return ERR_BAD_ARGUMENT,
    };
    let nnz = *colptr.last().unwrap_or(&0);
    let rowidx = match slice_or_empty(rowidx, nnz) {
        Some(s) => s.to_vec(),
        None => return ERR_BAD_ARGUMENT,
    };
    let avals = match slice_or_empty(avals, nnz) {
        Some(s) => s.to_vec(),
        None => return ERR_BAD_ARGUMENT,
    };
    let bvec = match slice_or_empty(b, nrow) {
        Some(s) => s.to_vec(),
        None => return ERR_BAD_ARGUMENT,
    };
    let qvec = match slice_or_empty(q, nvar) {
        Some(s) => s.to_vec(),
        None => return ERR_BAD_ARGUMENT,
    };
    let tags = match slice_or_empty(cone_tags, ncones) {
        Some(s) => s,
        None => return ERR_BAD_ARGUMENT,
    };
    let dims = match slice_or_empty(cone_dims, ncones) {
        Some(s) => s,
        None => return ERR_BAD_ARGUMENT,
    };

    let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(ncones);
    let mut rows_covered = 0usize;
    for k in 0..ncones {
        let d = dims[k];
        match tags[k] {
            CONE_ZERO => {
                rows_covered += d;
                cones.push(ZeroConeT(d));
            }
            CONE_NONNEG => {
                rows_covered += d;
                cones.push(NonnegativeConeT(d));
            }
            CONE_SOC => {
                rows_covered += d;
                cones.push(SecondOrderConeT(d));
            }
            CONE_PSD_TRIANGLE => {
                rows_covered += d * (d + 1) / 2;
                cones.push(PSDTriangleConeT(d));
            }
            _ => return ERR_BAD_CONE,
        }
    }
    if rows_covered != nrow {
        return ERR_DIMENSION_MISMATCH;
    }

    let o = &*opts;
    let result = catch_unwind(AssertUnwindSafe(|| {
        let p = CscMatrix::zeros((nvar, nvar));
        let a = CscMatrix::new(nrow, nvar, colptr, rowidx, avals);
        let mut builder = DefaultSettingsBuilder::default();
        builder
            .verbose(o.verbose != 0)
            .tol_feas(o.tol_feas)
            .tol_gap_abs(o.tol_gap_abs)
            .tol_gap_rel(o.tol_gap_rel)
            .chordal_decomposition_enable(false);
        if o.max_iter > 0 {
            builder.max_iter(o.max_iter);
        }
        if o.time_limit > 0.0 {
            builder.time_limit(o.time_limit);
        }
        if o.min_terminate_step_length > 0.0 {
            builder.min_terminate_step_length(o.min_terminate_step_length);
        }
        if o.static_regularization_constant > 0.0 {
            builder.static_regularization_constant(o.static_regularization_constant);
        }
        if o.linesearch_backtrack_step > 0.0 {
            builder.linesearch_backtrack_step(o.linesearch_backtrack_step);
        }
        if o.dynamic_regularization_delta > 0.0 {
            builder.dynamic_regularization_delta(o.dynamic_regularization_delta);
        }
        if o.dynamic_regularization_eps > 0.0 {
            builder.dynamic_regularization_eps(o.dynamic_regularization_eps);
        }
        if o.iterative_refinement_max_iter > 0 {
            builder.iterative_refinement_max_iter(o.iterative_refinement_max_iter);
        }
        if o.equilibrate_enable >= 0 {
            builder.equilibrate_enable(o.equilibrate_enable != 0);
        }
        let settings = match builder.build() {
            Ok(s) => s,
            Err(_) => return Err(ERR_SETUP_FAILED),
        };
        let mut solver = match DefaultSolver::new(&p, &qvec, &a, &bvec, &cones, settings) {
            Ok(s) => s,
            Err(_) => return Err(ERR_SETUP_FAILED),
        };
        solver.solve();
        Ok(solver.solution)
    }));

    match result {
        Ok(Ok(sol)) => {
            let info = &mut *info_out;
            info.status = map_status(sol.status);
            info.obj_val = sol.obj_val;
            info.obj_val_dual = sol.obj_val_dual;
            info.iterations = sol.iterations;
            info.solve_time = sol.solve_time;
            info.r_prim = sol.r_prim;
            info.r_dual = sol.r_dual;
            let x = std::slice::from_raw_parts_mut(x_out, nvar);
            for (i, v) in sol.x.iter().enumerate().take(nvar) {
                x[i] = *v;
            }
            if !s_out.is_null() {
                let s = std::slice::from_raw_parts_mut(s_out, nrow);
                for (i, v) in sol.s.iter().enumerate().take(nrow) {
                    s[i] = *v;
                }
            }
            if !z_out.is_null() {
                let z = std::slice::from_raw_parts_mut(z_out, nrow);
                for (i, v) in sol.z.iter().enumerate().take(nrow) {
                    z[i] = *v;
                }
            }
            0
        }
        Ok(Err(code)) => code,
        Err(_) => ERR_PANIC,
    }
}
