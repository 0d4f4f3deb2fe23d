//! The DPFS iteration and its adaptive variant with the freeze criterion.

use std::time::Instant;

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::functions::conj_prox;
use crate::schedule::StepSchedule;
use crate::solver::problem::{Problem, SolverState, StopRule, StopStatus};
use crate::solver::trace::{Trace, TraceRecord};
use crate::vecmath::{self, all_finite, dist, norm};

/// Output of one splitting step: the new state plus the operator images of the
/// fresh primal iterate, which the diagnostics reuse.
pub struct StepOutput {
    pub state: SolverState,
    pub ax: Vec<f64>,
    pub kx: Vec<f64>,
}

/// One full splitting step with the parameter values stored in `st`:
///
/// ```text
///     x+ = Proj_S(x - (A*z - K*y + grad phi(x)) / rho)
///     y+ = prox_{f*, 1/beta}(y + K x+ / beta)
///     z+ = prox_{g*, 1/alpha}(delta z + A x+ / alpha)
/// ```
pub fn dpfs_step(prob: &Problem, st: &SolverState, _sched: &StepSchedule) -> Result<StepOutput> {
    let az = prob.a.adjoint_apply(&st.z)?;
    let ky = prob.k.adjoint_apply(&st.y)?;
    let grad = prob.phi.grad(&st.x);

    let mut pre_x = Vec::with_capacity(st.x.len());
    for i in 0..st.x.len() {
        pre_x.push(st.x[i] - (az[i] - ky[i] + grad[i]) / st.rho_k);
    }
    let x_next = prob.s.project(&pre_x);

    let kx = prob.k.apply(&x_next)?;
    let y_arg = vecmath::add_scaled(&st.y, 1.0 / st.beta_k, &kx);
    let y_next = conj_prox(prob.f.as_ref(), &y_arg, 1.0 / st.beta_k);

    let ax = prob.a.apply(&x_next)?;
    let mut z_arg = vecmath::scale(&st.z, st.delta_k);
    for (zi, ai) in z_arg.iter_mut().zip(&ax) {
        *zi += ai / st.alpha_k;
    }
    let z_next = conj_prox(prob.g.as_ref(), &z_arg, 1.0 / st.alpha_k);

    if !(all_finite(&x_next) && all_finite(&y_next) && all_finite(&z_next)) {
        return Err(Error::Divergence {
            iteration: st.k,
            what: "non-finite iterate produced by the splitting step".into(),
        });
    }

    let state = SolverState {
        x: x_next,
        y: y_next,
        z_prev: st.z.clone(),
        z: z_next,
        alpha_k: st.alpha_k,
        rho_k: st.rho_k,
        delta_k: st.delta_k,
        beta_k: st.beta_k,
        frozen: st.frozen,
        frozen_at: st.frozen_at,
        schedule_index: st.schedule_index,
        k: st.k + 1,
    };
    Ok(StepOutput { state, ax, kx })
}

pub(crate) fn initial_state(
    prob: &Problem,
    sched: &StepSchedule,
    init: (Vec<f64>, Vec<f64>, Vec<f64>),
) -> Result<SolverState> {
    let (x0, y0, z0) = init;
    if !(all_finite(&x0) && all_finite(&y0) && all_finite(&z0)) {
        return Err(Error::invalid("non-finite initial point"));
    }
    let alpha0 = sched.alpha_at(0);
    Ok(SolverState {
        x: prob.s.project(&x0),
        y: y0,
        z_prev: z0.clone(),
        z: z0,
        alpha_k: alpha0,
        rho_k: sched.rho_of(alpha0)?,
        delta_k: sched.delta_of(alpha0),
        beta_k: sched.beta_at(0),
        frozen: false,
        frozen_at: None,
        schedule_index: 0,
        k: 0,
    })
}

/// Applies the freeze criterion after a step and advances the schedule index
/// when it fires. Records the iteration after the last decrease event as the
/// freeze index, matching the semantics of the constant-parameter tail.
pub(crate) fn update_schedule_after_step(
    sched: &StepSchedule,
    st: &mut SolverState,
    k: usize,
) -> Result<bool> {
    if sched.should_decrease(st.alpha_k, &st.z) {
        st.schedule_index += 1;
        st.alpha_k = sched.alpha_at(st.schedule_index);
        st.rho_k = sched.rho_of(st.alpha_k)?;
        st.delta_k = sched.delta_of(st.alpha_k);
        st.frozen = false;
        st.frozen_at = Some(k + 1);
        Ok(true)
    } else {
        st.frozen = true;
        if st.frozen_at.is_none() {
            st.frozen_at = Some(0);
        }
        Ok(false)
    }
}

pub(crate) struct IterationDiagnostics {
    pub alpha_km1: f64,
    pub alpha_km2: f64,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn record_iteration(
    prob: &Problem,
    sched: &StepSchedule,
    prev: &SolverState,
    st: &SolverState,
    ax: &[f64],
    kx: &[f64],
    hist: &IterationDiagnostics,
    accepted_rho: f64,
    ls_fallback: bool,
    started: Instant,
) -> TraceRecord {
    let f_obj = diagnostics::eval_objective_cached(prob, &st.x, ax, kx);
    let psi = diagnostics::eval_saddle_cached(prob, &st.x, &st.y, &st.z, ax, kx);
    let k_new = st.k;
    let psi_k = if k_new >= 2 {
        let (v, _) = diagnostics::eval_psi_and_omega(
            psi,
            &st.z,
            &st.z_prev,
            (prev.alpha_k, hist.alpha_km1, hist.alpha_km2),
            sched.alpha,
        );
        Some(v)
    } else {
        None
    };
    // The merit is evaluated with the current alpha as the frozen value; it is
    // meaningful for iterations at and after the freeze index, where alpha no
    // longer changes.
    let varpi = if st.alpha_k > sched.alpha {
        Some(diagnostics::merit_from_saddle(
            psi,
            &st.z,
            &st.z_prev,
            st.alpha_k,
            sched.alpha,
        ))
    } else {
        None
    };
    TraceRecord {
        k: prev.k,
        norm_x: norm(&st.x),
        norm_y: norm(&st.y),
        norm_z: norm(&st.z),
        vel_x: dist(&prev.x, &st.x),
        vel_y: dist(&prev.y, &st.y),
        vel_z: dist(&prev.z, &st.z),
        f_obj,
        psi,
        psi_k,
        varpi,
        cert: (prev.alpha_k - sched.alpha) * norm(&st.z),
        alpha_k: prev.alpha_k,
        rho_k: prev.rho_k,
        accepted_rho,
        ls_fallback,
        t_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

/// Adaptive DPFS: the splitting step with the step-size control strategy.
/// Each iteration performs one step, then decreases the step sizes only while
/// the criterion `(alpha_k - alpha) ||z^{k+1}|| > eps` keeps firing.
pub fn adaptive_dpfs(
    prob: &Problem,
    sched: &StepSchedule,
    init: (Vec<f64>, Vec<f64>, Vec<f64>),
    stop: StopRule,
    observer: impl FnMut(&TraceRecord, &[f64]),
) -> Result<Trace> {
    adaptive_dpfs_run(prob, sched, init, stop, observer).map(|(trace, _)| trace)
}

/// Same as [`adaptive_dpfs`], additionally returning the final state for
/// callers that need the reconstruction.
pub fn adaptive_dpfs_run(
    prob: &Problem,
    sched: &StepSchedule,
    init: (Vec<f64>, Vec<f64>, Vec<f64>),
    stop: StopRule,
    mut observer: impl FnMut(&TraceRecord, &[f64]),
) -> Result<(Trace, SolverState)> {
    prob.validate()?;
    sched.validate()?;
    let mut st = initial_state(prob, sched, init)?;
    let mut trace = Trace::new();
    let mut alpha_km1 = st.alpha_k;
    let mut alpha_km2 = st.alpha_k;

    for k in 0..stop.max_iters {
        let started = Instant::now();
        let prev_alpha = st.alpha_k;
        let out = dpfs_step(prob, &st, sched)?;
        let prev = st;
        st = out.state.clone();
        update_schedule_after_step(sched, &mut st, k)?;
        st.beta_k = sched.beta_at(k + 1);

        let rec = record_iteration(
            prob,
            sched,
            &prev,
            &st,
            &out.ax,
            &out.kx,
            &IterationDiagnostics {
                alpha_km1,
                alpha_km2,
            },
            prev.rho_k,
            false,
            started,
        );
        observer(&rec, &st.x);
        let stop_now = stop
            .vel_tol
            .map(|t| rec.vel_x < t && rec.vel_y < t && rec.vel_z < t)
            .unwrap_or(false);
        trace.records.push(rec);
        alpha_km2 = alpha_km1;
        alpha_km1 = prev_alpha;
        if stop_now {
            trace.status = StopStatus::VelocityTol;
            break;
        }
    }
    trace.frozen_at = st.frozen_at;
    Ok((trace, st))
}
