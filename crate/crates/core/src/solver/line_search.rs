//! Adaptive splitting with a nonmonotone line search on the primal update.
//!
//! The update order differs from the plain adaptive scheme: the dual updates
//! use the current primal iterate, then the primal step direction is assembled
//! from the fresh duals and a backtracking loop over scaled step sizes accepts
//! the first candidate passing the nonmonotone test
//!
//! ```text
//!     F(x_hat) <= max_{[k-T]+ <= t <= k} F(x^t) - (c/2) ||x^k - x_hat||^2
//! ```
//!
//! When no candidate passes, the unscaled step is taken and the event is
//! flagged in the trace.

use std::collections::VecDeque;
use std::time::Instant;

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::functions::conj_prox;
use crate::schedule::StepSchedule;
use crate::solver::problem::{Problem, StopRule, StopStatus};
use crate::solver::step::{initial_state, record_iteration, IterationDiagnostics};
use crate::solver::trace::Trace;
use crate::vecmath::{self, all_finite, dist};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LineSearchParams {
    /// Step-size growth factor within the backtracking loop, > 1.
    pub eta: f64,
    /// Initial shrink factor, in (0, 1).
    pub nu: f64,
    /// Quadratic decrease coefficient of the acceptance test.
    pub c: f64,
    /// Length of the trailing objective window.
    pub t_lookback: usize,
    /// Maximum number of candidates per iteration.
    pub t_max: usize,
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0) {
            return Err(Error::Config("eta > 1 violated".into()));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config("nu in (0,1) violated".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::Config("c > 0 violated".into()));
        }
        if self.t_max < 1 {
            return Err(Error::Config("t_max >= 1 violated".into()));
        }
        Ok(())
    }
}

pub fn adaptive_dpfs_ls(
    prob: &Problem,
    sched: &StepSchedule,
    ls: &LineSearchParams,
    init: (Vec<f64>, Vec<f64>, Vec<f64>),
    stop: StopRule,
    observer: impl FnMut(&crate::solver::trace::TraceRecord, &[f64]),
) -> Result<Trace> {
    adaptive_dpfs_ls_run(prob, sched, ls, init, stop, observer).map(|(trace, _)| trace)
}

/// Same as [`adaptive_dpfs_ls`], additionally returning the final state.
pub fn adaptive_dpfs_ls_run(
    prob: &Problem,
    sched: &StepSchedule,
    ls: &LineSearchParams,
    init: (Vec<f64>, Vec<f64>, Vec<f64>),
    stop: StopRule,
    mut observer: impl FnMut(&crate::solver::trace::TraceRecord, &[f64]),
) -> Result<(Trace, crate::solver::problem::SolverState)> {
    prob.validate()?;
    sched.validate()?;
    ls.validate()?;
    let mut st = initial_state(prob, sched, init)?;
    let beta0 = sched.beta0;
    let mut trace = Trace::new();
    let mut alpha_km1 = st.alpha_k;
    let mut alpha_km2 = st.alpha_k;

    let mut ax_cur = prob.a.apply(&st.x)?;
    let mut kx_cur = prob.k.apply(&st.x)?;
    let mut f_cur = diagnostics::eval_objective_cached(prob, &st.x, &ax_cur, &kx_cur);
    if !f_cur.is_finite() {
        return Err(Error::ObjectiveEvaluation(
            "objective not finite at the initial point".into(),
        ));
    }
    let mut f_window: VecDeque<f64> = VecDeque::with_capacity(ls.t_lookback + 1);
    f_window.push_back(f_cur);

    for k in 0..stop.max_iters {
        let started = Instant::now();
        let prev = st.clone();
        let prev_alpha = st.alpha_k;

        // Dual updates from the current primal iterate.
        let y_arg = vecmath::add_scaled(&st.y, 1.0 / beta0, &kx_cur);
        let y_next = conj_prox(prob.f.as_ref(), &y_arg, 1.0 / beta0);
        let mut z_arg = vecmath::scale(&st.z, st.delta_k);
        for (zi, ai) in z_arg.iter_mut().zip(&ax_cur) {
            *zi += ai / st.alpha_k;
        }
        let z_next = conj_prox(prob.g.as_ref(), &z_arg, 1.0 / st.alpha_k);

        st.z_prev = std::mem::replace(&mut st.z, z_next);
        st.y = y_next;

        // Step-size control with the fresh dual iterate.
        let fired = crate::solver::step::update_schedule_after_step(sched, &mut st, k)?;
        let _ = fired;

        // Primal direction and nonmonotone backtracking.
        let grad = prob.phi.grad(&st.x);
        let ky = prob.k.adjoint_apply(&st.y)?;
        let az = prob.a.adjoint_apply(&st.z)?;
        let mut dir = Vec::with_capacity(st.x.len());
        for i in 0..st.x.len() {
            dir.push(-grad[i] + ky[i] - az[i]);
        }

        let rho_base = st.rho_k;
        let f_max = f_window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted: Option<(Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> = None;
        for j in 0..ls.t_max {
            let rho_j = ls.nu * ls.eta.powi(j as i32) * rho_base;
            let cand = prob.s.project(&vecmath::add_scaled(&st.x, 1.0 / rho_j, &dir));
            let ax_c = prob.a.apply(&cand)?;
            let kx_c = prob.k.apply(&cand)?;
            let f_c = diagnostics::eval_objective_cached(prob, &cand, &ax_c, &kx_c);
            if !f_c.is_finite() {
                return Err(Error::ObjectiveEvaluation(format!(
                    "objective not finite at line-search candidate (iteration {k})"
                )));
            }
            let movement = dist(&st.x, &cand);
            if f_c <= f_max - 0.5 * ls.c * movement * movement {
                accepted = Some((cand, ax_c, kx_c, f_c, rho_j));
                break;
            }
        }
        let fallback = accepted.is_none();
        let (x_next, ax_n, kx_n, f_n, rho_acc) = match accepted {
            Some(t) => t,
            None => {
                // Unscaled step; the plain scheme's descent theory covers it.
                let cand = prob
                    .s
                    .project(&vecmath::add_scaled(&st.x, 1.0 / rho_base, &dir));
                let ax_c = prob.a.apply(&cand)?;
                let kx_c = prob.k.apply(&cand)?;
                let f_c = diagnostics::eval_objective_cached(prob, &cand, &ax_c, &kx_c);
                (cand, ax_c, kx_c, f_c, rho_base)
            }
        };
        if !all_finite(&x_next) {
            return Err(Error::Divergence {
                iteration: k,
                what: "non-finite primal iterate in line search".into(),
            });
        }
        st.x = x_next;
        st.k = k + 1;
        ax_cur = ax_n;
        kx_cur = kx_n;
        f_cur = f_n;
        f_window.push_back(f_cur);
        while f_window.len() > ls.t_lookback + 1 {
            f_window.pop_front();
        }

        let rec = record_iteration(
            prob,
            sched,
            &prev,
            &st,
            &ax_cur,
            &kx_cur,
            &IterationDiagnostics {
                alpha_km1,
                alpha_km2,
            },
            rho_acc,
            fallback,
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
