//! The 2-D divergence instance showing that the conceptual scheme with
//! vanishing step-size gaps can fail the third stationarity condition:
//!
//! ```text
//!     min  ||x||_1 - 1/2 ||x||^2 - <c, x>    over  ||x||_2 <= 200,
//! ```
//!
//! with `c = (2, 2)`, `gamma = 3`, `alpha = 1`, `mu = 1/2`, so that
//! `alpha_k = 1 + 3/(k+1)` and `rho_k = 1 + (k+1)^2 / 2` when the step sizes
//! decrease every iteration. The limit satisfies `(z - x)_i <= 1` while
//! stationarity would require `z - x = c = (2, 2)`.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::functions::{Ball, ElasticL1, LinearForm, NegHalfSqNorm};
use crate::linops::Identity;
use crate::schedule::StepSchedule;
use crate::solver::problem::Problem;
use crate::solver::step::{dpfs_step, initial_state, record_iteration, IterationDiagnostics};
use crate::solver::trace::Trace;
use crate::vecmath::{norm, norm_inf};

pub const COUNTEREXAMPLE_C: [f64; 2] = [2.0, 2.0];

#[derive(Debug, Clone, serde::Serialize)]
pub struct CounterexampleReport {
    pub iterations: usize,
    /// Largest `||x^k||_2` observed across the run.
    pub max_norm_x: f64,
    /// Partial sum of `1 / rho_k`.
    pub rho_inv_sum: f64,
    /// `min_i (c - (z - x))_i` at the final iterate; stationarity needs 0.
    pub kkt_gap: f64,
    pub final_x: Vec<f64>,
    pub final_z: Vec<f64>,
    pub final_vel: (f64, f64, f64),
}

pub(crate) fn counterexample_problem() -> Problem {
    Problem {
        g: Arc::new(ElasticL1 { lambda: 0.0 }),
        f: Arc::new(LinearForm {
            c: COUNTEREXAMPLE_C.to_vec(),
        }),
        phi: Arc::new(NegHalfSqNorm),
        a: Arc::new(Identity { n: 2 }),
        k: Arc::new(Identity { n: 2 }),
        s: Arc::new(Ball {
            center: vec![0.0; 2],
            radius: 200.0,
        }),
    }
}

pub(crate) fn counterexample_schedule(eps: f64) -> StepSchedule {
    StepSchedule {
        alpha: 1.0,
        gamma: 3.0,
        r_exp: 1.0,
        mu: 0.5,
        lip_phi: 1.0,
        sigma_a: 1.0,
        eps,
        beta0: 1.0,
    }
}

/// Runs the conceptual scheme on the counterexample instance: the step sizes
/// decrease every iteration, with no freeze criterion.
pub fn run_counterexample(n_iters: usize, z0: &[f64]) -> Result<(Trace, CounterexampleReport)> {
    if z0.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: z0.len(),
        });
    }
    if norm_inf(z0) > 1.0 + 1e-12 {
        return Err(Error::invalid("counterexample requires ||z0||_inf <= 1"));
    }
    let prob = counterexample_problem();
    let sched = counterexample_schedule(0.0);
    let x0 = vec![0.0; 2];
    let y0 = COUNTEREXAMPLE_C.to_vec();

    let mut st = initial_state(&prob, &sched, (x0, y0, z0.to_vec()))?;
    let mut trace = Trace::new();
    let mut alpha_km1 = st.alpha_k;
    let mut alpha_km2 = st.alpha_k;
    let mut max_norm_x = 0.0f64;
    let mut rho_inv_sum = 0.0f64;

    for k in 0..n_iters {
        let started = Instant::now();
        let prev_alpha = st.alpha_k;
        rho_inv_sum += 1.0 / st.rho_k;
        let out = dpfs_step(&prob, &st, &sched)?;
        let prev = st;
        st = out.state;

        let nx = norm(&st.x);
        max_norm_x = max_norm_x.max(nx);
        if nx >= 200.0 - 1e-6 {
            return Err(Error::Divergence {
                iteration: k,
                what: format!("||x|| reached the feasibility radius ({nx:.6})"),
            });
        }

        // Unconditional step-size decrease, one schedule index per iteration.
        st.schedule_index = k + 1;
        st.alpha_k = sched.alpha_at(st.schedule_index);
        st.rho_k = sched.rho_of(st.alpha_k)?;
        st.delta_k = sched.delta_of(st.alpha_k);

        let rec = record_iteration(
            &prob,
            &sched,
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
        trace.records.push(rec);
        alpha_km2 = alpha_km1;
        alpha_km1 = prev_alpha;
    }

    let kkt_gap = COUNTEREXAMPLE_C
        .iter()
        .zip(st.z.iter().zip(&st.x))
        .map(|(ci, (zi, xi))| ci - (zi - xi))
        .fold(f64::INFINITY, f64::min);
    let final_vel = trace
        .last()
        .map(|r| (r.vel_x, r.vel_y, r.vel_z))
        .unwrap_or((0.0, 0.0, 0.0));
    let report = CounterexampleReport {
        iterations: n_iters,
        max_norm_x,
        rho_inv_sum,
        kkt_gap,
        final_x: st.x.clone(),
        final_z: st.z.clone(),
        final_vel,
    };
    Ok((trace, report))
}
