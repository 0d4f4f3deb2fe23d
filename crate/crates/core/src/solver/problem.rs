//! The problem tuple `(g, f, phi, A, K, S)` and the shared solver state.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functions::{ProjectableSet, ProxCapable, Smooth};
use crate::linops::LinearOperator;

/// The structured DC program `min_{x in S} g(Ax) + phi(x) - f(Kx)`.
#[derive(Clone)]
pub struct Problem {
    pub g: Arc<dyn ProxCapable>,
    pub f: Arc<dyn ProxCapable>,
    pub phi: Arc<dyn Smooth>,
    pub a: Arc<dyn LinearOperator>,
    pub k: Arc<dyn LinearOperator>,
    pub s: Arc<dyn ProjectableSet>,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.a.n_in()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.n_in() != self.k.n_in() {
            return Err(Error::invalid(format!(
                "A and K must share the primal dimension ({} vs {})",
                self.a.n_in(),
                self.k.n_in()
            )));
        }
        // S nonempty and self-consistent at the projection of the origin.
        let p0 = self.s.project(&vec![0.0; self.n()]);
        if !self.s.contains(&p0, 1e-9) {
            return Err(Error::invalid("S.project(0) does not land in S"));
        }
        Ok(())
    }
}

/// Iterate triple and current schedule values.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub alpha_k: f64,
    pub rho_k: f64,
    pub delta_k: f64,
    pub beta_k: f64,
    /// True once the decrease criterion has stopped firing.
    pub frozen: bool,
    /// Iteration index of the last decrease event, if any occurred.
    pub frozen_at: Option<usize>,
    /// Schedule index: advanced once per decrease event.
    pub schedule_index: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub max_iters: usize,
    /// Optional velocity stop: all three velocities below this value.
    pub vel_tol: Option<f64>,
}

impl StopRule {
    pub fn max_iters(n: usize) -> Self {
        StopRule {
            max_iters: n,
            vel_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopStatus {
    MaxIters,
    VelocityTol,
}
