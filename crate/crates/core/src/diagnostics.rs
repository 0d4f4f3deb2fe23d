//! Energy and merit evaluation, descent auditing, KKT residuals, geometric
//! rate fitting, and the KL sufficient-condition check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::conj_prox;
use crate::solver::problem::Problem;
use crate::solver::trace::Trace;
use crate::vecmath::{self, dist, dot, norm, norm_inf, sub};

/// Objective `F(x) = g(Ax) + phi(x) - f(Kx)`.
pub fn eval_objective(prob: &Problem, x: &[f64]) -> Result<f64> {
    let ax = prob.a.apply(x)?;
    let kx = prob.k.apply(x)?;
    Ok(eval_objective_cached(prob, x, &ax, &kx))
}

/// Same with precomputed `Ax`, `Kx`.
pub fn eval_objective_cached(prob: &Problem, x: &[f64], ax: &[f64], kx: &[f64]) -> f64 {
    prob.g.eval(ax) + prob.phi.eval(x) - prob.f.eval(kx)
}

/// Saddle energy `Psi(x, y, z) = <z, Ax> - g*(z) + phi(x) - <Kx, y> + f*(y)`,
/// with the convention that `x` outside `S` yields `+inf`.
pub fn eval_saddle(prob: &Problem, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    if !prob.s.contains(x, 1e-9) {
        return Ok(f64::INFINITY);
    }
    let ax = prob.a.apply(x)?;
    let kx = prob.k.apply(x)?;
    Ok(eval_saddle_cached(prob, x, y, z, &ax, &kx))
}

/// `Psi` with precomputed operator images; assumes `x in S`.
pub fn eval_saddle_cached(
    prob: &Problem,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    ax: &[f64],
    kx: &[f64],
) -> f64 {
    dot(z, ax) - prob.g.eval_conj(z) + prob.phi.eval(x) - dot(kx, y) + prob.f.eval_conj(y)
}

/// Merit function
/// `varpi(x,y,z,u) = Psi + (alpha/2)(1 + 4 alpha/(at - alpha)) ||z-u||^2 - ((at - alpha)/2) ||z||^2`.
pub fn eval_merit(
    prob: &Problem,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    u: &[f64],
    alpha_tilde: f64,
    alpha: f64,
) -> Result<f64> {
    let psi = eval_saddle(prob, x, y, z)?;
    Ok(merit_from_saddle(psi, z, u, alpha_tilde, alpha))
}

pub fn merit_from_saddle(psi: f64, z: &[f64], u: &[f64], alpha_tilde: f64, alpha: f64) -> f64 {
    debug_assert!(alpha_tilde > alpha);
    let gap = alpha_tilde - alpha;
    psi + 0.5 * alpha * (1.0 + 4.0 * alpha / gap) * dist(z, u).powi(2)
        - 0.5 * gap * dot(z, z)
}

/// Discrete energy `psi_k` and its perturbation `omega_k`, both defined for
/// `k >= 2`. `alphas` holds `(alpha_k, alpha_{k-1}, alpha_{k-2})`.
pub fn eval_psi_and_omega(
    psi: f64,
    z_k: &[f64],
    z_km1: &[f64],
    alphas: (f64, f64, f64),
    alpha: f64,
) -> (f64, f64) {
    let (a_k, a_km1, a_km2) = alphas;
    let z_sq = dot(z_k, z_k);
    let dz_sq = dist(z_k, z_km1).powi(2);
    let psi_k = psi + alpha * (0.5 + 2.0 * alpha / (a_k - alpha)) * dz_sq
        - (0.5 * (a_km2 - alpha) - 2.0 * alpha * (a_km1 - a_km2) / (a_km1 - alpha)) * z_sq;
    let omega_k = (0.5 * (a_km2 - a_km1)
        + 2.0 * alpha * ((a_km2 - a_km1) / (a_km1 - alpha) - (a_km1 - a_k) / (a_k - alpha)))
        * z_sq;
    (psi_k, omega_k)
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentReport {
    /// Iterate indices k where the merit descent inequality failed.
    pub violations: Vec<usize>,
    pub checked: usize,
    pub descent_constant: f64,
}

/// Descent constant `c = min(mu, beta0, alpha (1 - 2 alpha / gamma))`.
pub fn descent_constant(mu: f64, beta0: f64, alpha: f64, gamma: f64) -> f64 {
    mu.min(beta0).min(alpha * (1.0 - 2.0 * alpha / gamma))
}

/// Verifies `varpi_{k+1} <= varpi_k - c ||x^k - x^{k+1}||^2 + tol` for every
/// iterate index `k >= frozen_at + 2` recorded in the trace.
///
/// Record `i` of a trace carries the merit of iterate `i + 1` and the velocity
/// of the transition `i -> i + 1`.
pub fn descent_audit(trace: &Trace, frozen_at: usize, c: f64, tol: f64) -> DescentReport {
    let mut violations = Vec::new();
    let mut checked = 0usize;
    let start = frozen_at + 2;
    for k in start..trace.records.len() {
        let (prev, cur) = (&trace.records[k - 1], &trace.records[k]);
        if let (Some(varpi_k), Some(varpi_k1)) = (prev.varpi, cur.varpi) {
            checked += 1;
            if varpi_k1 > varpi_k - c * cur.vel_x * cur.vel_x + tol {
                violations.push(k);
            }
        }
    }
    DescentReport {
        violations,
        checked,
        descent_constant: c,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// Fitted geometric ratio `q = exp(slope)`.
    pub q: f64,
    pub r_squared: f64,
    /// Index range `[start, end)` used for the fit.
    pub window: (usize, usize),
}

/// Least-squares line on `(k, log d_k)` over the trailing `tail_fraction` of
/// the positive entries; zeros are trimmed.
pub fn rate_fit(dists: &[f64], tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::invalid("tail_fraction must lie in (0, 1]"));
    }
    let usable: Vec<(usize, f64)> = dists
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0 && d.is_finite())
        .map(|(i, &d)| (i, d.ln()))
        .collect();
    let n_tail = ((usable.len() as f64) * tail_fraction).ceil() as usize;
    if n_tail < 5 {
        return Err(Error::invalid(
            "rate fit unavailable: fewer than 5 usable points",
        ));
    }
    let tail = &usable[usable.len() - n_tail..];
    let n = tail.len() as f64;
    let mean_k = tail.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
    let mean_l = tail.iter().map(|(_, l)| *l).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (k, l) in tail {
        let dx = *k as f64 - mean_k;
        let dy = l - mean_l;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    // syy below rounding scale means the input is constant up to float noise:
    // a flat line fits it perfectly.
    let syy_floor = n * (1e-13 * (1.0 + mean_l.abs())).powi(2);
    let r_squared = if syy > syy_floor && sxx > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    Ok(RateFit {
        q: slope.exp(),
        r_squared,
        window: (tail[0].0, tail[tail.len() - 1].0 + 1),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KlCheck {
    pub holds: bool,
    pub margin: f64,
    pub threshold: f64,
}

/// Strong-convergence sufficient condition `r1 > sigma_T (2 r2 / mu + lambda)`.
pub fn kl_condition_check(r1: f64, r2: f64, lambda: f64, sigma_t: f64, mu_inj: f64) -> KlCheck {
    let threshold = sigma_t * (2.0 * r2 / mu_inj + lambda);
    KlCheck {
        holds: r1 > threshold,
        margin: r1 - threshold,
        threshold,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KktResiduals {
    /// Norm of the change of one more x-update at the current point.
    pub x_resid: f64,
    pub y_resid: f64,
    pub z_resid: f64,
    /// `(alpha_tilde - alpha) ||z||`, bounding `dist(d g*(z), Ax)` at stationarity.
    pub certificate: f64,
}

/// Re-evaluates each of the three frozen-parameter updates once at the given
/// point and reports the fixed-point residuals.
pub fn kkt_residuals(
    prob: &Problem,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    alpha_tilde: f64,
    alpha: f64,
    beta: f64,
    rho: f64,
) -> Result<KktResiduals> {
    let grad = prob.phi.grad(x);
    let az = prob.a.adjoint_apply(z)?;
    let ky = prob.k.adjoint_apply(y)?;
    let mut pre_x = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        pre_x.push(x[i] - (az[i] - ky[i] + grad[i]) / rho);
    }
    let x_next = prob.s.project(&pre_x);

    let kx = prob.k.apply(&x_next)?;
    let y_arg = vecmath::add_scaled(y, 1.0 / beta, &kx);
    let y_next = conj_prox(prob.f.as_ref(), &y_arg, 1.0 / beta);

    let ax = prob.a.apply(&x_next)?;
    let delta = alpha / alpha_tilde;
    let mut z_arg = vecmath::scale(z, delta);
    for (zi, ai) in z_arg.iter_mut().zip(&ax) {
        *zi += ai / alpha_tilde;
    }
    let z_next = conj_prox(prob.g.as_ref(), &z_arg, 1.0 / alpha_tilde);

    Ok(KktResiduals {
        x_resid: dist(&x_next, x),
        y_resid: dist(&y_next, y),
        z_resid: dist(&z_next, z),
        certificate: (alpha_tilde - alpha) * norm(z),
    })
}

/// Sup-norm gap of the third KKT condition for the counterexample geometry,
/// where stationarity would require `z - x = c`.
pub fn third_condition_gap(c: &[f64], z: &[f64], x: &[f64]) -> f64 {
    norm_inf(&sub(c, &sub(z, x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_fit_exact_geometric() {
        let dists: Vec<f64> = (0..200).map(|k| 0.9f64.powi(k)).collect();
        let fit = rate_fit(&dists, 0.5).unwrap();
        assert!((fit.q - 0.9).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_constant_input() {
        let dists = vec![2.5; 50];
        let fit = rate_fit(&dists, 1.0).unwrap();
        assert!((fit.q - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_too_few_points() {
        assert!(rate_fit(&[1.0, 0.5, 0.25], 1.0).is_err());
        assert!(rate_fit(&[0.0; 100], 1.0).is_err());
    }

    #[test]
    fn omega_plugin_arithmetic() {
        // r = 1, alpha = 1, gamma = 3: alpha_0 = 4, alpha_1 = 2.5, alpha_2 = 2
        let z2 = vec![1.0, 1.0]; // ||z||^2 = 2
        let (_, omega) = eval_psi_and_omega(0.0, &z2, &[0.0, 0.0], (2.0, 2.5, 4.0), 1.0);
        assert!((omega - 1.75 * 2.0).abs() < 1e-12, "omega = {omega}");
    }

    #[test]
    fn psi_k_constant_alpha_matches_merit_shift() {
        // With alpha_k constant = at, omega vanishes and psi_k equals
        // Psi + alpha(1/2 + 2 alpha/(at-alpha))||dz||^2 - ((at-alpha)/2)||z||^2,
        // which is merit_from_saddle with u = z_{k-1} up to the exact same terms.
        let at = 2.0;
        let alpha = 1.0;
        let z = vec![0.7, -0.3];
        let u = vec![0.5, 0.1];
        let psi = 3.25;
        let (psi_k, omega) = eval_psi_and_omega(psi, &z, &u, (at, at, at), alpha);
        assert_eq!(omega, 0.0);
        let merit = merit_from_saddle(psi, &z, &u, at, alpha);
        assert!((psi_k - merit).abs() < 1e-12);
    }

    #[test]
    fn kl_check_examples() {
        let c = kl_condition_check(9.0, 0.6, 0.1, 4.0, 2.0);
        assert!(c.holds);
        assert!((c.margin - 6.2).abs() < 1e-12);
        let boundary = kl_condition_check(2.8, 0.6, 0.1, 4.0, 2.0);
        assert!(!boundary.holds);
        let free = kl_condition_check(0.5, 0.0, 0.0, 4.0, 2.0);
        assert!(free.holds);
    }
}
