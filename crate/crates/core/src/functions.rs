//! Convex-function toolkit: proximal mappings, closed-form conjugates,
//! conjugate proxes via the Moreau identity, smooth terms and projectable sets.
//!
//! Conventions: `prox(w, a)` minimizes `f(x) + ||x - w||^2 / (2a)`. Indicator
//! conjugates evaluate to `0` inside the set (with a 1e-9 containment
//! tolerance) and `+inf` outside.

use crate::error::{Error, Result};
use crate::vecmath::{self, norm};

/// Containment tolerance for indicator-type conjugates, absorbing
/// floating-point drift in the energy bookkeeping.
pub const INDICATOR_TOL: f64 = 1e-9;

/// A proper convex function with a computable prox and closed-form conjugate.
pub trait ProxCapable: Send + Sync {
    fn eval(&self, x: &[f64]) -> f64;
    fn prox(&self, w: &[f64], alpha: f64) -> Vec<f64>;
    fn eval_conj(&self, z: &[f64]) -> f64;
}

/// A differentiable function with Lipschitz-continuous gradient.
pub trait Smooth: Send + Sync {
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    fn lipschitz(&self) -> f64;
}

/// A closed convex set with a cheap exact projection.
pub trait ProjectableSet: Send + Sync {
    fn project(&self, x: &[f64]) -> Vec<f64>;
    fn contains(&self, x: &[f64], tol: f64) -> bool;
}

/// Componentwise soft threshold; the prox of the l1 norm with parameter `alpha`.
pub fn shrink(w: &[f64], alpha: f64) -> Vec<f64> {
    debug_assert!(alpha >= 0.0);
    w.iter()
        .map(|&v| v.signum() * (v.abs() - alpha).max(0.0))
        .collect()
}

/// Prox of `||x||_1 + (lambda/2) ||x||_2^2`.
pub fn prox_elastic_l1(w: &[f64], alpha: f64, lambda: f64) -> Vec<f64> {
    let mut v = shrink(w, alpha);
    let scale = 1.0 + alpha * lambda;
    for x in v.iter_mut() {
        *x /= scale;
    }
    v
}

/// Prox of `r2 ||x||_2 + (lambda/2) ||x||_2^2`, radial closed form.
/// Returns 0 when `w = 0`.
pub fn prox_smoothed_l2(w: &[f64], alpha: f64, r2: f64, lambda: f64) -> Vec<f64> {
    let nw = norm(w);
    if nw == 0.0 {
        return vec![0.0; w.len()];
    }
    let t = (nw - alpha * r2).max(0.0) / (1.0 + alpha * lambda);
    vecmath::scale(w, t / nw)
}

/// Prox of the conjugate, derived from the Moreau identity
/// `prox_{f,a}(w) + a prox_{f*,1/a}(w/a) = w`:
///
/// ```text
///     prox_{f*,a}(w) = w - a * prox_{f,1/a}(w / a)
/// ```
pub fn conj_prox(f: &dyn ProxCapable, w: &[f64], alpha: f64) -> Vec<f64> {
    debug_assert!(alpha > 0.0);
    let scaled: Vec<f64> = vecmath::scale(w, 1.0 / alpha);
    let p = f.prox(&scaled, 1.0 / alpha);
    w.iter().zip(&p).map(|(wi, pi)| wi - alpha * pi).collect()
}

/// Conjugate of `||.||_1 + (lambda/2) ||.||_2^2`: `||shrink(z,1)||^2 / (2 lambda)`.
pub fn eval_conj_elastic_l1(z: &[f64], lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::Unsupported(
            "conjugate of the plain l1 norm is an indicator; use ElasticL1 with lambda = 0".into(),
        ));
    }
    let s = shrink(z, 1.0);
    Ok(vecmath::dot(&s, &s) / (2.0 * lambda))
}

/// Conjugate of `r2 ||.||_2 + (lambda/2) ||.||_2^2`: `max(||y|| - r2, 0)^2 / (2 lambda)`.
pub fn eval_conj_smoothed_l2(y: &[f64], r2: f64, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::Unsupported(
            "conjugate of r2||.||_2 with lambda = 0 is an indicator".into(),
        ));
    }
    let t = (norm(y) - r2).max(0.0);
    Ok(t * t / (2.0 * lambda))
}

/// Radial projection onto the closed ball `{x : ||x - center|| <= radius}`.
pub fn project_ball(center: &[f64], radius: f64, x: &[f64]) -> Vec<f64> {
    debug_assert!(radius > 0.0);
    let d = vecmath::dist(x, center);
    if d <= radius {
        return x.to_vec();
    }
    let s = radius / d;
    center
        .iter()
        .zip(x)
        .map(|(c, xi)| c + s * (xi - c))
        .collect()
}

/// `g(x) = ||x||_1 + (lambda/2)||x||_2^2`. With `lambda = 0` this is the plain
/// l1 norm, whose conjugate is the indicator of the unit sup-norm ball.
pub struct ElasticL1 {
    pub lambda: f64,
}

impl ProxCapable for ElasticL1 {
    fn eval(&self, x: &[f64]) -> f64 {
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        l1 + 0.5 * self.lambda * vecmath::dot(x, x)
    }
    fn prox(&self, w: &[f64], alpha: f64) -> Vec<f64> {
        prox_elastic_l1(w, alpha, self.lambda)
    }
    fn eval_conj(&self, z: &[f64]) -> f64 {
        if self.lambda > 0.0 {
            eval_conj_elastic_l1(z, self.lambda).expect("lambda > 0")
        } else if vecmath::norm_inf(z) <= 1.0 + INDICATOR_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `f(x) = r2 ||x||_2 + (lambda/2)||x||_2^2`. With `lambda = 0` the conjugate
/// is the indicator of the l2 ball of radius `r2`.
pub struct SmoothedL2 {
    pub r2: f64,
    pub lambda: f64,
}

impl ProxCapable for SmoothedL2 {
    fn eval(&self, x: &[f64]) -> f64 {
        self.r2 * norm(x) + 0.5 * self.lambda * vecmath::dot(x, x)
    }
    fn prox(&self, w: &[f64], alpha: f64) -> Vec<f64> {
        prox_smoothed_l2(w, alpha, self.r2, self.lambda)
    }
    fn eval_conj(&self, y: &[f64]) -> f64 {
        if self.lambda > 0.0 {
            eval_conj_smoothed_l2(y, self.r2, self.lambda).expect("lambda > 0")
        } else if norm(y) <= self.r2 + INDICATOR_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Linear form `f(x) = <c, x>`; its conjugate is the indicator of `{c}` and
/// the conjugate prox returns `c` for every input.
pub struct LinearForm {
    pub c: Vec<f64>,
}

impl ProxCapable for LinearForm {
    fn eval(&self, x: &[f64]) -> f64 {
        vecmath::dot(&self.c, x)
    }
    fn prox(&self, w: &[f64], alpha: f64) -> Vec<f64> {
        vecmath::add_scaled(w, -alpha, &self.c)
    }
    fn eval_conj(&self, z: &[f64]) -> f64 {
        let gap = z
            .iter()
            .zip(&self.c)
            .fold(0.0f64, |m, (zi, ci)| m.max((zi - ci).abs()));
        if gap <= INDICATOR_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// The zero function; prox is the identity and the conjugate the indicator of {0}.
pub struct ZeroFn;

impl ProxCapable for ZeroFn {
    fn eval(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn prox(&self, w: &[f64], _alpha: f64) -> Vec<f64> {
        w.to_vec()
    }
    fn eval_conj(&self, z: &[f64]) -> f64 {
        if vecmath::norm_inf(z) <= INDICATOR_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `phi(x) = (r1/2) ||x - u||^2`, the data-fidelity term of the denoising model.
pub struct QuadFidelity {
    pub r1: f64,
    pub u: Vec<f64>,
}

impl Smooth for QuadFidelity {
    fn eval(&self, x: &[f64]) -> f64 {
        let d = vecmath::dist(x, &self.u);
        0.5 * self.r1 * d * d
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.u).map(|(xi, ui)| self.r1 * (xi - ui)).collect()
    }
    fn lipschitz(&self) -> f64 {
        self.r1
    }
}

/// `phi(x) = -1/2 ||x||^2`, the concave term of the divergence counterexample.
pub struct NegHalfSqNorm;

impl Smooth for NegHalfSqNorm {
    fn eval(&self, x: &[f64]) -> f64 {
        -0.5 * vecmath::dot(x, x)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        vecmath::scale(x, -1.0)
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Closed l2 ball around `center`.
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl ProjectableSet for Ball {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        project_ball(&self.center, self.radius, x)
    }
    fn contains(&self, x: &[f64], tol: f64) -> bool {
        vecmath::dist(x, &self.center) <= self.radius + tol
    }
}
