//! Linear-operator abstraction: dense, identity, and a real-valued Gabor/STFT
//! operator, plus power-iteration estimation of the squared operator norm.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath;

/// A real linear operator `R^{n_in} -> R^{n_out}` together with its adjoint.
///
/// Implementations are immutable after construction and safe to share across
/// threads; `apply`/`adjoint_apply` are re-entrant.
pub trait LinearOperator: Send + Sync {
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>>;
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// The identity on `R^n`.
pub struct Identity {
    pub n: usize,
}

impl LinearOperator for Identity {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        Ok(x.to_vec())
    }
    fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, y.len())?;
        Ok(y.to_vec())
    }
}

/// Dense matrix in row-major storage.
pub struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "dense operator expects {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Dense { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::invalid("ragged rows in dense operator"));
            }
            data.extend_from_slice(row);
        }
        Dense::new(r, c, data)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Dense {
            rows: n,
            cols: n,
            data,
        }
    }
}

impl LinearOperator for Dense {
    fn n_in(&self) -> usize {
        self.cols
    }
    fn n_out(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = vecmath::dot(&self.data[i * self.cols..(i + 1) * self.cols], x);
        }
        Ok(out)
    }
    fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..self.cols {
                out[j] += row[j] * y[i];
            }
        }
        Ok(out)
    }
}

/// Estimates `sigma_A = ||A||^2` by power iteration on `A^*A` from a fixed
/// seeded random start. The Rayleigh-quotient estimates are monotone
/// nondecreasing; iteration stops when two successive estimates differ
/// relatively by less than `tol`.
pub fn op_norm_sq_estimate(op: &dyn LinearOperator, max_iters: usize, tol: f64) -> Result<f64> {
    if max_iters < 1 {
        return Err(Error::invalid("max_iters must be >= 1"));
    }
    if tol <= 0.0 {
        return Err(Error::invalid("tol must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    let mut v: Vec<f64> = (0..op.n_in()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = vecmath::norm(&v);
    if nv == 0.0 || op.n_in() == 0 {
        return Ok(0.0);
    }
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut estimate = 0.0f64;
    for _ in 0..max_iters {
        let w = op.adjoint_apply(&op.apply(&v)?)?;
        // Rayleigh quotient for the unit vector v.
        let lambda = vecmath::dot(&v, &w);
        let nw = vecmath::norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if lambda > 0.0 && (lambda - estimate).abs() < tol * lambda.abs() {
            return Ok(lambda);
        }
        estimate = lambda;
    }
    Ok(estimate)
}

/// Layout of the periodic discrete Gabor analysis operator.
///
/// The operator maps `R^{signal_len}` to `R^{2 * n_frames * n_channels}`,
/// stacking all real parts of the complex coefficients followed by all
/// imaginary parts. `n_frames = signal_len / hop`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GaborConfig {
    pub signal_len: usize,
    pub window_len: usize,
    pub hop: usize,
    pub n_channels: usize,
    pub window_std: f64,
}

impl GaborConfig {
    /// Window 2048, hop 512, full-length DFT; the window standard deviation is
    /// window_len/6 so the truncated Gaussian has +-3 sigma support.
    pub fn standard(signal_len: usize) -> Self {
        GaborConfig {
            signal_len,
            window_len: 2048,
            hop: 512,
            n_channels: 2048,
            window_std: 2048.0 / 6.0,
        }
    }

    pub fn small(signal_len: usize, window_len: usize, hop: usize) -> Self {
        GaborConfig {
            signal_len,
            window_len,
            hop,
            n_channels: window_len,
            window_std: window_len as f64 / 6.0,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.signal_len / self.hop
    }

    /// Complex coefficient count `M = n_frames * n_channels`.
    pub fn n_coeffs(&self) -> usize {
        self.n_frames() * self.n_channels
    }

    pub fn redundancy(&self) -> f64 {
        self.n_coeffs() as f64 / self.signal_len as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal_len == 0 || self.window_len == 0 || self.hop == 0 {
            return Err(Error::invalid("gabor dimensions must be positive"));
        }
        if self.signal_len % self.hop != 0 {
            return Err(Error::invalid(format!(
                "hop {} must divide signal_len {}",
                self.hop, self.signal_len
            )));
        }
        if self.n_channels != self.window_len {
            return Err(Error::invalid(
                "this Gabor layout requires n_channels == window_len (full-length DFT)",
            ));
        }
        if !(self.window_std > 0.0) {
            return Err(Error::invalid("window_std must be positive"));
        }
        Ok(())
    }
}

/// Periodic Gabor analysis operator with a Gaussian window, seen as a real
/// linear map `R^N -> R^{2M}`. The adjoint is the synthesis map.
///
/// The window is scaled so that the frame operator `T^*T` approximates
/// `redundancy * I`; under this normalization `||T||^2` is close to the
/// redundancy factor.
pub struct GaborOperator {
    cfg: GaborConfig,
    window: Vec<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl GaborOperator {
    pub fn new(cfg: GaborConfig) -> Result<Self> {
        cfg.validate()?;
        let w_len = cfg.window_len;
        let center = (w_len as f64 - 1.0) / 2.0;
        let mut window: Vec<f64> = (0..w_len)
            .map(|t| {
                let d = t as f64 - center;
                (-d * d / (2.0 * cfg.window_std * cfg.window_std)).exp()
            })
            .collect();

        // Tight-frame normalization: the frame operator is diagonal in time
        // with entries d[p] = n_channels * sum over frames of w[t]^2 at
        // position p, and d is hop-periodic. Dividing each window tap by the
        // square root of its local diagonal value makes T*T equal to
        // redundancy * I exactly.
        let diag = frame_diagonal(&cfg, &window);
        if diag.iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("degenerate Gabor window"));
        }
        let target = cfg.redundancy();
        for (t, w) in window.iter_mut().enumerate() {
            *w *= (target / diag[t % cfg.hop]).sqrt();
        }

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(cfg.n_channels);
        let fft_inv = planner.plan_fft_inverse(cfg.n_channels);
        Ok(GaborOperator {
            cfg,
            window,
            fft_fwd,
            fft_inv,
        })
    }

    pub fn config(&self) -> &GaborConfig {
        &self.cfg
    }

    /// Exact diagonal of the frame operator `T^*T` (it is diagonal in time for
    /// a full-length DFT). Useful to report the measured frame bounds.
    pub fn frame_operator_diagonal(&self) -> Vec<f64> {
        frame_diagonal(&self.cfg, &self.window)
    }
}

fn frame_diagonal(cfg: &GaborConfig, window: &[f64]) -> Vec<f64> {
    let n = cfg.signal_len;
    let mut d = vec![0.0; n];
    for m in 0..cfg.n_frames() {
        let base = m * cfg.hop;
        for (t, w) in window.iter().enumerate() {
            d[(base + t) % n] += w * w;
        }
    }
    for v in d.iter_mut() {
        *v *= cfg.n_channels as f64;
    }
    d
}

impl LinearOperator for GaborOperator {
    fn n_in(&self) -> usize {
        self.cfg.signal_len
    }

    fn n_out(&self) -> usize {
        2 * self.cfg.n_coeffs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cfg.signal_len, x.len())?;
        let n = self.cfg.signal_len;
        let c = self.cfg.n_channels;
        let m_total = self.cfg.n_coeffs();
        let mut out = vec![0.0; 2 * m_total];
        let mut buf = vec![Complex::new(0.0, 0.0); c];
        for m in 0..self.cfg.n_frames() {
            let base = m * self.cfg.hop;
            for t in 0..c {
                buf[t] = Complex::new(x[(base + t) % n] * self.window[t], 0.0);
            }
            self.fft_fwd.process(&mut buf);
            for f in 0..c {
                out[m * c + f] = buf[f].re;
                out[m_total + m * c + f] = buf[f].im;
            }
        }
        Ok(out)
    }

    fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let m_total = self.cfg.n_coeffs();
        check_dim(2 * m_total, y.len())?;
        let n = self.cfg.signal_len;
        let c = self.cfg.n_channels;
        let mut out = vec![0.0; n];
        let mut buf = vec![Complex::new(0.0, 0.0); c];
        for m in 0..self.cfg.n_frames() {
            let base = m * self.cfg.hop;
            for f in 0..c {
                buf[f] = Complex::new(y[m * c + f], y[m_total + m * c + f]);
            }
            // Unscaled inverse DFT is exactly the conjugate-transpose of the
            // forward pass above.
            self.fft_inv.process(&mut buf);
            for t in 0..c {
                out[(base + t) % n] += self.window[t] * buf[t].re;
            }
        }
        Ok(out)
    }
}
