//! The time-frequency denoising experiment: assembles the model
//!
//! ```text
//!     min_{x in S}  g(Tx) + phi(x) - f(Tx)
//! ```
//!
//! with `g = ||.||_1 + (lambda/2) ||.||^2`, `f = r2 ||.||_2 + (lambda/2) ||.||^2`,
//! `phi = (r1/2) ||x - u||^2`, `S = ball(u, p ||u||)` and `T` the Gabor
//! analysis operator, then drives the configured solver and reports ISNR.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{add_noise, isnr, pad_to_multiple, AudioSignal};
use crate::diagnostics::{kl_condition_check, KlCheck};
use crate::error::{Error, Result};
use crate::functions::{Ball, ElasticL1, QuadFidelity, SmoothedL2};
use crate::linops::{op_norm_sq_estimate, GaborConfig, GaborOperator};
use crate::schedule::StepSchedule;
use crate::solver::{
    adaptive_dpfs_ls_run, adaptive_dpfs_run, fbdc_run, FbdcParams, InnerSolveParams,
    LineSearchParams, Problem, StopRule, Trace,
};
use crate::vecmath::norm;

fn default_r_exp() -> f64 {
    0.5
}

/// Step-size schedule keys of a run; the Lipschitz constant and operator norm
/// are derived from the assembled instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub mu: f64,
    pub eps: f64,
    pub beta0: f64,
    #[serde(default = "default_r_exp")]
    pub r_exp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Adaptive,
    LineSearch,
    Fbdc,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub r1: f64,
    pub r2: f64,
    pub lambda: f64,
    pub p: f64,
    pub gabor: GaborConfig,
    pub schedule: ScheduleConfig,
    pub solver: SolverChoice,
    pub iters: usize,
    pub seed: u64,
    #[serde(default)]
    pub segment: Option<Segment>,
    #[serde(default)]
    pub line_search: Option<LineSearchParams>,
    #[serde(default)]
    pub fbdc: Option<FbdcParams>,
    #[serde(default)]
    pub inner: Option<InnerSolveParams>,
}

impl ExperimentConfig {
    /// Baseline configuration used by the shipped synthetic experiments.
    pub fn synthetic_default(signal_len: usize) -> Self {
        ExperimentConfig {
            r1: 9.0,
            r2: 0.6,
            lambda: 0.1,
            p: 0.5,
            gabor: {
                // Long analysis windows keep the coefficient count low, which
                // limits the shrinkage bias of the sparse model on tonal input.
                let window = signal_len.min(8192).max(64);
                GaborConfig::small(signal_len, window, window / 4)
            },
            schedule: ScheduleConfig {
                gamma: 0.1,
                alpha: 0.1 / 64.0,
                mu: 1.0,
                eps: 1e-10,
                beta0: 1.0,
                r_exp: 0.5,
            },
            solver: SolverChoice::Adaptive,
            iters: 1000,
            seed: 7,
            segment: None,
            line_search: None,
            fbdc: None,
            inner: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config("p in (0,1) violated".into()));
        }
        if !(self.r1 > 0.0) {
            return Err(Error::Config("r1 > 0 violated".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config("lambda > 0 violated".into()));
        }
        if !(self.r2 >= 0.0) {
            return Err(Error::Config("r2 >= 0 violated".into()));
        }
        if self.iters == 0 {
            return Err(Error::Config("iters >= 1 violated".into()));
        }
        self.gabor.validate()?;
        if let Some(ls) = &self.line_search {
            ls.validate()?;
        }
        Ok(())
    }
}

/// An assembled denoising instance.
pub struct DenoiseSetup {
    pub problem: Problem,
    pub schedule: StepSchedule,
    /// Safety-margined squared operator norm used by the schedule.
    pub sigma_t: f64,
    pub kl: KlCheck,
    pub operator: Arc<GaborOperator>,
    /// The corrupted measurement, also the warm-start point.
    pub u: Vec<f64>,
}

/// Builds the model around the corrupted measurement `u`. The Gabor layout is
/// taken from `cfg.gabor` with `signal_len` forced to `u.len()`.
pub fn build_denoise_problem(u: &[f64], cfg: &ExperimentConfig) -> Result<DenoiseSetup> {
    cfg.validate()?;
    if norm(u) == 0.0 {
        return Err(Error::invalid(
            "u = 0 gives a degenerate constraint set and no injectivity bound",
        ));
    }
    let gabor_cfg = GaborConfig {
        signal_len: u.len(),
        ..cfg.gabor.clone()
    };
    let operator = Arc::new(GaborOperator::new(gabor_cfg)?);
    // 1% headroom over the power-iteration estimate keeps rho on the safe
    // side of the descent condition.
    let sigma_t = 1.01 * op_norm_sq_estimate(operator.as_ref(), 200, 1e-10)?;
    // Tight-frame lower bound ||Tx|| >= sqrt(sigma_T) ||x||.
    let kl = kl_condition_check(cfg.r1, cfg.r2, cfg.lambda, sigma_t, sigma_t.sqrt());

    let schedule = StepSchedule {
        alpha: cfg.schedule.alpha,
        gamma: cfg.schedule.gamma,
        r_exp: cfg.schedule.r_exp,
        mu: cfg.schedule.mu,
        lip_phi: cfg.r1,
        sigma_a: sigma_t,
        eps: cfg.schedule.eps,
        beta0: cfg.schedule.beta0,
    };
    schedule.validate()?;

    let problem = Problem {
        g: Arc::new(ElasticL1 { lambda: cfg.lambda }),
        f: Arc::new(SmoothedL2 {
            r2: cfg.r2,
            lambda: cfg.lambda,
        }),
        phi: Arc::new(QuadFidelity {
            r1: cfg.r1,
            u: u.to_vec(),
        }),
        a: operator.clone(),
        k: operator.clone(),
        s: Arc::new(Ball {
            center: u.to_vec(),
            radius: cfg.p * norm(u),
        }),
    };
    Ok(DenoiseSetup {
        problem,
        schedule,
        sigma_t,
        kl,
        operator,
        u: u.to_vec(),
    })
}

pub struct DenoiseRun {
    pub recon: AudioSignal,
    pub noisy: AudioSignal,
    pub trace: Trace,
    pub isnr_db: f64,
    pub noise_sigma: f64,
    pub kl: KlCheck,
}

/// Full pipeline on a clean signal: noise injection, zero-padding to the hop
/// grid, solve, strip padding, ISNR.
pub fn run_denoise(clean: &AudioSignal, cfg: &ExperimentConfig) -> Result<DenoiseRun> {
    let (noisy, noise_sigma) = add_noise(clean, cfg.seed)?;
    let u = pad_to_multiple(&noisy.samples, cfg.gabor.hop);
    let setup = build_denoise_problem(&u, cfg)?;
    let (trace, x) = solve(&setup, cfg)?;
    let recon_full = x;
    let l = clean.len();
    let recon = AudioSignal {
        samples: recon_full[..l].to_vec(),
        sample_rate: clean.sample_rate,
    };
    let isnr_db = isnr(&clean.samples, &noisy.samples, &recon.samples)?;
    Ok(DenoiseRun {
        recon,
        noisy,
        trace,
        isnr_db,
        noise_sigma,
        kl: setup.kl,
    })
}

/// Dispatches the configured solver with the warm start `x0 = u`,
/// `y0 = z0 = 0`, returning the trace and the final primal iterate.
pub fn solve(setup: &DenoiseSetup, cfg: &ExperimentConfig) -> Result<(Trace, Vec<f64>)> {
    let x0 = setup.u.clone();
    let y0 = vec![0.0; setup.problem.k.n_out()];
    let z0 = vec![0.0; setup.problem.a.n_out()];
    let stop = StopRule::max_iters(cfg.iters);
    match cfg.solver {
        SolverChoice::Adaptive => {
            let (trace, st) =
                adaptive_dpfs_run(&setup.problem, &setup.schedule, (x0, y0, z0), stop, |_, _| {})?;
            Ok((trace, st.x))
        }
        SolverChoice::LineSearch => {
            let ls = cfg.line_search.unwrap_or(LineSearchParams {
                eta: 1.3,
                nu: 0.1,
                c: 1e-3,
                t_lookback: 1,
                t_max: 5,
            });
            let (trace, st) = adaptive_dpfs_ls_run(
                &setup.problem,
                &setup.schedule,
                &ls,
                (x0, y0, z0),
                stop,
                |_, _| {},
            )?;
            Ok((trace, st.x))
        }
        SolverChoice::Fbdc => {
            let params = cfg.fbdc.unwrap_or_default();
            let inner = InnerSolveParams {
                sigma_t: Some(setup.sigma_t),
                ..cfg.inner.unwrap_or_default()
            };
            let (trace, (x, _)) =
                fbdc_run(&setup.problem, &params, &inner, (x0, y0), stop, |_, _| {})?;
            Ok((trace, x))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SweepGrid {
    /// Rows over `r1`, columns over `r2`.
    R1R2 { r1: Vec<f64>, r2: Vec<f64> },
    /// Rows over `gamma`, columns over `alpha_ratio` (`alpha = gamma / ratio`).
    GammaAlpha {
        gamma: Vec<f64>,
        alpha_ratio: Vec<f64>,
    },
    /// Rows over `nu`, columns over `eta` (line-search solver).
    EtaNu { eta: Vec<f64>, nu: Vec<f64> },
}

pub struct SweepResult {
    /// ISNR matrix CSV: first column holds the row-axis value.
    pub csv: String,
    /// One note per failed cell.
    pub notes: Vec<String>,
}

impl SweepGrid {
    fn axes(&self) -> (&'static str, &'static str, &[f64], &[f64]) {
        match self {
            SweepGrid::R1R2 { r1, r2 } => ("r1", "r2", r1, r2),
            SweepGrid::GammaAlpha { gamma, alpha_ratio } => {
                ("gamma", "alpha_ratio", gamma, alpha_ratio)
            }
            SweepGrid::EtaNu { eta, nu } => ("nu", "eta", nu, eta),
        }
    }

    fn apply(&self, base: &ExperimentConfig, row: f64, col: f64) -> ExperimentConfig {
        let mut cfg = base.clone();
        match self {
            SweepGrid::R1R2 { .. } => {
                cfg.r1 = row;
                cfg.r2 = col;
            }
            SweepGrid::GammaAlpha { .. } => {
                cfg.schedule.gamma = row;
                cfg.schedule.alpha = row / col;
            }
            SweepGrid::EtaNu { .. } => {
                cfg.solver = SolverChoice::LineSearch;
                let mut ls = cfg.line_search.unwrap_or(LineSearchParams {
                    eta: 1.3,
                    nu: 0.1,
                    c: 1e-3,
                    t_lookback: 1,
                    t_max: 5,
                });
                ls.nu = row;
                ls.eta = col;
                cfg.line_search = Some(ls);
            }
        }
        cfg
    }
}

/// Runs the configured solver for every grid cell on the same clean signal
/// and assembles an ISNR matrix. Failed cells report NaN plus a note.
pub fn sweep(grid: &SweepGrid, base: &ExperimentConfig, clean: &AudioSignal) -> Result<SweepResult> {
    let (row_name, col_name, rows, cols) = grid.axes();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::invalid("sweep grid must be nonempty"));
    }
    let cells: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|i| (0..cols.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<((usize, usize), std::result::Result<f64, String>)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let cfg = grid.apply(base, rows[i], cols[j]);
            let out = run_denoise(clean, &cfg)
                .map(|r| r.isnr_db)
                .map_err(|e| e.to_string());
            ((i, j), out)
        })
        .collect();

    let mut matrix = vec![vec![f64::NAN; cols.len()]; rows.len()];
    let mut notes = Vec::new();
    for ((i, j), out) in results {
        match out {
            Ok(v) => matrix[i][j] = v,
            Err(msg) => notes.push(format!(
                "{row_name}={}, {col_name}={}: {msg}",
                rows[i], cols[j]
            )),
        }
    }

    let mut csv = String::new();
    csv.push_str(row_name);
    for c in cols {
        csv.push_str(&format!(",{col_name}={c}"));
    }
    csv.push('\n');
    for (i, r) in rows.iter().enumerate() {
        csv.push_str(&format!("{r}"));
        for j in 0..cols.len() {
            csv.push_str(&format!(",{:.6}", matrix[i][j]));
        }
        csv.push('\n');
    }
    Ok(SweepResult { csv, notes })
}
