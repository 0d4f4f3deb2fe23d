//! Per-iteration trace records and their CSV/JSON serialization.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::solver::problem::StopStatus;

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub k: usize,
    pub norm_x: f64,
    pub norm_y: f64,
    pub norm_z: f64,
    pub vel_x: f64,
    pub vel_y: f64,
    pub vel_z: f64,
    pub f_obj: f64,
    pub psi: f64,
    /// Varying-step-phase energy, defined only for k >= 2.
    pub psi_k: Option<f64>,
    /// Merit value, defined only once the schedule is frozen.
    pub varpi: Option<f64>,
    /// Freeze certificate `(alpha_k - alpha) ||z^{k+1}||`.
    pub cert: f64,
    pub alpha_k: f64,
    pub rho_k: f64,
    /// Line-search accepted rho (equal to rho_k outside the line-search variant).
    pub accepted_rho: f64,
    /// True when the line search exhausted its candidates and fell back.
    pub ls_fallback: bool,
    pub t_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Iteration index of the last decrease event.
    pub frozen_at: Option<usize>,
    pub status: StopStatus,
    /// Inner-solver warnings (FBDC), one message per affected iteration.
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn new() -> Self {
        Trace {
            records: Vec::new(),
            frozen_at: None,
            status: StopStatus::MaxIters,
            warnings: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub const CSV_HEADER: &'static str =
        "k,norm_x,norm_y,norm_z,vel_x,vel_y,vel_z,F,Psi,psi_k,varpi,cert,alpha_k,rho_k,accepted_rho,ls_fallback,t_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 160 + 128);
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.17e}"));
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.3}\n",
                r.k,
                r.norm_x,
                r.norm_y,
                r.norm_z,
                r.vel_x,
                r.vel_y,
                r.vel_z,
                r.f_obj,
                r.psi,
                opt(r.psi_k),
                opt(r.varpi),
                r.cert,
                r.alpha_k,
                r.rho_k,
                r.accepted_rho,
                r.ls_fallback as u8,
                r.t_ms,
            ));
        }
        out
    }

    /// Same CSV with the wall-clock column blanked, for bitwise determinism checks.
    pub fn to_csv_without_timing(&self) -> String {
        self.to_csv()
            .lines()
            .map(|line| match line.rfind(',') {
                Some(pos) => &line[..pos],
                None => line,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// JSON sidecar with the run configuration and build identification.
    pub fn write_sidecar<C: Serialize>(&self, path: &Path, config: &C) -> Result<()> {
        let sidecar = serde_json::json!({
            "config": config,
            "build": option_env!("CARGO_PKG_VERSION").unwrap_or("unknown"),
            "git_describe": git_describe(),
            "frozen_at": self.frozen_at,
            "iterations": self.records.len(),
            "warnings": self.warnings,
            "rng": "chacha8 counter-based stream, ziggurat gaussian (rand_distr-compatible StandardNormal)",
        });
        std::fs::write(path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }
}

impl Default for Trace {
    fn default() -> Self {
        Self::new()
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}
