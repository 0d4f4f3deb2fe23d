//! Command-line front end: denoising runs, the divergence counterexample,
//! parameter sweeps, and a small wall-clock benchmark.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dcsplit::audio::{
    extract_segment, load_wav, run_denoise, save_wav, sweep, synth_signal, AudioSignal,
    ExperimentConfig, SolverChoice, SweepGrid, SynthKind,
};
use dcsplit::solver::run_counterexample;
use dcsplit::{Error, Result};

#[derive(Parser)]
#[command(name = "dcsplit", version, about = "Difference-of-convex splitting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a WAV file with the sparse time-frequency model.
    Denoise(DenoiseArgs),
    /// Run the divergence counterexample and write a JSON report.
    Counterexample(CounterexampleArgs),
    /// Run a parameter grid on a synthetic signal and write an ISNR table.
    Sweep(SweepArgs),
    /// Compare per-iteration wall time of the solvers under a time budget.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DenoiseArgs {
    /// Input WAV file (treated as the clean reference; noise is injected).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output WAV file for the reconstruction.
    #[arg(long = "out")]
    output: PathBuf,
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Optional per-iteration trace CSV (a JSON sidecar is written next to it).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Number of iterations of the conceptual scheme.
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    /// JSON report destination.
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid description (JSON).
    #[arg(long)]
    grid: PathBuf,
    /// CSV table destination.
    #[arg(long = "out")]
    output: PathBuf,
    /// Base experiment configuration (JSON); defaults to the synthetic preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic signal length in samples.
    #[arg(long, default_value_t = 16384)]
    n: usize,
    /// RNG seed for the synthetic signal and the noise draw.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Base experiment configuration (JSON); defaults to the synthetic preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Solvers to benchmark.
    #[arg(long, value_delimiter = ',', default_values_t = vec![Method::Adaptive, Method::Ls, Method::Fbdc])]
    methods: Vec<Method>,
    /// Wall-clock budget per method, in seconds.
    #[arg(long = "budget-seconds", default_value_t = 10.0)]
    budget_seconds: f64,
    /// Synthetic signal length in samples.
    #[arg(long, default_value_t = 16384)]
    n: usize,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Debug)]
enum Method {
    Adaptive,
    Ls,
    Fbdc,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Adaptive => "adaptive",
            Method::Ls => "ls",
            Method::Fbdc => "fbdc",
        })
    }
}

impl Method {
    fn solver(self) -> SolverChoice {
        match self {
            Method::Adaptive => SolverChoice::Adaptive,
            Method::Ls => SolverChoice::LineSearch,
            Method::Fbdc => SolverChoice::Fbdc,
        }
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let raw = std::fs::read_to_string(path)?;
    let cfg: ExperimentConfig = serde_json::from_str(&raw)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_denoise(args: &DenoiseArgs) -> Result<()> {
    let mut cfg = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let full = load_wav(&args.input)?;
    let clean = match cfg.segment {
        Some(seg) => extract_segment(&full, seg.t_start, seg.t_end)?,
        None => full,
    };
    let run = run_denoise(&clean, &cfg)?;
    let clipped = save_wav(&args.output, &run.recon)?;
    if clipped > 0 {
        eprintln!("warning: {clipped} samples clamped on save");
    }
    if !run.kl.holds {
        eprintln!(
            "warning: strong-convexity margin not verified (r1 = {} <= threshold {:.4})",
            cfg.r1, run.kl.threshold
        );
    }
    for w in &run.trace.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(trace_path) = &args.trace {
        run.trace.write_csv(trace_path)?;
        run.trace
            .write_sidecar(&trace_path.with_extension("json"), &cfg)?;
    }
    println!(
        "iterations={} isnr_db={:.4} noise_sigma={:.6e} frozen_at={}",
        run.trace.records.len(),
        run.isnr_db,
        run.noise_sigma,
        run.trace
            .frozen_at
            .map_or("none".to_string(), |k| k.to_string()),
    );
    Ok(())
}

fn cmd_counterexample(args: &CounterexampleArgs) -> Result<()> {
    let started = Instant::now();
    let (_, report) = run_counterexample(args.iters, &[0.0, 0.0])?;
    std::fs::write(&args.output, serde_json::to_string_pretty(&report)?)?;
    println!(
        "iterations={} max_norm_x={:.4} rho_inv_sum={:.6} kkt_gap={:.4} elapsed_s={:.3}",
        report.iterations,
        report.max_norm_x,
        report.rho_inv_sum,
        report.kkt_gap,
        started.elapsed().as_secs_f64(),
    );
    Ok(())
}

fn synthetic_base(n: usize, config: &Option<PathBuf>, seed: Option<u64>) -> Result<(AudioSignal, ExperimentConfig)> {
    let mut cfg = match config {
        Some(path) => read_config(path)?,
        None => ExperimentConfig::synthetic_default(n),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let clean = synth_signal(SynthKind::SinesPlusClicks, n, cfg.seed);
    Ok((clean, cfg))
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let raw = std::fs::read_to_string(&args.grid)?;
    let grid: SweepGrid = serde_json::from_str(&raw)?;
    let (clean, base) = synthetic_base(args.n, &args.config, args.seed)?;
    let result = sweep(&grid, &base, &clean)?;
    std::fs::write(&args.output, &result.csv)?;
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    println!("wrote {} ({} notes)", args.output.display(), result.notes.len());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if !(args.budget_seconds > 0.0) {
        return Err(Error::Config("budget-seconds must be positive".into()));
    }
    let (clean, base) = synthetic_base(args.n, &args.config, args.seed)?;
    println!("method,iterations,total_s,ms_per_iter,isnr_db");
    for method in &args.methods {
        let mut cfg = base.clone();
        cfg.solver = method.solver();

        // Calibrate per-iteration cost on a short run, then size the real
        // run to the budget.
        cfg.iters = 10;
        let t0 = Instant::now();
        let _ = run_denoise(&clean, &cfg)?;
        let per_iter = t0.elapsed().as_secs_f64() / cfg.iters as f64;
        cfg.iters = ((args.budget_seconds / per_iter) as usize).clamp(1, 1_000_000);

        let t1 = Instant::now();
        let run = run_denoise(&clean, &cfg)?;
        let total = t1.elapsed().as_secs_f64();
        let iters = run.trace.records.len();
        println!(
            "{method},{iters},{total:.3},{:.4},{:.4}",
            1e3 * total / iters.max(1) as f64,
            run.isnr_db,
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Denoise(args) => cmd_denoise(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
