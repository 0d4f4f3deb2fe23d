pub mod counterexample;
pub mod fbdc;
pub mod line_search;
pub mod problem;
pub mod step;
pub mod trace;

pub use counterexample::{run_counterexample, CounterexampleReport};
pub use fbdc::{fbdc, fbdc_run, inner_prox_composite, FbdcParams, InnerSolve, InnerSolveParams};
pub use line_search::{adaptive_dpfs_ls, adaptive_dpfs_ls_run, LineSearchParams};
pub use problem::{Problem, SolverState, StopRule, StopStatus};
pub use step::{adaptive_dpfs, adaptive_dpfs_run, dpfs_step};
pub use trace::{Trace, TraceRecord};
