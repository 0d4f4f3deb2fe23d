//! Full-splitting solvers for structured difference-of-convex programs of the form
//!
//! ```text
//!     min_{x in S}  g(A x) + phi(x) - f(K x)
//! ```
//!
//! where `g`, `f` are proper convex functions accessed only through their proximal
//! mappings, `phi` is smooth, `A`, `K` are linear operators accessed only through
//! forward/adjoint applications, and `S` is a compact convex set with a cheap
//! projection.
//!
//! The crate provides:
//! - [`linops`]: linear-operator abstraction with dense, identity and real-valued
//!   Gabor/STFT instances, plus power-iteration operator-norm estimation,
//! - [`functions`]: proximal mappings, closed-form conjugates and conjugate proxes
//!   derived from the Moreau identity,
//! - [`schedule`]: the adaptive step-size sequences and the freeze criterion,
//! - [`solver`]: the DPFS iteration, its adaptive variant, a nonmonotone
//!   line-search variant, the FBDC baseline, and a divergence counterexample,
//! - [`diagnostics`]: energy/merit bookkeeping, descent audits, KKT residuals,
//!   geometric rate fitting and the KL sufficient-condition check,
//! - [`audio`]: WAV I/O, synthetic test signals, noise injection, and the
//!   time-frequency denoising experiment pipeline.

pub mod audio;
pub mod diagnostics;
pub mod error;
pub mod functions;
pub mod linops;
pub mod schedule;
pub mod solver;
pub mod vecmath;

pub use error::{Error, Result};
