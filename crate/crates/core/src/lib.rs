//! Proximal-perturbed Lagrangian (P-Lagrangian) primal-dual method for
//! linearly constrained nonconvex composite problems
//!
//! ```text
//! min f(x) + h(x)   s.t.   Ax = b
//! ```
//!
//! with smooth, possibly nonconvex `f` and a prox-friendly convex `h`,
//! together with the SProx-ALM baseline, per-iteration certificates and a
//! benchmark harness on random nonconvex box-constrained QPs.

pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pplag;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod sproxalm;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, LinearMap};
pub use pplag::{PplagConfig, PplagParams, PplagState};
pub use problem::{BoxSet, CompositeProblem, GeneratorConfig, LcqpInstance, SmoothObjective};
pub use prox::{ExtendedReal, ProxSpec};
pub use sproxalm::{SproxParams, SproxState};
pub use trace::{IterationRecord, SolveResult, StoppingRule, Termination, TraceSink};
