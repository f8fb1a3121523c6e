//! Numerical laboratory for the Smoluchowski coagulation equation with
//! kernels of homogeneity greater than one that vanish on the diagonal.
//!
//! The crate is organised around two independent solvers for the same
//! equation:
//!
//! - [`solver_fv`]: a deterministic fixed-pivot sectional scheme with an
//!   explicit gel ledger for mass pushed past the truncation volume,
//! - [`solver_mc`]: a Marcus–Lushnikov stochastic particle system,
//!
//! plus the measure-level functionals ([`measures`]) and the gelation
//! diagnostics built on top of them ([`diagnostics`]). [`cli`] wires
//! everything into the `gelab` command line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod kernels;
pub mod measures;
pub mod solver_fv;
pub mod solver_mc;

pub use kernels::{Kernel, KernelError, KernelForm, KernelParams};
pub use measures::{Grid, MeasureError, SeparatedPair, SizeDistribution};
pub use solver_fv::{FvConfig, FvError, SectionalSolver, Trajectory};
pub use solver_mc::{EventLog, InitSpec, McConfig, McError, ParticleSystem};
