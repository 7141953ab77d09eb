//! Numerical laboratory for state-constraint Hamilton–Jacobi equations on
//! periodically perforated planar domains.
//!
//! The crate computes constrained action costs by space–time dynamic
//! programming, derives effective Lagrangians and Hamiltonians from them,
//! solves the oscillating and homogenized Cauchy problems, and runs the
//! convergence-rate experiments on top.
//!
//! Length units are cells of the period lattice throughout; the oscillating
//! problems at scale `ε` are solved in fast coordinates `x/ε`.

// range checks are written `!(x > 0.0)` on purpose: they must also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod effective;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hamiltonians;
pub mod kernel;
pub mod metric;
pub mod solvers;
pub mod stats;
pub mod validation;

pub use config::RunConfig;
pub use effective::{EffectiveTable, LbarTable, Resolution};
pub use error::{HjError, Result};
pub use experiments::{emit_report, run_experiment, Check, RateTable, Report, Table};
pub use geometry::{
    defect_count, Classification, DefectSpec, Extent, HoleShape, PerforatedDomain, Rect, SpaceTimeLattice,
};
pub use hamiltonians::{Family, HamiltonianModel};
pub use kernel::{CostField, DiscretePath};
pub use solvers::{InitialData, SolveSpec, ValueField};
