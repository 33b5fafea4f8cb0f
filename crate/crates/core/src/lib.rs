//! Spacelike maximal graphs `u: Ω ⊂ R^m → R^n` in pseudo-Euclidean space.
//!
//! The pieces, from the bottom up:
//!
//! * [`geometry`]: induced metric `g = I − DuᵀDu`, norms, the mean curvature
//!   operator at a point.
//! * [`domain`] and [`grid`]: discs and superellipses, and a uniform grid with
//!   cut-cell boundary nodes.
//! * [`linear`]: the frozen-coefficient operator and its Dirichlet solve
//!   (backed by [`sparse`]).
//! * [`solver`]: Picard iteration for the maximal surface system.
//! * [`estimates`]: the data hypothesis and a posteriori audits of a solution.
//! * [`flow`]: mean curvature flow of spacelike graphs.
//! * [`runner`]: JSON jobs, reports and exit codes behind the `maxgraph` binary.
//!
//! ```
//! use maxgraph::{picard_solve, Domain, ExprField, SolverConfig};
//!
//! let phi = ExprField::parse(2, &["0.05*sin(x1 + x2)", "0.05*cos(x1 - x2)"]).unwrap();
//! let cfg = SolverConfig { h: 0.1, ..Default::default() };
//! let sol = picard_solve(&Domain::unit_disc(), &phi, &cfg).unwrap();
//! assert!(sol.report.converged);
//! assert!(sol.report.final_sup_slope_sq < 0.75);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domain;
pub mod estimates;
pub mod expr;
pub mod flow;
pub mod function;
pub mod geometry;
pub mod grid;
pub mod linear;
pub mod runner;
pub mod solver;
pub mod sparse;

pub use domain::Domain;
pub use estimates::{check_hypothesis, run_audits, AuditConfig, AuditEntry, AuditInput, HypothesisCheck};
pub use expr::ExprField;
pub use flow::{flow_run, FlowConfig, FlowOutcome, Stepper};
pub use function::{FnField, VectorFunction};
pub use geometry::Signature;
pub use grid::{DomainGrid, VectorField};
pub use runner::{JobConfig, Mode, RunReport};
pub use solver::{picard_solve, MaximalSolution, SolveReport, SolverConfig};
