//! Fixed-point iteration `u ← (1−d)·u + d·T(f(u))` for the maximal (or
//! minimal) graph Dirichlet problem.
//!
//! `f` rescales a candidate so that `sup |||Dv|||² ≤ 1 − κ` (semi-Euclidean
//! only) and `T` solves the linear problem with coefficients frozen at the
//! rescaled field. The iteration starts from the Laplace extension of the
//! boundary data. If the direct run fails, it is repeated along the boundary
//! data family `σφ` with warm starts.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Domain;
use crate::function::VectorFunction;
use crate::geometry::{graph_norm, Signature};
use crate::grid::{DomainGrid, GridError, VectorField};
use crate::linear::{FrozenOperator, OperatorError};
use crate::sparse::LinearSolverConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("fixed-point iteration did not converge at sigma = {sigma}: last change {last_change:.3e}")]
    NotConverged {
        sigma: f64,
        last_change: f64,
        report: Box<SolveReport>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub kappa: f64,
    pub fp_tol: f64,
    pub max_picard: usize,
    pub sigma_schedule: Vec<f64>,
    /// Fall back to the `σ` schedule when the direct run fails.
    pub continuation: bool,
    pub h: f64,
    pub signature: Signature,
    pub damping: f64,
    pub linear: LinearSolverConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kappa: 0.25,
            fp_tol: 1e-10,
            max_picard: 200,
            sigma_schedule: vec![0.25, 0.5, 0.75, 1.0],
            continuation: true,
            h: 0.05,
            signature: Signature::SemiEuclidean,
            damping: 1.0,
            linear: LinearSolverConfig {
                rtol: 1e-13,
                atol: 1e-15,
                ..LinearSolverConfig::default()
            },
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |s: String| Err(SolveError::Config(s));
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        if !(self.fp_tol > 0.0) {
            return bad(format!("fp_tol must be positive, got {}", self.fp_tol));
        }
        if self.max_picard == 0 {
            return bad("max_picard must be at least 1".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if !(self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        let s = &self.sigma_schedule;
        if s.is_empty()
            || s.iter().any(|v| !(0.0..=1.0).contains(v))
            || s.windows(2).any(|w| w[0] >= w[1])
            || *s.last().unwrap() != 1.0
        {
            return bad(format!(
                "sigma_schedule must be strictly increasing in [0, 1] and end at 1, got {s:?}"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub continuation_used: bool,
    pub stages: Vec<StageReport>,
    /// Convergence metric after every iteration, all stages in order.
    pub history: Vec<f64>,
    pub final_sup_slope_sq: f64,
    /// `(1 − κ) − sup |||Du|||²`.
    pub margin: f64,
    /// Largest `|g^{ij}(Du) ∂_ij u − source|` over unknowns.
    pub final_residual: f64,
    /// The same, restricted to full-stencil points.
    pub full_stencil_residual: f64,
    /// Largest `sup |||Dv|||²` of any field handed to the linear solve.
    pub max_frozen_slope_sq: f64,
    pub clamp_activations: usize,
    pub linear_iterations: usize,
    pub failure: Option<String>,
    pub wall_seconds: f64,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }
}

/// `sup_p |||Du(p)|||²` over the unknowns.
pub fn sup_slope_sq(grid: &DomainGrid, u: &VectorField) -> f64 {
    (0..grid.len())
        .map(|p| graph_norm(&grid.jacobian_at(u, p)).powi(2))
        .fold(0.0, f64::max)
}

/// Rescales `v` (boundary values included) so that `sup |||Dv|||² ≤ 1 − κ`.
/// Returns the field and the factor applied (1 when unchanged).
pub fn clamp_spacelike(v: &VectorField, kappa: f64, grid: &DomainGrid) -> (VectorField, f64) {
    let sup = sup_slope_sq(grid, v).sqrt();
    let factor = clamp_factor(sup, kappa);
    if factor == 1.0 {
        (v.clone(), 1.0)
    } else {
        (v.scaled(factor), factor)
    }
}

/// `√(1−κ)/s` when `s² > 1 − κ`, else 1.
pub fn clamp_factor(sup_norm: f64, kappa: f64) -> f64 {
    if sup_norm * sup_norm <= 1.0 - kappa {
        1.0
    } else {
        (1.0 - kappa).sqrt() / sup_norm
    }
}

/// Pointwise `max_γ |g^{ij}(Du) ∂_ij u^γ − source^γ|` at every unknown.
pub fn mean_curvature_residuals(
    grid: &DomainGrid,
    u: &VectorField,
    sig: Signature,
    source: Option<&[f64]>,
) -> Result<Vec<f64>, OperatorError> {
    let op = FrozenOperator::assemble(u, grid, sig)?;
    let lu = op.apply(u);
    let n = u.n;
    Ok((0..grid.len())
        .map(|p| {
            (0..n)
                .map(|g| (lu[p * n + g] - source.map_or(0.0, |s| s[p * n + g])).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

/// `sup|Δu| + h·sup|ΔDu|` over unknowns (entrywise on `Du`).
fn change_metric(grid: &DomainGrid, old: &VectorField, new: &VectorField) -> f64 {
    let mut diff = new.clone();
    for (d, o) in diff.interior.iter_mut().zip(&old.interior) {
        *d -= o;
    }
    for (d, o) in diff.boundary.iter_mut().zip(&old.boundary) {
        *d -= o;
    }
    let du = diff.interior.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ddu = (0..grid.len())
        .map(|p| grid.jacobian_at(&diff, p).0.amax())
        .fold(0.0, f64::max);
    if du.is_finite() && ddu.is_finite() {
        du + grid.h() * ddu
    } else {
        f64::INFINITY
    }
}

/// Iterates diverge past this change, rather than wander.
const BLOWUP_CHANGE: f64 = 1e8;

struct Stage {
    converged: bool,
    iterations: usize,
    last_change: f64,
    failure: Option<String>,
}

struct Picard<'a> {
    grid: &'a DomainGrid,
    data: &'a VectorField,
    source: Option<&'a [f64]>,
    cfg: &'a SolverConfig,
    history: Vec<f64>,
    max_frozen_slope_sq: f64,
    clamp_activations: usize,
    linear_iterations: usize,
}

impl Picard<'_> {
    fn boundary(&self, sigma: f64) -> Vec<f64> {
        self.data.boundary.iter().map(|v| sigma * v).collect()
    }

    fn laplace_extension(&mut self, sigma: f64) -> Result<VectorField, OperatorError> {
        let mut start = VectorField::zeros(self.grid, self.data.n);
        start.boundary = self.boundary(sigma);
        let op = FrozenOperator::laplacian(self.grid);
        let scaled: Option<Vec<f64>> = self.source.map(|s| s.iter().map(|v| sigma * v).collect());
        let sol = op.solve_dirichlet(&start, scaled.as_deref(), &self.cfg.linear)?;
        self.linear_iterations += sol.iterations();
        Ok(sol.u)
    }

    /// One application of `T∘f`.
    fn step(&mut self, u: &VectorField, sigma: f64) -> Result<VectorField, OperatorError> {
        let frozen = match self.cfg.signature {
            Signature::SemiEuclidean => {
                let (v, factor) = clamp_spacelike(u, self.cfg.kappa, self.grid);
                if factor != 1.0 {
                    self.clamp_activations += 1;
                }
                v
            }
            Signature::Euclidean => u.clone(),
        };
        if self.cfg.signature == Signature::SemiEuclidean {
            let s = sup_slope_sq(self.grid, &frozen);
            debug_assert!(s <= (1.0 - self.cfg.kappa) * (1.0 + 1e-12));
            self.max_frozen_slope_sq = self.max_frozen_slope_sq.max(s);
        }
        let op = FrozenOperator::assemble(&frozen, self.grid, self.cfg.signature)?;
        let mut guess = u.clone();
        guess.boundary = self.boundary(sigma);
        let scaled: Option<Vec<f64>> = self.source.map(|s| s.iter().map(|v| sigma * v).collect());
        let sol = op.solve_dirichlet(&guess, scaled.as_deref(), &self.cfg.linear)?;
        self.linear_iterations += sol.iterations();
        Ok(sol.u)
    }

    fn run_stage(&mut self, u: &mut VectorField, sigma: f64) -> Stage {
        let d = self.cfg.damping;
        let mut last_change = f64::INFINITY;
        for it in 1..=self.cfg.max_picard {
            let t = match self.step(u, sigma) {
                Ok(t) => t,
                Err(e) => {
                    return Stage {
                        converged: false,
                        iterations: it,
                        last_change,
                        failure: Some(e.to_string()),
                    }
                }
            };
            let mut next = t;
            if d < 1.0 {
                for (a, b) in next.interior.iter_mut().zip(&u.interior) {
                    *a = d * *a + (1.0 - d) * b;
                }
            }
            last_change = change_metric(self.grid, u, &next);
            self.history.push(last_change);
            *u = next;
            if last_change <= self.cfg.fp_tol {
                return Stage {
                    converged: true,
                    iterations: it,
                    last_change,
                    failure: None,
                };
            }
            if !(last_change < BLOWUP_CHANGE) || !u.is_finite() {
                return Stage {
                    converged: false,
                    iterations: it,
                    last_change,
                    failure: Some(format!("iteration diverged (change {last_change:.3e})")),
                };
            }
        }
        Stage {
            converged: false,
            iterations: self.cfg.max_picard,
            last_change,
            failure: Some(format!("no convergence within {} iterations", self.cfg.max_picard)),
        }
    }
}

/// Solves on an existing grid. `data.boundary` holds `φ` at the boundary
/// nodes (interior values are ignored); `source` is row-major `len × n`.
pub fn picard_solve_on(
    grid: &DomainGrid,
    data: &VectorField,
    source: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<(VectorField, SolveReport), SolveError> {
    cfg.validate()?;
    if !data.is_consistent(grid) {
        return Err(SolveError::Config("boundary data does not match the grid".into()));
    }
    let clock = Instant::now();
    let mut pic = Picard {
        grid,
        data,
        source,
        cfg,
        history: Vec::new(),
        max_frozen_slope_sq: 0.0,
        clamp_activations: 0,
        linear_iterations: 0,
    };
    let mut stages = Vec::new();

    let mut u = pic.laplace_extension(1.0)?;
    let direct = pic.run_stage(&mut u, 1.0);
    stages.push(StageReport {
        sigma: 1.0,
        iterations: direct.iterations,
        converged: direct.converged,
        last_change: direct.last_change,
    });
    let mut outcome = direct;
    let mut continuation_used = false;
    if !outcome.converged && cfg.continuation && cfg.sigma_schedule.len() > 1 {
        continuation_used = true;
        u = pic.laplace_extension(cfg.sigma_schedule[0])?;
        for &sigma in &cfg.sigma_schedule {
            outcome = pic.run_stage(&mut u, sigma);
            stages.push(StageReport {
                sigma,
                iterations: outcome.iterations,
                converged: outcome.converged,
                last_change: outcome.last_change,
            });
            if !outcome.converged {
                break;
            }
        }
    }

    let final_sup_slope_sq = sup_slope_sq(grid, &u);
    let (final_residual, full_stencil_residual) = match u.is_finite() {
        true => match mean_curvature_residuals(grid, &u, cfg.signature, source) {
            Ok(r) => (
                r.iter().copied().fold(0.0, f64::max),
                (0..grid.len())
                    .filter(|&p| grid.is_full_stencil(p))
                    .map(|p| r[p])
                    .fold(0.0, f64::max),
            ),
            Err(_) => (f64::NAN, f64::NAN),
        },
        false => (f64::NAN, f64::NAN),
    };
    let report = SolveReport {
        converged: outcome.converged,
        continuation_used,
        stages,
        history: pic.history,
        final_sup_slope_sq,
        margin: (1.0 - cfg.kappa) - final_sup_slope_sq,
        final_residual,
        full_stencil_residual,
        max_frozen_slope_sq: pic.max_frozen_slope_sq,
        clamp_activations: pic.clamp_activations,
        linear_iterations: pic.linear_iterations,
        failure: outcome.failure,
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    if report.converged {
        Ok((u, report))
    } else {
        let sigma = report.stages.last().map_or(1.0, |s| s.sigma);
        Err(SolveError::NotConverged {
            sigma,
            last_change: outcome.last_change,
            report: Box::new(report),
        })
    }
}

/// A converged solve together with its grid.
#[derive(Debug, Clone)]
pub struct MaximalSolution {
    pub grid: DomainGrid,
    pub u: VectorField,
    pub report: SolveReport,
}

/// Samples `φ(·, 0)` on the grid (boundary nodes and unknowns).
pub fn sample(grid: &DomainGrid, phi: &dyn VectorFunction, t: f64) -> VectorField {
    VectorField::from_fn(grid, phi.dim_out(), |x| phi.eval(x, t))
}

/// Builds the grid for `cfg.h` and solves with boundary data `φ(·, 0)`.
pub fn picard_solve(dom: &Domain, phi: &dyn VectorFunction, cfg: &SolverConfig) -> Result<MaximalSolution, SolveError> {
    cfg.validate()?;
    if phi.dim_in() != dom.dim() {
        return Err(SolveError::Config(format!(
            "boundary data has {} inputs but the domain has dimension {}",
            phi.dim_in(),
            dom.dim()
        )));
    }
    let grid = DomainGrid::build(dom, cfg.h)?;
    let data = sample(&grid, phi, 0.0);
    let (u, report) = picard_solve_on(&grid, &data, None, cfg)?;
    Ok(MaximalSolution { grid, u, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub unknowns: usize,
    /// `max |u − u*|` over the unknowns.
    pub error: f64,
    /// `log₂(e_prev / e)` against the previous row, when the spacings halve.
    pub order: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_seconds: f64,
}

/// `g^{ij}(Du*) ∂_ij u*` at every unknown, row-major.
pub fn manufactured_source(grid: &DomainGrid, u_star: &dyn VectorFunction, sig: Signature) -> Result<Vec<f64>, SolveError> {
    let n = u_star.dim_out();
    let mut out = vec![0.0; grid.len() * n];
    for p in 0..grid.len() {
        let x = grid.point(p);
        let jac = u_star.jacobian(x, 0.0);
        let metric =
            crate::geometry::induced_metric(&jac, sig).map_err(|source| OperatorError::NonSpacelike { point: p, source })?;
        let h = u_star.hessian(x, 0.0);
        let r = crate::geometry::mean_curvature_residual_of(&metric, &h)
            .map_err(|source| OperatorError::NonSpacelike { point: p, source })?;
        out[p * n..(p + 1) * n].copy_from_slice(r.as_slice());
    }
    Ok(out)
}

/// Solves `g^{ij}(Du) ∂_ij u = g^{ij}(Du*) ∂_ij u*` with `u = u*` on the
/// boundary for every spacing in `hs` and tabulates the error against `u*`.
pub fn manufactured_solution_check(
    dom: &Domain,
    u_star: &dyn VectorFunction,
    cfg: &SolverConfig,
    hs: &[f64],
) -> Result<Vec<ConvergenceRow>, SolveError> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(hs.len());
    for &h in hs {
        let clock = Instant::now();
        let grid = DomainGrid::build(dom, h)?;
        let exact = sample(&grid, u_star, 0.0);
        let source = manufactured_source(&grid, u_star, cfg.signature)?;
        let run_cfg = SolverConfig { h, ..cfg.clone() };
        let (u, report) = picard_solve_on(&grid, &exact, Some(&source), &run_cfg)?;
        let error = u.max_abs_diff(&exact);
        let order = rows.last().and_then(|prev| {
            let ratio = prev.h / h;
            (ratio > 1.0 && error > 0.0 && prev.error > 0.0).then(|| (prev.error / error).ln() / ratio.ln())
        });
        rows.push(ConvergenceRow {
            h,
            unknowns: grid.len(),
            error,
            order,
            iterations: report.iterations(),
            converged: report.converged,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}
