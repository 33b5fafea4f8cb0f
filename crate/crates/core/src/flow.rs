//! Spacelike graphic mean curvature flow `∂u/∂t = g^{ij}(Du) ∂_ij u` with
//! time-dependent Dirichlet data.
//!
//! The default stepper is frozen-coefficient backward Euler,
//! `(I − dt·L_{u_old}) u_new = u_old`; explicit Euler is kept for
//! cross-validation.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Domain;
use crate::estimates::{default_resolution, AuditConfig, AuditEntry, Relation};
use crate::function::VectorFunction;
use crate::geometry::{graph_norm, hessian_sup_norm, induced_metric, Signature};
use crate::grid::{DomainGrid, GridError, VectorField};
use crate::linear::{frozen_coefficients, FrozenOperator, OperatorError};
use crate::solver::{mean_curvature_residuals, sample};
use crate::sparse::LinearSolverConfig;

/// A step is rejected as non-spacelike at this slope².
pub const SPACELIKE_LOSS: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, Clone)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("explicit step dt = {dt} exceeds the stability limit {limit}")]
    StepRejected { dt: f64, limit: f64 },
    #[error("graph stopped being spacelike at t = {t} near {point:?}")]
    SpacelikeLost {
        t: f64,
        point: Vec<f64>,
        partial: Box<FlowOutcome>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    ExplicitEuler,
    #[default]
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_final: f64,
    pub kappa: f64,
    pub stepper: Stepper,
    pub cfl_safety: f64,
    pub h: f64,
    pub linear: LinearSolverConfig,
    /// Time slices used for the suprema in the parabolic hypothesis.
    pub hypothesis_slices: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: 0.01,
            t_final: 1.0,
            kappa: 0.25,
            stepper: Stepper::SemiImplicit,
            cfl_safety: 0.9,
            h: 0.05,
            linear: LinearSolverConfig {
                rtol: 1e-13,
                atol: 1e-15,
                ..LinearSolverConfig::default()
            },
            hypothesis_slices: 20,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |s: String| Err(FlowError::Config(s));
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return bad(format!("need dt > 0 and t_final >= 0, got {} and {}", self.dt, self.t_final));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1), got {}", self.cfl_safety));
        }
        if !(self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_final`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u: VectorField,
    pub sup_slope_sq: f64,
    pub min_sqrt_detg: f64,
}

impl FlowState {
    pub fn new(grid: &DomainGrid, t: f64, u: VectorField) -> Self {
        let (sup_slope_sq, min_sqrt_detg, _) = diagnostics(grid, &u);
        FlowState {
            t,
            u,
            sup_slope_sq,
            min_sqrt_detg,
        }
    }
}

/// `(sup slope², min √det g, argmax slope)` over the unknowns.
fn diagnostics(grid: &DomainGrid, u: &VectorField) -> (f64, f64, usize) {
    let mut sup = (0.0, 0);
    let mut min_det = f64::INFINITY;
    for p in 0..grid.len() {
        let j = grid.jacobian_at(u, p);
        let s = graph_norm(&j).powi(2);
        if s > sup.0 || !s.is_finite() {
            sup = (s, p);
        }
        let d = induced_metric(&j, Signature::SemiEuclidean).map_or(0.0, |g| g.sqrt_det());
        min_det = min_det.min(d);
    }
    (sup.0, min_det, sup.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub sup_slope_sq: f64,
    pub min_sqrt_detg: f64,
    /// `max |g^{ij}(Du) ∂_ij u|`, the discrete speed.
    pub residual: f64,
}

/// Largest stable explicit step: the smaller of `safety·h²κ/(2m)` and the
/// Gershgorin limit `safety·2/ρ` of the operator frozen at `u`.
pub fn explicit_dt_limit(grid: &DomainGrid, op: &FrozenOperator, kappa: f64, safety: f64) -> f64 {
    let h = grid.h();
    let heuristic = safety * h * h * kappa / (2.0 * grid.dim() as f64);
    let rho = unscaled_gershgorin(op);
    heuristic.min(safety * 2.0 / rho)
}

fn unscaled_gershgorin(op: &FrozenOperator) -> f64 {
    let a = op.matrix();
    (0..a.nrows())
        .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>() / op.row_scale()[i].abs())
        .fold(0.0, f64::max)
}

/// Advances one step of length `dt` to boundary data `φ(·, t + dt)`.
pub fn flow_step(
    grid: &DomainGrid,
    state: &FlowState,
    phi: &dyn VectorFunction,
    dt: f64,
    cfg: &FlowConfig,
) -> Result<(FlowState, f64), FlowError> {
    let t_new = state.t + dt;
    let next_boundary = sample_boundary(grid, phi, t_new);
    let coeffs = frozen_coefficients(grid, &state.u, Signature::SemiEuclidean)?;
    let u_new = match cfg.stepper {
        Stepper::ExplicitEuler => {
            let op = FrozenOperator::from_coefficients(grid, coeffs, 0.0, 1.0);
            let limit = explicit_dt_limit(grid, &op, cfg.kappa, cfg.cfl_safety);
            if dt > limit * (1.0 + 1e-12) {
                return Err(FlowError::StepRejected { dt, limit });
            }
            let lu = op.apply(&state.u);
            let mut u = state.u.clone();
            for (v, l) in u.interior.iter_mut().zip(&lu) {
                *v += dt * l;
            }
            u.boundary = next_boundary;
            u
        }
        Stepper::SemiImplicit => {
            let op = FrozenOperator::from_coefficients(grid, coeffs, 1.0, -dt);
            let mut data = state.u.clone();
            data.boundary = next_boundary;
            op.solve_dirichlet(&data, Some(&state.u.interior), &cfg.linear)?.u
        }
    };
    let (sup_slope_sq, min_sqrt_detg, worst) = diagnostics(grid, &u_new);
    let next = FlowState {
        t: t_new,
        u: u_new,
        sup_slope_sq,
        min_sqrt_detg,
    };
    if !(sup_slope_sq < SPACELIKE_LOSS) {
        return Err(FlowError::SpacelikeLost {
            t: t_new,
            point: grid.point(worst).to_vec(),
            partial: Box::new(FlowOutcome::partial(grid, next)),
        });
    }
    let residual = mean_curvature_residuals(grid, &next.u, Signature::SemiEuclidean, None)?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((next, residual))
}

fn sample_boundary(grid: &DomainGrid, phi: &dyn VectorFunction, t: f64) -> Vec<f64> {
    grid.boundary_nodes().iter().flat_map(|b| phi.eval(&b.x, t)).collect()
}

/// Smallness condition for the flow on `Ω × (0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicHypothesis {
    pub kappa: f64,
    /// `sup_{Ω×(0,T)} (|∂φ/∂t| + m·|||D²φ|||/κ)`.
    pub sup_forcing: f64,
    /// `sup_{∂Ω×(0,T)} |||Dφ|||`.
    pub sup_boundary_gradient: f64,
    /// `sup_Ω |||Dφ(·, 0)|||²`.
    pub initial_slope_sq: f64,
    /// `4·diam·sup_forcing + 2·sup_boundary_gradient`.
    pub lhs: f64,
    /// `√(1 − κ^{1/m})`.
    pub rhs: f64,
    /// `initial_slope_sq < 1 − κ^{1/m}`.
    pub initial_check: bool,
    pub pass: bool,
    pub margin: f64,
}

impl ParabolicHypothesis {
    pub fn from_sups(
        m: usize,
        kappa: f64,
        diameter: f64,
        sup_forcing: f64,
        sup_boundary_gradient: f64,
        initial_slope_sq: f64,
    ) -> Self {
        let lhs = 4.0 * diameter * sup_forcing + 2.0 * sup_boundary_gradient;
        let premise = 1.0 - kappa.powf(1.0 / m as f64);
        let rhs = premise.sqrt();
        let initial_check = initial_slope_sq < premise;
        ParabolicHypothesis {
            kappa,
            sup_forcing,
            sup_boundary_gradient,
            initial_slope_sq,
            lhs,
            rhs,
            initial_check,
            pass: lhs < rhs && initial_check,
            margin: rhs - lhs,
        }
    }

    /// `ζ = 1/diam`, `νζ = 4·diam·sup_forcing`.
    pub fn barrier_constants(&self, diameter: f64) -> (f64, f64) {
        (1.0 / diameter, 4.0 * diameter * self.sup_forcing)
    }
}

pub fn check_parabolic_hypothesis(
    phi: &dyn VectorFunction,
    dom: &Domain,
    kappa: f64,
    t_final: f64,
    slices: usize,
) -> ParabolicHypothesis {
    let m = dom.dim();
    let spacing = dom.diameter() / (default_resolution(m) / 2).max(4) as f64;
    let interior = dom.interior_samples(spacing);
    let boundary: Vec<Vec<f64>> = dom
        .boundary_samples(if m == 2 { 360 } else { 2000 })
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    let times: Vec<f64> = if phi.is_time_dependent() && t_final > 0.0 {
        let k = slices.max(1);
        (0..=k).map(|i| t_final * i as f64 / k as f64).collect()
    } else {
        vec![0.0]
    };
    let mut forcing: f64 = 0.0;
    let mut bgrad: f64 = 0.0;
    for &t in &times {
        for x in interior.iter().chain(&boundary) {
            let dt = if phi.is_time_dependent() {
                phi.time_derivative(x, t).iter().map(|v| v * v).sum::<f64>().sqrt()
            } else {
                0.0
            };
            forcing = forcing.max(dt + m as f64 * hessian_sup_norm(&phi.hessian(x, t)) / kappa);
        }
        for x in &boundary {
            bgrad = bgrad.max(graph_norm(&phi.jacobian(x, t)));
        }
    }
    let initial = interior
        .iter()
        .chain(&boundary)
        .map(|x| graph_norm(&phi.jacobian(x, 0.0)).powi(2))
        .fold(0.0, f64::max);
    ParabolicHypothesis::from_sups(m, kappa, dom.diameter(), forcing, bgrad, initial)
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub grid: DomainGrid,
    pub state: FlowState,
    pub trajectory: Vec<TrajectoryRow>,
    pub audits: Vec<AuditEntry>,
    pub hypothesis: Option<ParabolicHypothesis>,
    pub steps: usize,
    pub wall_seconds: f64,
}

impl FlowOutcome {
    fn partial(grid: &DomainGrid, state: FlowState) -> Self {
        FlowOutcome {
            grid: grid.clone(),
            state,
            trajectory: Vec::new(),
            audits: Vec::new(),
            hypothesis: None,
            steps: 0,
            wall_seconds: 0.0,
        }
    }

    /// CSV `t,sup_slope_sq,min_sqrt_detg,residual`, one row per accepted step.
    pub fn write_trajectory<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,sup_slope_sq,min_sqrt_detg,residual")?;
        for r in &self.trajectory {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.sup_slope_sq, r.min_sqrt_detg, r.residual
            )?;
        }
        Ok(())
    }
}

/// Tracks the parabolic-boundary minimum of `√det g`: the whole initial slice
/// plus the boundary-adjacent ring at every time so far.
struct DetgTracker {
    ring: Vec<usize>,
    inner: Vec<usize>,
    boundary_min: f64,
    worst: Option<(f64, f64, usize)>,
}

impl DetgTracker {
    fn new(grid: &DomainGrid, u0: &VectorField) -> Self {
        let (ring, inner): (Vec<usize>, Vec<usize>) = (0..grid.len()).partition(|&p| grid.is_boundary_adjacent(p));
        let boundary_min = (0..grid.len())
            .map(|p| sqrt_det_at(grid, u0, p))
            .fold(f64::INFINITY, f64::min);
        DetgTracker {
            ring,
            inner,
            boundary_min,
            worst: None,
        }
    }

    fn observe(&mut self, grid: &DomainGrid, u: &VectorField, t: f64) {
        let ring_min = self
            .ring
            .iter()
            .map(|&p| sqrt_det_at(grid, u, p))
            .fold(f64::INFINITY, f64::min);
        self.boundary_min = self.boundary_min.min(ring_min);
        for &p in &self.inner {
            let gap = sqrt_det_at(grid, u, p) - self.boundary_min;
            if self.worst.is_none_or(|w| gap < w.0) {
                self.worst = Some((gap, t, p));
            }
        }
    }
}

fn sqrt_det_at(grid: &DomainGrid, u: &VectorField, p: usize) -> f64 {
    induced_metric(&grid.jacobian_at(u, p), Signature::SemiEuclidean).map_or(0.0, |g| g.sqrt_det())
}

/// Runs the flow from `u(·, 0) = φ(·, 0)` to `t_final` and audits it.
pub fn flow_run(dom: &Domain, phi: &dyn VectorFunction, cfg: &FlowConfig, audit: &AuditConfig) -> Result<FlowOutcome, FlowError> {
    cfg.validate()?;
    if phi.dim_in() != dom.dim() {
        return Err(FlowError::Config(format!(
            "data has {} inputs but the domain has dimension {}",
            phi.dim_in(),
            dom.dim()
        )));
    }
    let grid = DomainGrid::build(dom, cfg.h)?;
    let u0 = sample(&grid, phi, 0.0);
    flow_run_on(&grid, u0, phi, cfg, audit)
}

/// As [`flow_run`] but from an explicit initial field on an existing grid.
pub fn flow_run_on(
    grid: &DomainGrid,
    u0: VectorField,
    phi: &dyn VectorFunction,
    cfg: &FlowConfig,
    audit: &AuditConfig,
) -> Result<FlowOutcome, FlowError> {
    cfg.validate()?;
    let clock = Instant::now();
    let hypothesis = check_parabolic_hypothesis(phi, grid.domain(), cfg.kappa, cfg.t_final, cfg.hypothesis_slices);
    let mut state = FlowState::new(grid, 0.0, u0);
    let mut tracker = DetgTracker::new(grid, &state.u);
    tracker.observe(grid, &state.u, 0.0);
    let mut trajectory = Vec::new();
    let mut max_slope = (state.sup_slope_sq, 0.0);
    let steps = cfg.steps();
    for k in 0..steps {
        let dt = if k + 1 == steps { cfg.t_final - state.t } else { cfg.dt };
        match flow_step(grid, &state, phi, dt, cfg) {
            Ok((next, residual)) => {
                state = next;
                trajectory.push(TrajectoryRow {
                    t: state.t,
                    sup_slope_sq: state.sup_slope_sq,
                    min_sqrt_detg: state.min_sqrt_detg,
                    residual,
                });
                if state.sup_slope_sq > max_slope.0 {
                    max_slope = (state.sup_slope_sq, state.t);
                }
                tracker.observe(grid, &state.u, state.t);
            }
            Err(FlowError::SpacelikeLost { t, point, partial }) => {
                let mut out = *partial;
                out.trajectory = trajectory;
                out.hypothesis = Some(hypothesis);
                out.steps = k;
                out.wall_seconds = clock.elapsed().as_secs_f64();
                return Err(FlowError::SpacelikeLost {
                    t,
                    point,
                    partial: Box::new(out),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let eps = crate::estimates::eps_h(grid, &state.u, audit);
    let mut audits = Vec::new();
    let spacelike = AuditEntry::compare("flow_spacelike", max_slope.0, Relation::Below, 1.0 - cfg.kappa, 0.0)
        .with_note(format!("max over all steps, attained at t = {}", max_slope.1));
    audits.push(if hypothesis.pass {
        spacelike
    } else {
        spacelike.vacuous(format!(
            "parabolic hypothesis not met (lhs {:.4} vs rhs {:.4})",
            hypothesis.lhs, hypothesis.rhs
        ))
    });
    let (gap, t_at, p_at) = tracker.worst.unwrap_or((0.0, 0.0, 0));
    let det = AuditEntry::compare("flow_detg", gap, Relation::AtLeast, 0.0, eps).with_note(format!(
        "interior min sqrt(det g) minus parabolic-boundary min, worst at t = {t_at}"
    ));
    audits.push(if tracker.inner.is_empty() {
        det.vacuous("no interior points")
    } else {
        det.at(Some(grid.point(p_at).to_vec()))
    });
    Ok(FlowOutcome {
        grid: grid.clone(),
        state,
        trajectory,
        audits,
        hypothesis: Some(hypothesis),
        steps,
        wall_seconds: clock.elapsed().as_secs_f64(),
    })
}
