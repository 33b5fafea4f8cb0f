//! Numerical audits of the a priori estimates for maximal graphs.
//!
//! Every audit compares a measured quantity against a bound with an explicit
//! slack `ε_h = c·h` and records the worst location. An audit whose
//! hypotheses do not hold for the input is still evaluated but marked
//! `vacuous`; vacuous failures do not count as failures.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{tangent_plane_distance_with_normal, Domain};
use crate::function::VectorFunction;
use crate::geometry::{graph_norm, hessian_sup_norm_seeded, induced_metric, Jacobian, Signature};
use crate::grid::{DomainGrid, VectorField};
use crate::linear::{frozen_coefficients, FrozenOperator, OperatorError};

/// Rounding slack for comparisons against exact thresholds.
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    /// Worst-case point, when meaningful.
    pub location: Option<Vec<f64>>,
    pub bound: Option<f64>,
    pub relation: Option<Relation>,
    pub vacuous: bool,
    pub note: Option<String>,
}

impl AuditEntry {
    /// `value (relation) bound ± tolerance`.
    pub fn compare(name: &str, value: f64, relation: Relation, bound: f64, tolerance: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= bound + tolerance,
            Relation::AtLeast => value >= bound - tolerance,
            Relation::Below => value < bound + tolerance,
        };
        AuditEntry {
            name: name.to_string(),
            pass,
            value,
            tolerance,
            location: None,
            bound: Some(bound),
            relation: Some(relation),
            vacuous: false,
            note: None,
        }
    }

    /// A measurement with no pass/fail meaning.
    pub fn diagnostic(name: &str, value: f64, note: &str) -> Self {
        AuditEntry {
            name: name.to_string(),
            pass: true,
            value,
            tolerance: 0.0,
            location: None,
            bound: None,
            relation: None,
            vacuous: false,
            note: Some(note.to_string()),
        }
    }

    pub fn at(mut self, location: Option<Vec<f64>>) -> Self {
        self.location = location;
        self
    }

    pub fn vacuous(mut self, note: impl Into<String>) -> Self {
        self.vacuous = true;
        self.note = Some(note.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Fails and is not vacuous.
    pub fn is_failure(&self) -> bool {
        !self.pass && !self.vacuous
    }
}

/// Suprema of the boundary data entering the hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSups {
    /// `sup_Ω |||D²φ|||`.
    pub hessian: f64,
    /// `sup_∂Ω |||Dφ|||`.
    pub boundary_gradient: f64,
    /// `sup_Ω |||Dφ|||²`.
    pub gradient_sq: f64,
}

/// Seed for the random sphere search in `m ≥ 3` Hessian norms.
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Lattice samples per diameter used for `sup_Ω`; boundary samples are 720 for
/// `m = 2` and 4000 otherwise.
pub fn default_resolution(m: usize) -> usize {
    match m {
        2 => 80,
        3 => 20,
        _ => 10,
    }
}

/// Samples `φ(·, t)` and its derivatives on an interior lattice with
/// `resolution` points per diameter plus the boundary sample set.
pub fn data_sups(phi: &dyn VectorFunction, dom: &Domain, t: f64, resolution: usize, seed: u64) -> DataSups {
    let spacing = dom.diameter() / resolution.max(4) as f64;
    let bcount = if dom.dim() == 2 { 720 } else { 4000 };
    let boundary: Vec<Vec<f64>> = dom.boundary_samples(bcount).into_iter().map(|(p, _)| p).collect();
    let interior = dom.interior_samples(spacing);
    let both: Vec<&Vec<f64>> = interior.iter().chain(boundary.iter()).collect();
    let per_point: Vec<(f64, f64)> = both
        .par_iter()
        .map(|x| {
            let s = graph_norm(&phi.jacobian(x, t));
            (hessian_sup_norm_seeded(&phi.hessian(x, t), seed), s * s)
        })
        .collect();
    let bgrad: Vec<f64> = boundary.par_iter().map(|x| graph_norm(&phi.jacobian(x, t))).collect();
    DataSups {
        hessian: per_point.iter().map(|v| v.0).fold(0.0, f64::max),
        gradient_sq: per_point.iter().map(|v| v.1).fold(0.0, f64::max),
        boundary_gradient: bgrad.into_iter().fold(0.0, f64::max),
    }
}

/// The smallness condition on the boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub kappa: f64,
    pub m: usize,
    pub diameter: f64,
    pub sups: DataSups,
    /// `(4m·diam/κ)·sup_Ω|||D²φ||| + 2·sup_∂Ω|||Dφ|||`.
    pub lhs: f64,
    /// `√(1 − κ^{1/m})`.
    pub rhs: f64,
    /// `sup_Ω|||Dφ|||² ≤ 1 − κ`.
    pub slope_check: bool,
    pub pass: bool,
    /// `rhs − lhs`.
    pub margin: f64,
}

impl HypothesisCheck {
    pub fn from_sups(m: usize, kappa: f64, diameter: f64, sups: DataSups) -> Self {
        let lhs = boundary_gradient_bound_from(m, kappa, diameter, sups.hessian, sups.boundary_gradient);
        let rhs = (1.0 - kappa.powf(1.0 / m as f64)).sqrt();
        let slope_check = sups.gradient_sq <= 1.0 - kappa;
        HypothesisCheck {
            kappa,
            m,
            diameter,
            sups,
            lhs,
            rhs,
            slope_check,
            pass: lhs < rhs && slope_check,
            margin: rhs - lhs,
        }
    }
}

pub fn check_hypothesis(phi: &dyn VectorFunction, dom: &Domain, kappa: f64) -> HypothesisCheck {
    let sups = data_sups(phi, dom, 0.0, default_resolution(dom.dim()), DEFAULT_SEED);
    HypothesisCheck::from_sups(dom.dim(), kappa, dom.diameter(), sups)
}

/// `(4m·diam/κ)·sup_Ω|||D²φ||| + 2·sup_∂Ω|||Dφ|||`.
pub fn boundary_gradient_bound_from(m: usize, kappa: f64, diameter: f64, sup_hessian: f64, sup_boundary_gradient: f64) -> f64 {
    4.0 * m as f64 * diameter / kappa * sup_hessian + 2.0 * sup_boundary_gradient
}

pub fn boundary_gradient_bound(phi: &dyn VectorFunction, dom: &Domain, kappa: f64) -> f64 {
    let s = data_sups(phi, dom, 0.0, default_resolution(dom.dim()), DEFAULT_SEED);
    boundary_gradient_bound_from(dom.dim(), kappa, dom.diameter(), s.hessian, s.boundary_gradient)
}

/// Constants of the barrier `S± = ν log(1 + ζd) ∓ (u^γ − φ^γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub zeta: f64,
    pub nu_zeta: f64,
    pub nu: f64,
    /// `−νζ²/(1 + ζ·diam)² + (m/κ)·sup|||D²φ|||`; the barrier argument needs
    /// this to be non-positive.
    pub eq1_rhs: f64,
}

impl BarrierParams {
    pub fn new(m: usize, kappa: f64, diameter: f64, sup_hessian: f64) -> Self {
        let zeta = 1.0 / diameter;
        let nu_zeta = 4.0 * m as f64 * diameter * sup_hessian / kappa;
        let eq1_rhs = -nu_zeta * zeta / (1.0 + zeta * diameter).powi(2) + m as f64 / kappa * sup_hessian;
        BarrierParams {
            zeta,
            nu_zeta,
            nu: nu_zeta / zeta,
            eq1_rhs,
        }
    }

    pub fn hypothesis_met(&self) -> bool {
        self.eq1_rhs <= ZERO_TOL * (1.0 + self.nu_zeta.abs())
    }

    /// `ν log(1 + ζd)`.
    pub fn profile(&self, d: f64) -> f64 {
        self.nu * (self.zeta * d.max(0.0)).ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// `c` in `ε_h = c·h`; by default `10·(1 + sup|D²u|)`.
    pub eps_constant: Option<f64>,
    /// Largest `1 − κ` for which the subsolution audit is in its regime.
    pub subsolution_threshold: f64,
    pub holder_alpha: f64,
    pub holder_margin: f64,
    /// Bound on the final mean-curvature residual.
    pub residual_tol: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            eps_constant: None,
            subsolution_threshold: 0.05,
            holder_alpha: 0.5,
            holder_margin: 0.1,
            residual_tol: 1e-8,
        }
    }
}

/// `ε_h = c·h` with `c` from the config or `10·(1 + max_p |D²u(p)|_F)`.
pub fn eps_h(grid: &DomainGrid, u: &VectorField, cfg: &AuditConfig) -> f64 {
    let c = cfg.eps_constant.unwrap_or_else(|| {
        let sup = (0..grid.len()).map(|p| grid.hessian_at(u, p).frobenius()).fold(0.0, f64::max);
        10.0 * (1.0 + sup)
    });
    c * grid.h()
}

/// Keeps the first index attaining the extreme value.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|b| v > b.1) {
            best = Some((i, v));
        }
    }
    best
}

fn argmin(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    argmax(values.map(|v| -v)).map(|(i, v)| (i, -v))
}

/// Barrier checks (a) `min S± ≥ −ε`, (b) fraction of triples with
/// `ν log(1+ζd) + ε ≥ |u^γ − φ^γ|`, (c) `max L S± ≤ ε` with `L` frozen at `u`.
///
/// `phi` holds the analytic data sampled at every unknown and boundary node.
pub fn barrier_audit(
    grid: &DomainGrid,
    u: &VectorField,
    phi: &VectorField,
    params: &BarrierParams,
    kappa: f64,
    eps: f64,
) -> Result<Vec<AuditEntry>, OperatorError> {
    let n = u.n;
    let nodes = grid.boundary_nodes();
    let diff: Vec<f64> = (0..grid.len())
        .map(|p| (0..n).map(|g| (u.value(p)[g] - phi.value(p)[g]).abs()).fold(0.0, f64::max))
        .collect();

    // (a), (b): per boundary node, worst point and count of satisfied triples
    let per_node: Vec<(f64, usize, usize)> = nodes
        .par_iter()
        .map(|b| {
            let mut worst = (f64::INFINITY, 0);
            let mut ok = 0;
            for p in 0..grid.len() {
                let prof = params.profile(tangent_plane_distance_with_normal(&b.x, &b.normal, grid.point(p)));
                let s = prof - diff[p];
                if s < worst.0 {
                    worst = (s, p);
                }
                for g in 0..n {
                    if prof + eps >= (u.value(p)[g] - phi.value(p)[g]).abs() {
                        ok += 1;
                    }
                }
            }
            (worst.0, worst.1, ok)
        })
        .collect();
    let (bi, min_s) = argmin(per_node.iter().map(|v| v.0)).unwrap_or((0, 0.0));
    let total = nodes.len() * grid.len() * n;
    let satisfied: usize = per_node.iter().map(|v| v.2).sum();
    let fraction = if total == 0 { 1.0 } else { satisfied as f64 / total as f64 };

    // (c): L S± = ν L[log(1+ζd)] ∓ (Lu − Lφ)
    let op = FrozenOperator::assemble(u, grid, Signature::SemiEuclidean)?;
    let lu = op.apply(u);
    let lphi = op.apply(phi);
    let ldiff: Vec<f64> = (0..grid.len())
        .map(|p| (0..n).map(|g| (lu[p * n + g] - lphi[p * n + g]).abs()).fold(0.0, f64::max))
        .collect();
    let per_node_op: Vec<(f64, usize)> = nodes
        .par_iter()
        .map(|b| {
            let prof = VectorField::from_fn(grid, 1, |x| {
                vec![params.profile(tangent_plane_distance_with_normal(&b.x, &b.normal, x))]
            });
            let lp = op.apply_component(&prof, 0);
            argmax((0..grid.len()).map(|p| lp[p] + ldiff[p])).map_or((f64::NEG_INFINITY, 0), |(p, v)| (v, p))
        })
        .collect();
    let (bj, max_ls) = argmax(per_node_op.iter().map(|v| v.0)).unwrap_or((0, 0.0));

    let slope = crate::solver::sup_slope_sq(grid, u);
    let mut entries = vec![
        AuditEntry::compare("barrier_lower_bound", min_s, Relation::AtLeast, 0.0, eps)
            .at(per_node.get(bi).map(|v| grid.point(v.1).to_vec())),
        AuditEntry::compare("barrier_triples", fraction, Relation::AtLeast, 1.0, 0.0).with_note(format!(
            "{satisfied} of {total} (grid point, boundary node, component) triples"
        )),
        AuditEntry::compare("barrier_operator", max_ls, Relation::AtMost, 0.0, eps)
            .at(per_node_op.get(bj).map(|v| grid.point(v.1).to_vec())),
    ];
    let reason = if !params.hypothesis_met() {
        Some(format!("barrier inequality not met: right side {:.3e} > 0", params.eq1_rhs))
    } else if slope > 1.0 - kappa {
        Some(format!("sup |||Du|||^2 = {slope:.4} exceeds 1 - kappa"))
    } else {
        None
    };
    if let Some(r) = reason {
        entries = entries.into_iter().map(|e| e.vacuous(r.clone())).collect();
    }
    Ok(entries)
}

/// Sup of `|||Du|||` over boundary-adjacent unknowns with its location.
pub fn boundary_adjacent_gradient(grid: &DomainGrid, u: &VectorField) -> (f64, Option<Vec<f64>>) {
    let ring: Vec<usize> = (0..grid.len()).filter(|&p| grid.is_boundary_adjacent(p)).collect();
    match argmax(ring.iter().map(|&p| graph_norm(&grid.jacobian_at(u, p)))) {
        Some((i, v)) => (v, Some(grid.point(ring[i]).to_vec())),
        None => (0.0, None),
    }
}

pub fn boundary_gradient_audit(grid: &DomainGrid, u: &VectorField, bound: f64, kappa: f64, eps: f64) -> AuditEntry {
    let (measured, loc) = boundary_adjacent_gradient(grid, u);
    let e = AuditEntry::compare("boundary_gradient", measured, Relation::AtMost, bound, eps).at(loc);
    let slope = crate::solver::sup_slope_sq(grid, u);
    if slope > 1.0 - kappa {
        e.vacuous(format!("sup |||Du|||^2 = {slope:.4} exceeds 1 - kappa"))
    } else {
        e
    }
}

fn sqrt_det(jac: &Jacobian) -> f64 {
    induced_metric(jac, Signature::SemiEuclidean).map_or(0.0, |g| g.sqrt_det())
}

/// `min_interior √det g ≥ min_ring √det g − ε`, where the ring is the set of
/// boundary-adjacent unknowns, plus the slope chain: ring slope² below
/// `1 − κ^{1/m}` forces interior slope² below `1 − κ`.
pub fn detg_max_principle_audit(grid: &DomainGrid, u: &VectorField, kappa: f64, eps: f64) -> Vec<AuditEntry> {
    let m = grid.dim();
    let jac = grid.gradient_field(u);
    let (ring, inner): (Vec<usize>, Vec<usize>) = (0..grid.len()).partition(|&p| grid.is_boundary_adjacent(p));
    let ring_min = ring.iter().map(|&p| sqrt_det(&jac[p])).fold(f64::INFINITY, f64::min);
    let inner_min = argmin(inner.iter().map(|&p| sqrt_det(&jac[p])));
    let mut out = Vec::with_capacity(2);
    match inner_min {
        Some((i, v)) => out.push(
            AuditEntry::compare("detg_max_principle", v, Relation::AtLeast, ring_min, eps)
                .at(Some(grid.point(inner[i]).to_vec())),
        ),
        None => out.push(
            AuditEntry::compare("detg_max_principle", ring_min, Relation::AtLeast, ring_min, eps).vacuous("no interior points"),
        ),
    }
    let ring_slope = ring.iter().map(|&p| graph_norm(&jac[p]).powi(2)).fold(0.0, f64::max);
    let (ii, inner_slope) = argmax(inner.iter().map(|&p| graph_norm(&jac[p]).powi(2))).unwrap_or((0, 0.0));
    let chain = AuditEntry::compare("detg_slope_chain", inner_slope, Relation::AtMost, 1.0 - kappa, eps)
        .at(inner.get(ii).map(|&p| grid.point(p).to_vec()));
    let premise = 1.0 - kappa.powf(1.0 / m as f64);
    out.push(if ring_slope < premise {
        chain
    } else {
        chain.vacuous(format!(
            "boundary slope^2 {ring_slope:.4} not below 1 - kappa^(1/m) = {premise:.4}"
        ))
    });
    out
}

/// `sup|||Du|||² < 1 − κ`, strictly.
pub fn spacelike_margin_audit(grid: &DomainGrid, u: &VectorField, kappa: f64) -> AuditEntry {
    let (i, v) = argmax((0..grid.len()).map(|p| graph_norm(&grid.jacobian_at(u, p)).powi(2))).unwrap_or((0, 0.0));
    AuditEntry::compare("spacelike_margin", v, Relation::Below, 1.0 - kappa, 0.0)
        .at(Some(grid.point(i).to_vec()))
        .with_note(format!("margin {:.6e}", (1.0 - kappa) - v))
}

/// Unknowns whose full `3^m` lattice neighborhood consists of unknowns.
fn neighborhood_points(grid: &DomainGrid) -> Vec<usize> {
    let m = grid.dim();
    (0..grid.len())
        .filter(|&p| {
            let k = grid.key(p);
            let total = 3usize.pow(m as u32);
            (0..total).all(|mut code| {
                let mut q = k.to_vec();
                for qi in q.iter_mut() {
                    *qi += (code % 3) as i64 - 1;
                    code /= 3;
                }
                grid.index_of(&q).is_some()
            })
        })
        .collect()
}

fn shifted(grid: &DomainGrid, p: usize, moves: &[(usize, i64)]) -> usize {
    let mut k = grid.key(p).to_vec();
    for &(axis, d) in moves {
        k[axis] += d;
    }
    grid.index_of(&k).expect("neighborhood checked")
}

/// `∂_i(G^{ij} ∂_j w)` at `p` with half-point averaged diagonal coefficients
/// and centered cross terms.
fn divergence_form(grid: &DomainGrid, coeffs: &[DMatrix<f64>], w: &[f64], p: usize) -> f64 {
    let m = grid.dim();
    let h = grid.h();
    let mut acc = 0.0;
    for i in 0..m {
        let (pp, pm) = (shifted(grid, p, &[(i, 1)]), shifted(grid, p, &[(i, -1)]));
        let cp = 0.5 * (coeffs[pp][(i, i)] + coeffs[p][(i, i)]);
        let cm = 0.5 * (coeffs[pm][(i, i)] + coeffs[p][(i, i)]);
        acc += (cp * (w[pp] - w[p]) - cm * (w[p] - w[pm])) / (h * h);
        for j in 0..m {
            if j == i {
                continue;
            }
            let dj = |c: usize| (w[shifted(grid, c, &[(j, 1)])] - w[shifted(grid, c, &[(j, -1)])]) / (2.0 * h);
            acc += (coeffs[pp][(i, j)] * dj(pp) - coeffs[pm][(i, j)] * dj(pm)) / (2.0 * h);
        }
    }
    acc
}

/// Most negative discrete `∂_i(g^{ij}(Du) ∂_j w)` over interior points for
/// `w = ζ_w √(1−κ) ∂_r u^γ + Σ (∂_j u^ν)²`, over `ζ_w = ±10mn` and all `γ, r`.
pub fn subsolution_audit(
    grid: &DomainGrid,
    u: &VectorField,
    kappa: f64,
    threshold: f64,
    eps: f64,
) -> Result<AuditEntry, OperatorError> {
    let (m, n) = (grid.dim(), u.n);
    let coeffs = frozen_coefficients(grid, u, Signature::SemiEuclidean)?;
    let jac = grid.gradient_field(u);
    let v: Vec<f64> = jac.iter().map(|j| j.0.iter().map(|x| x * x).sum()).collect();
    let pts = neighborhood_points(grid);
    let zeta_w = 10.0 * (m * n) as f64;
    let mut worst = (f64::INFINITY, None);
    for sign in [1.0, -1.0] {
        for g in 0..n {
            for r in 0..m {
                let a = sign * zeta_w * (1.0 - kappa).sqrt();
                let w: Vec<f64> = (0..grid.len()).map(|p| a * jac[p].0[(g, r)] + v[p]).collect();
                let vals: Vec<f64> = pts.par_iter().map(|&p| divergence_form(grid, &coeffs, &w, p)).collect();
                if let Some((i, val)) = argmin(vals.into_iter()) {
                    if val < worst.0 {
                        worst = (val, Some(grid.point(pts[i]).to_vec()));
                    }
                }
            }
        }
    }
    let value = if worst.0.is_finite() { worst.0 } else { 0.0 };
    let e = AuditEntry::compare("subsolution", value, Relation::AtLeast, 0.0, eps)
        .at(worst.1)
        .with_note(format!("zeta_w = ±{zeta_w}, {} interior points", pts.len()));
    Ok(if pts.is_empty() {
        e.vacuous("no point with a full interior neighborhood")
    } else if 1.0 - kappa > threshold + ZERO_TOL {
        e.vacuous(format!(
            "kappa too small: 1 - kappa = {:.3} exceeds threshold {threshold}",
            1.0 - kappa
        ))
    } else {
        e
    })
}

/// `max |Du(x) − Du(y)|_F / |x − y|^α` over pairs of unknowns at distance at
/// least `margin` from the boundary (`margin = 0` uses every unknown).
pub fn holder_seminorm(grid: &DomainGrid, u: &VectorField, alpha: f64, margin: f64) -> f64 {
    let pts: Vec<usize> = (0..grid.len())
        .filter(|&p| margin <= 0.0 || grid.distance_to_boundary(p) >= margin)
        .collect();
    let jac: Vec<Jacobian> = pts.iter().map(|&p| grid.jacobian_at(u, p)).collect();
    let rows: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .map(|a| {
            let xa = grid.point(pts[a]);
            let mut best: f64 = 0.0;
            for b in (a + 1)..pts.len() {
                let xb = grid.point(pts[b]);
                let dist = xa.iter().zip(xb).map(|(s, t)| (s - t).powi(2)).sum::<f64>().sqrt();
                let dd = (&jac[a].0 - &jac[b].0).norm();
                best = best.max(dd / dist.powf(alpha));
            }
            best
        })
        .collect();
    rows.into_iter().fold(0.0, f64::max)
}

/// Inputs shared by the full audit suite.
pub struct AuditInput<'a> {
    pub grid: &'a DomainGrid,
    pub u: &'a VectorField,
    /// Boundary data sampled at every unknown and boundary node.
    pub phi: &'a VectorField,
    pub kappa: f64,
    pub sups: DataSups,
    pub residual: f64,
}

/// Runs every semi-Euclidean audit in a fixed order.
pub fn run_audits(input: &AuditInput, cfg: &AuditConfig) -> Result<Vec<AuditEntry>, OperatorError> {
    let AuditInput {
        grid,
        u,
        phi,
        kappa,
        sups,
        residual,
    } = *input;
    let m = grid.dim();
    let diam = grid.domain().diameter();
    let eps = eps_h(grid, u, cfg);
    let params = BarrierParams::new(m, kappa, diam, sups.hessian);
    let mut out = vec![
        AuditEntry::compare("mean_curvature_residual", residual, Relation::AtMost, cfg.residual_tol, 0.0),
        spacelike_margin_audit(grid, u, kappa),
    ];
    out.extend(barrier_audit(grid, u, phi, &params, kappa, eps)?);
    let bound = boundary_gradient_bound_from(m, kappa, diam, sups.hessian, sups.boundary_gradient);
    out.push(boundary_gradient_audit(grid, u, bound, kappa, eps));
    out.extend(detg_max_principle_audit(grid, u, kappa, eps));
    out.push(subsolution_audit(grid, u, kappa, cfg.subsolution_threshold, eps)?);
    let alpha = cfg.holder_alpha;
    out.push(AuditEntry::diagnostic(
        "holder_interior",
        holder_seminorm(grid, u, alpha, cfg.holder_margin),
        &format!("[Du]_alpha, alpha = {alpha}, margin = {}", cfg.holder_margin),
    ));
    out.push(AuditEntry::diagnostic(
        "holder_global",
        holder_seminorm(grid, u, alpha, 0.0),
        &format!("[Du]_alpha, alpha = {alpha}"),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{AffineField, FnField};
    use proptest::prelude::*;

    fn sups(hessian: f64, boundary_gradient: f64) -> DataSups {
        DataSups {
            hessian,
            boundary_gradient,
            gradient_sq: boundary_gradient * boundary_gradient,
        }
    }

    #[test]
    fn hypothesis_arithmetic() {
        let pass = HypothesisCheck::from_sups(2, 0.25, 2.0, sups(0.005, 0.1));
        assert!((pass.lhs - 0.52).abs() < 1e-12);
        assert!((pass.rhs - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((pass.margin - (0.5f64.sqrt() - 0.52)).abs() < 1e-12);
        assert!(pass.pass);
        let fail = HypothesisCheck::from_sups(2, 0.25, 2.0, sups(0.02, 0.1));
        assert!((fail.lhs - 1.48).abs() < 1e-12);
        assert!(!fail.pass);
    }

    #[test]
    fn constant_data_passes_for_every_kappa() {
        let phi = FnField::new(2, 2, |_: &[f64], _| vec![1.0, 2.0]);
        for kappa in [0.01, 0.25, 0.5, 0.99] {
            let h = check_hypothesis(&phi, &Domain::unit_disc(), kappa);
            assert!(h.pass && h.lhs == 0.0);
        }
        assert_eq!(boundary_gradient_bound(&phi, &Domain::unit_disc(), 0.5), 0.0);
    }

    #[test]
    fn affine_bound_is_twice_the_slope() {
        let phi = AffineField::new(1, 2, &[0.3, 0.4], &[0.0]);
        let b = boundary_gradient_bound(&phi, &Domain::unit_disc(), 0.5);
        assert!((b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn barrier_constants() {
        let p = BarrierParams::new(2, 0.25, 2.0, 0.005);
        assert_eq!(p.zeta, 0.5);
        assert!((p.nu_zeta - 0.32).abs() < 1e-15);
        assert!((p.nu - 0.64).abs() < 1e-15);
        assert!(p.hypothesis_met());
        let bound = boundary_gradient_bound_from(2, 0.25, 2.0, 0.005, 0.1);
        assert!((bound - (p.nu_zeta + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn constant_solution_passes_every_audit() {
        let grid = DomainGrid::build(&Domain::unit_disc(), 0.1).unwrap();
        let u = VectorField::from_fn(&grid, 2, |_| vec![0.3, -0.4]);
        let input = AuditInput {
            grid: &grid,
            u: &u,
            phi: &u,
            kappa: 0.97,
            sups: sups(0.0, 0.0),
            residual: 0.0,
        };
        let entries = run_audits(&input, &AuditConfig::default()).unwrap();
        assert!(entries.iter().all(|e| e.pass && !e.vacuous), "{entries:#?}");
        let det = entries.iter().find(|e| e.name == "detg_max_principle").unwrap();
        assert_eq!(det.value, 1.0);
        let sub = entries.iter().find(|e| e.name == "subsolution").unwrap();
        assert!(sub.value.abs() < 1e-10);
        assert!(entries
            .iter()
            .filter(|e| e.name.starts_with("holder"))
            .all(|e| e.value < 1e-10));
    }

    #[test]
    fn affine_solution_audits() {
        let grid = DomainGrid::build(&Domain::unit_disc(), 0.1).unwrap();
        let u = VectorField::from_fn(&grid, 2, |x| vec![0.2 * x[0] + 0.1 * x[1], -0.15 * x[1]]);
        let eps = 1e-12;
        let det = detg_max_principle_audit(&grid, &u, 0.9, eps);
        assert!(det[0].pass && (det[0].value - det[0].bound.unwrap()).abs() < 1e-14);
        let sub = subsolution_audit(&grid, &u, 0.97, 0.05, eps).unwrap();
        assert!(sub.value.abs() < 1e-12 && sub.pass);
        assert!(holder_seminorm(&grid, &u, 0.5, 0.0) < 1e-12);
    }

    #[test]
    fn subsolution_outside_regime_is_vacuous() {
        let grid = DomainGrid::build(&Domain::unit_disc(), 0.1).unwrap();
        let u = VectorField::zeros(&grid, 1);
        let e = subsolution_audit(&grid, &u, 0.5, 0.05, 0.0).unwrap();
        assert!(e.vacuous && e.note.unwrap().contains("kappa too small"));
    }

    #[test]
    fn vacuous_failures_are_not_failures() {
        let e = AuditEntry::compare("x", 2.0, Relation::AtMost, 1.0, 0.0);
        assert!(e.is_failure());
        assert!(!e.vacuous("outside regime").is_failure());
    }

    proptest! {
        #[test]
        fn barrier_profile_is_monotone_and_nonnegative(s in 0.0f64..1.0, kappa in 0.05f64..0.99, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
            let p = BarrierParams::new(2, kappa, 2.0, s);
            prop_assert!(p.hypothesis_met());
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(p.profile(lo) >= 0.0);
            prop_assert!(p.profile(lo) <= p.profile(hi));
        }

        #[test]
        fn hypothesis_pass_iff_both_conditions(s in 0.0f64..0.05, g in 0.0f64..0.5, kappa in 0.05f64..0.95) {
            let h = HypothesisCheck::from_sups(2, kappa, 2.0, sups(s, g));
            prop_assert_eq!(h.pass, h.lhs < h.rhs && h.slope_check);
        }
    }
}
