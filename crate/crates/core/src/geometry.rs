//! Pointwise graph geometry for a map `u: Ω ⊂ ℝ^m → ℝ^n`.
//!
//! Everything here acts on a single point: the Jacobian `Du(x)` (an `n × m`
//! matrix) and the Hessian `D²u(x)` (one symmetric `m × m` matrix per
//! component). The induced metric of the graph is `g = I − DuᵀDu` in the
//! semi-Euclidean ambient space `ℝ^{m+n}_n` and `g = I + DuᵀDu` in the
//! Euclidean one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Determinant threshold below which a semi-Euclidean metric is treated as
/// degenerate.
pub const SPACELIKE_DET_THRESHOLD: f64 = 1e-12;

/// Relative accuracy targeted by [`hessian_sup_norm`].
pub const HESSIAN_NORM_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("metric is not spacelike (det g = {det_g:.3e}, min eigenvalue = {min_eigenvalue:.3e})")]
    NonSpacelike { det_g: f64, min_eigenvalue: f64 },
    #[error("non-finite entry in Jacobian")]
    NonFinite,
}

/// Ambient signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    /// `ℝ^{m+n}_n`: maximal graphs, `g = I − JᵀJ`.
    #[default]
    SemiEuclidean,
    /// `ℝ^{m+n}`: minimal graphs, `g = I + JᵀJ`.
    Euclidean,
}

/// Jacobian `Du(x)`, stored as an `n × m` matrix with entry `(γ, i) = ∂u^γ/∂x^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian(pub DMatrix<f64>);

impl Jacobian {
    pub fn zeros(n: usize, m: usize) -> Self {
        Jacobian(DMatrix::zeros(n, m))
    }

    /// Builds from row-major entries (`n` rows of length `m`).
    pub fn from_rows(n: usize, m: usize, entries: &[f64]) -> Self {
        Jacobian(DMatrix::from_row_slice(n, m, entries))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }
}

/// Hessian `D²u(x)`: one symmetric `m × m` matrix per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Hessian(pub Vec<DMatrix<f64>>);

impl Hessian {
    pub fn zeros(n: usize, m: usize) -> Self {
        Hessian(vec![DMatrix::zeros(m, m); n])
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn m(&self) -> usize {
        self.0.first().map_or(0, |h| h.nrows())
    }

    /// `√(Σ_γ Σ_ij (H^γ_ij)²)`.
    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|h| h.norm_squared()).sum::<f64>().sqrt()
    }

    /// The ℝⁿ vector `(vᵀ H^γ v)_γ`.
    pub fn quadratic_form(&self, v: &[f64]) -> Vec<f64> {
        self.0
            .iter()
            .map(|h| {
                let m = h.nrows();
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += v[i] * h[(i, j)] * v[j];
                    }
                }
                s
            })
            .collect()
    }
}

/// Induced metric at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub g: DMatrix<f64>,
    pub det_g: f64,
    /// Present whenever `g` is positive definite.
    pub g_inv: Option<DMatrix<f64>>,
}

impl MetricTensor {
    pub fn sqrt_det(&self) -> f64 {
        self.det_g.max(0.0).sqrt()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(&self.g)
    }
}

fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `g = I ∓ JᵀJ` with determinant and inverse.
///
/// In semi-Euclidean mode a metric with `det g ≤ 1e-12` or a non-positive
/// eigenvalue yields [`GeometryError::NonSpacelike`].
pub fn induced_metric(jac: &Jacobian, sig: Signature) -> Result<MetricTensor, GeometryError> {
    if !jac.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let m = jac.m();
    let jtj = jac.0.transpose() * &jac.0;
    let g = match sig {
        Signature::SemiEuclidean => DMatrix::identity(m, m) - jtj,
        Signature::Euclidean => DMatrix::identity(m, m) + jtj,
    };
    let det_g = g.determinant();
    if sig == Signature::SemiEuclidean {
        let min_eigenvalue = sorted_eigenvalues(&g)[0];
        if det_g <= SPACELIKE_DET_THRESHOLD || min_eigenvalue <= 0.0 {
            return Err(GeometryError::NonSpacelike { det_g, min_eigenvalue });
        }
    }
    let g_inv = g.clone().try_inverse();
    Ok(MetricTensor { g, det_g, g_inv })
}

/// Only the inverse metric, which is what the discrete operators consume.
pub(crate) fn inverse_metric(jac: &Jacobian, sig: Signature) -> Result<DMatrix<f64>, GeometryError> {
    let metric = induced_metric(jac, sig)?;
    metric.g_inv.ok_or(GeometryError::NonSpacelike {
        det_g: metric.det_g,
        min_eigenvalue: 0.0,
    })
}

/// `|||J||| = sup_{|v|=1} |Jv|`, the largest singular value.
pub fn graph_norm(jac: &Jacobian) -> f64 {
    if jac.m() == 0 || jac.n() == 0 {
        return 0.0;
    }
    let jtj = jac.0.transpose() * &jac.0;
    let top = sorted_eigenvalues(&jtj).last().copied().unwrap_or(0.0);
    top.max(0.0).sqrt()
}

fn quad_norm(h: &Hessian, v: &[f64]) -> f64 {
    h.quadratic_form(v).iter().map(|q| q * q).sum::<f64>().sqrt()
}

/// `|||D²u||| = sup_{|v|=1} |(vᵀ H^γ v)_γ|`.
///
/// For `m = 2`: 720 equispaced angles on `[0, π)` followed by golden-section
/// refinement around the best one. For `m ≥ 3`: 10⁴ random sphere points
/// followed by projected gradient ascent from the best few. The returned value
/// is a lower bound accurate to about [`HESSIAN_NORM_REL_TOL`].
pub fn hessian_sup_norm(h: &Hessian) -> f64 {
    hessian_sup_norm_seeded(h, 0x5eed)
}

pub fn hessian_sup_norm_seeded(h: &Hessian, seed: u64) -> f64 {
    let m = h.m();
    match m {
        0 => 0.0,
        1 => quad_norm(h, &[1.0]),
        2 => {
            let f = |theta: f64| quad_norm(h, &[theta.cos(), theta.sin()]);
            let n_angles = 720;
            let step = std::f64::consts::PI / n_angles as f64;
            let (mut best_k, mut best) = (0usize, f64::NEG_INFINITY);
            for k in 0..n_angles {
                let val = f(k as f64 * step);
                if val > best {
                    best = val;
                    best_k = k;
                }
            }
            let center = best_k as f64 * step;
            let refined = golden_max(&f, center - step, center + step, 1e-12);
            best.max(refined.1)
        }
        _ => sphere_max(h, m, seed),
    }
}

/// Golden-section search for a maximum of a unimodal function on `[a, b]`.
fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn sphere_max(h: &Hessian, m: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 10_000;
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::with_capacity(samples + 2 * m);
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        candidates.push((quad_norm(h, &e), e));
    }
    for _ in 0..samples {
        let mut v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let r2: f64 = v.iter().map(|x| x * x).sum();
        if !(1e-8..=1.0).contains(&r2) {
            continue;
        }
        normalize(&mut v);
        candidates.push((quad_norm(h, &v), v));
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = candidates[0].0;
    for (_, start) in candidates.iter().take(8) {
        best = best.max(ascend(h, start.clone()));
    }
    best
}

/// Projected gradient ascent of `F(v) = Σ_γ (vᵀH^γv)²` on the unit sphere.
fn ascend(h: &Hessian, mut v: Vec<f64>) -> f64 {
    let m = v.len();
    let mut val = quad_norm(h, &v);
    let mut step = 0.1;
    for _ in 0..500 {
        let q = h.quadratic_form(&v);
        let mut grad = vec![0.0; m];
        for (qg, hg) in q.iter().zip(&h.0) {
            for i in 0..m {
                let mut hv = 0.0;
                for j in 0..m {
                    hv += hg[(i, j)] * v[j];
                }
                grad[i] += 4.0 * qg * hv;
            }
        }
        let radial: f64 = grad.iter().zip(&v).map(|(g, x)| g * x).sum();
        grad.iter_mut().zip(&v).for_each(|(g, x)| *g -= radial * x);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }
        let mut trial: Vec<f64> = v.iter().zip(&grad).map(|(x, g)| x + step * g / gnorm).collect();
        normalize(&mut trial);
        let tv = quad_norm(h, &trial);
        if tv > val {
            v = trial;
            val = tv;
            step *= 1.2;
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    val
}

/// Mean-curvature residual `(g^{ij} H^γ_ij)_γ`; zero on a maximal (or minimal)
/// graph point.
pub fn mean_curvature_residual(g_inv: &DMatrix<f64>, h: &Hessian) -> DVector<f64> {
    DVector::from_iterator(h.n(), h.0.iter().map(|hg| g_inv.component_mul(hg).sum()))
}

/// Same as [`mean_curvature_residual`] but taking the metric and failing when
/// no inverse is available.
pub fn mean_curvature_residual_of(metric: &MetricTensor, h: &Hessian) -> Result<DVector<f64>, GeometryError> {
    let g_inv = metric.g_inv.as_ref().ok_or(GeometryError::NonSpacelike {
        det_g: metric.det_g,
        min_eigenvalue: 0.0,
    })?;
    Ok(mean_curvature_residual(g_inv, h))
}
