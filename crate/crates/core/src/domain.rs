//! Bounded convex C² domains with closed-form boundary geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Normalized level-set value below which a point counts as strictly inside.
pub const INTERIOR_LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("domain dimension must be between 2 and 4, got {0}")]
    Dimension(usize),
    #[error("invalid domain parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    /// Euclidean ball `|x − c| < r` (a disc when `m = 2`).
    Disc { center: Vec<f64>, radius: f64 },
    /// `Σ_i (|x_i − c_i| / a_i)^p < 1` with `p ≥ 2`.
    Superellipse {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        exponent: f64,
    },
}

impl Domain {
    pub fn unit_disc() -> Self {
        Domain::Disc {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn disc(center: &[f64], radius: f64) -> Self {
        Domain::Disc {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn superellipse(center: &[f64], semi_axes: &[f64], exponent: f64) -> Self {
        Domain::Superellipse {
            center: center.to_vec(),
            semi_axes: semi_axes.to_vec(),
            exponent,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let m = self.dim();
        if !(2..=4).contains(&m) {
            return Err(DomainError::Dimension(m));
        }
        match self {
            Domain::Disc { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(DomainError::Parameter(format!("disc radius {radius}")));
                }
            }
            Domain::Superellipse {
                center,
                semi_axes,
                exponent,
            } => {
                if semi_axes.len() != center.len() {
                    return Err(DomainError::Parameter("semi_axes and center lengths differ".into()));
                }
                if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(DomainError::Parameter("semi-axes must be positive".into()));
                }
                if !(exponent.is_finite() && *exponent >= 2.0) {
                    return Err(DomainError::Parameter(format!("exponent {exponent} < 2 is not C² convex")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Domain::Disc { center, .. } | Domain::Superellipse { center, .. } => center,
        }
    }

    /// Normalized level function: negative inside, zero on the boundary.
    pub fn level(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Disc { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                r2 / (radius * radius) - 1.0
            }
            Domain::Superellipse {
                center,
                semi_axes,
                exponent,
            } => {
                let s: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((a, c), ax)| ((a - c).abs() / ax).powf(*exponent))
                    .sum();
                s - 1.0
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < -INTERIOR_LEVEL_TOL
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Disc { radius, .. } => 2.0 * radius,
            Domain::Superellipse { semi_axes, exponent, .. } if *exponent == 2.0 => {
                2.0 * semi_axes.iter().copied().fold(0.0, f64::max)
            }
            Domain::Superellipse { .. } => self.sampled_diameter(),
        }
    }

    /// Twice the largest center-to-boundary distance, found by sampling the
    /// boundary parametrization. Valid because the domain is centrally
    /// symmetric and convex.
    pub fn sampled_diameter(&self) -> f64 {
        let c = self.center().to_vec();
        let radius_at = |s: &[f64]| -> f64 {
            let p = self.boundary_point(s);
            p.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        if self.dim() == 2 {
            let k = 20_000;
            let step = 2.0 * std::f64::consts::PI / k as f64;
            let f = |t: f64| radius_at(&[t.cos(), t.sin()]);
            let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
            for i in 0..k {
                let t = i as f64 * step;
                let v = f(t);
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            // local refinement by ternary search
            let (mut a, mut b) = (best_t - step, best_t + step);
            for _ in 0..100 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if f(m1) < f(m2) {
                    a = m1;
                } else {
                    b = m2;
                }
            }
            2.0 * best.max(f(0.5 * (a + b)))
        } else {
            let dirs = sphere_directions(self.dim(), 50_000);
            2.0 * dirs.iter().map(|s| radius_at(s)).fold(0.0, f64::max)
        }
    }

    /// Boundary point in the direction of the unit vector `s` (through the
    /// superellipse parametrization `x_i = c_i + a_i sgn(s_i) |s_i|^{2/p}`).
    pub fn boundary_point(&self, s: &[f64]) -> Vec<f64> {
        match self {
            Domain::Disc { center, radius } => center.iter().zip(s).map(|(c, v)| c + radius * v).collect(),
            Domain::Superellipse {
                center,
                semi_axes,
                exponent,
            } => center
                .iter()
                .zip(semi_axes)
                .zip(s)
                .map(|((c, a), v)| c + a * v.signum() * v.abs().powf(2.0 / exponent))
                .collect(),
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: &[f64]) -> Vec<f64> {
        let mut nrm: Vec<f64> = match self {
            Domain::Disc { center, .. } => p.iter().zip(center).map(|(a, c)| a - c).collect(),
            Domain::Superellipse {
                center,
                semi_axes,
                exponent,
            } => p
                .iter()
                .zip(center)
                .zip(semi_axes)
                .map(|((a, c), ax)| {
                    let d = a - c;
                    d.signum() * (d.abs() / ax).powf(exponent - 1.0) / ax
                })
                .collect(),
        };
        let len = nrm.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 0.0 {
            nrm.iter_mut().for_each(|v| *v /= len);
        }
        nrm
    }

    /// Distance from the interior point `x` to the boundary along the ray
    /// `x + s·dir·e_axis`, `dir = ±1`. Closed form for both shapes.
    pub fn axis_hit(&self, x: &[f64], axis: usize, dir: f64) -> f64 {
        match self {
            Domain::Disc { center, radius } => {
                let others: f64 = x
                    .iter()
                    .zip(center)
                    .enumerate()
                    .filter(|(i, _)| *i != axis)
                    .map(|(_, (a, c))| (a - c).powi(2))
                    .sum();
                let half = (radius * radius - others).max(0.0).sqrt();
                let target = center[axis] + dir * half;
                ((target - x[axis]) * dir).max(0.0)
            }
            Domain::Superellipse {
                center,
                semi_axes,
                exponent,
            } => {
                let others: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .enumerate()
                    .filter(|(i, _)| *i != axis)
                    .map(|(_, ((a, c), ax))| ((a - c).abs() / ax).powf(*exponent))
                    .sum();
                let half = semi_axes[axis] * (1.0 - others).max(0.0).powf(1.0 / exponent);
                let target = center[axis] + dir * half;
                ((target - x[axis]) * dir).max(0.0)
            }
        }
    }

    /// `d(x) = ⟨p − x, ν_p⟩`: distance from `x` to the hyperplane tangent to
    /// the boundary at `p`. Non-negative on the closure by convexity.
    pub fn tangent_plane_distance(&self, p: &[f64], x: &[f64]) -> f64 {
        let nu = self.outward_normal(p);
        tangent_plane_distance_with_normal(p, &nu, x)
    }

    /// Deterministic boundary samples with their outward normals.
    pub fn boundary_samples(&self, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        sphere_directions(self.dim(), count)
            .into_iter()
            .map(|s| {
                let p = self.boundary_point(&s);
                let nu = self.outward_normal(&p);
                (p, nu)
            })
            .collect()
    }

    /// Lattice points strictly inside the domain at the given spacing,
    /// anchored at the domain center.
    pub fn interior_samples(&self, spacing: f64) -> Vec<Vec<f64>> {
        lattice_points(self, spacing, false)
    }

    /// Axis-aligned bounding half-widths.
    pub fn half_extents(&self) -> Vec<f64> {
        match self {
            Domain::Disc { center, radius } => vec![*radius; center.len()],
            Domain::Superellipse { semi_axes, .. } => semi_axes.clone(),
        }
    }

    /// Short human-readable tag for reports.
    pub fn describe(&self) -> String {
        match self {
            Domain::Disc { center, radius } => format!("disc(center={center:?}, radius={radius})"),
            Domain::Superellipse {
                center,
                semi_axes,
                exponent,
            } => format!("superellipse(center={center:?}, semi_axes={semi_axes:?}, p={exponent})"),
        }
    }
}

pub(crate) fn tangent_plane_distance_with_normal(p: &[f64], nu: &[f64], x: &[f64]) -> f64 {
    p.iter().zip(x).zip(nu).map(|((a, b), n)| (a - b) * n).sum()
}

/// Lattice `c + h·k` points inside the domain; with `closed = true` points on
/// the boundary (level within `INTERIOR_LEVEL_TOL`) are included too.
pub fn lattice_points(dom: &Domain, h: f64, closed: bool) -> Vec<Vec<f64>> {
    let m = dom.dim();
    let c = dom.center();
    let ext = dom.half_extents();
    let kmax: Vec<i64> = ext.iter().map(|e| (e / h).floor() as i64 + 1).collect();
    let mut out = Vec::new();
    let mut k: Vec<i64> = kmax.iter().map(|v| -v).collect();
    loop {
        let x: Vec<f64> = (0..m).map(|i| c[i] + h * k[i] as f64).collect();
        let lv = dom.level(&x);
        if lv < -INTERIOR_LEVEL_TOL || (closed && lv <= INTERIOR_LEVEL_TOL) {
            out.push(x);
        }
        // odometer increment, last axis fastest
        let mut axis = m;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if k[axis] < kmax[axis] {
                k[axis] += 1;
                break;
            }
            k[axis] = -kmax[axis];
        }
    }
}

/// Deterministic unit vectors: equispaced angles for `m = 2`, seeded uniform
/// sphere samples otherwise.
pub fn sphere_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    if m == 2 {
        return (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xd15c);
    let mut out = Vec::with_capacity(count + 2 * m);
    for i in 0..m {
        for sgn in [1.0, -1.0] {
            let mut e = vec![0.0; m];
            e[i] = sgn;
            out.push(e);
        }
    }
    while out.len() < count.max(2 * m) {
        let v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let r2: f64 = v.iter().map(|a| a * a).sum();
        if !(1e-6..=1.0).contains(&r2) {
            continue;
        }
        let r = r2.sqrt();
        out.push(v.into_iter().map(|a| a / r).collect());
    }
    out
}
