//! Analytic vector fields `φ(x, t)` used as boundary data, initial data and
//! manufactured solutions.
//!
//! Derivatives default to fourth-order central differences with step
//! `1e-4·(1 + |x_i|)`; second derivatives nest the first-derivative stencil.
//! Implementors with closed-form derivatives override the defaults.

use nalgebra::DMatrix;

use crate::geometry::{Hessian, Jacobian};

/// Finite-difference step for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-4 * (1.0 + x.abs())
}

/// Fourth-order central difference of `f` along `axis`, written as
/// differences of symmetric pairs so that constants differentiate to zero.
fn central_difference(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], axis: usize) -> Vec<f64> {
    let s = fd_step(x[axis]);
    let mut y = x.to_vec();
    let mut at = |off: f64| {
        y[axis] = x[axis] + off * s;
        f(&y)
    };
    let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
    (0..p1.len())
        .map(|g| (8.0 * (p1[g] - m1[g]) - (p2[g] - m2[g])) / (12.0 * s))
        .collect()
}

pub trait VectorFunction: Sync {
    /// Spatial dimension `m`.
    fn dim_in(&self) -> usize;
    /// Number of components `n`.
    fn dim_out(&self) -> usize;
    fn eval(&self, x: &[f64], t: f64) -> Vec<f64>;

    fn jacobian(&self, x: &[f64], t: f64) -> Jacobian {
        let (m, n) = (self.dim_in(), self.dim_out());
        let mut j = Jacobian::zeros(n, m);
        for i in 0..m {
            let d = central_difference(|y| self.eval(y, t), x, i);
            for g in 0..n {
                j.0[(g, i)] = d[g];
            }
        }
        j
    }

    fn hessian(&self, x: &[f64], t: f64) -> Hessian {
        let (m, n) = (self.dim_in(), self.dim_out());
        let mut hs = vec![DMatrix::zeros(m, m); n];
        for i in 0..m {
            for j in i..m {
                let d = central_difference(|y| central_difference(|z| self.eval(z, t), y, j), x, i);
                for g in 0..n {
                    hs[g][(i, j)] = d[g];
                    hs[g][(j, i)] = d[g];
                }
            }
        }
        Hessian(hs)
    }

    /// `∂φ/∂t` by central differences.
    fn time_derivative(&self, x: &[f64], t: f64) -> Vec<f64> {
        central_difference(|s| self.eval(x, s[0]), &[t], 0)
    }

    /// Whether the field depends on `t`.
    fn is_time_dependent(&self) -> bool {
        false
    }
}

/// Closure-backed field with finite-difference derivatives.
pub struct FnField<F> {
    m: usize,
    n: usize,
    f: F,
    time_dependent: bool,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Sync,
{
    pub fn new(m: usize, n: usize, f: F) -> Self {
        FnField {
            m,
            n,
            f,
            time_dependent: false,
        }
    }

    pub fn time_dependent(mut self) -> Self {
        self.time_dependent = true;
        self
    }
}

impl<F> VectorFunction for FnField<F>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Sync,
{
    fn dim_in(&self) -> usize {
        self.m
    }

    fn dim_out(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.f)(x, t)
    }

    fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }
}

/// `φ(x) = A x + b` with exact derivatives.
#[derive(Debug, Clone)]
pub struct AffineField {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
}

impl AffineField {
    /// `a` given row-major as `n × m`.
    pub fn new(n: usize, m: usize, a: &[f64], b: &[f64]) -> Self {
        AffineField {
            a: DMatrix::from_row_slice(n, m, a),
            b: b.to_vec(),
        }
    }
}

impl VectorFunction for AffineField {
    fn dim_in(&self) -> usize {
        self.a.ncols()
    }

    fn dim_out(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, x: &[f64], _t: f64) -> Vec<f64> {
        (0..self.a.nrows())
            .map(|g| self.b[g] + (0..self.a.ncols()).map(|i| self.a[(g, i)] * x[i]).sum::<f64>())
            .collect()
    }

    fn jacobian(&self, _x: &[f64], _t: f64) -> Jacobian {
        Jacobian(self.a.clone())
    }

    fn hessian(&self, _x: &[f64], _t: f64) -> Hessian {
        Hessian::zeros(self.a.nrows(), self.a.ncols())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_differences_match_closed_form() {
        let f = FnField::new(2, 2, |x: &[f64], t: f64| {
            vec![x[0].sin() * x[1].cos(), (x[0] * x[1]).exp() + t * t]
        });
        let x = [0.3, -0.7];
        let j = f.jacobian(&x, 0.5);
        assert!((j.0[(0, 0)] - 0.3f64.cos() * 0.7f64.cos()).abs() < 1e-11);
        assert!((j.0[(0, 1)] - 0.3f64.sin() * 0.7f64.sin()).abs() < 1e-11);
        let e = (-0.21f64).exp();
        assert!((j.0[(1, 0)] - (-0.7) * e).abs() < 1e-11);
        let h = f.hessian(&x, 0.5);
        assert!((h.0[0][(0, 0)] + 0.3f64.sin() * 0.7f64.cos()).abs() < 1e-7);
        assert!((h.0[0][(0, 1)] + 0.3f64.cos() * (-0.7f64).sin()).abs() < 1e-7);
        assert!((h.0[1][(0, 1)] - (1.0 + x[0] * x[1]) * e).abs() < 1e-7);
        assert!((h.0[1][(1, 1)] - 0.09 * e).abs() < 1e-7);
        let dt = f.time_derivative(&x, 0.5);
        assert!((dt[1] - 1.0).abs() < 1e-10);
        assert!(dt[0].abs() < 1e-12);
    }

    #[test]
    fn affine_field_is_exact() {
        let f = AffineField::new(2, 2, &[0.1, 0.2, -0.3, 0.0], &[1.0, 2.0]);
        assert_eq!(f.eval(&[1.0, 1.0], 0.0), vec![1.3, 1.7]);
        assert_eq!(f.hessian(&[0.0, 0.0], 0.0).frobenius(), 0.0);
    }
}
