//! Frozen-coefficient linear Dirichlet problems `g^{ij}(Dw) ∂_ij u = f`.
//!
//! All `n` components share one scalar operator, so one matrix and one
//! preconditioner serve every right-hand side. Rows are divided by their
//! diagonal before solving: cut arms with `θ ≪ 1` otherwise produce rows
//! (and boundary contributions) many orders of magnitude larger than the rest.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{inverse_metric, GeometryError, Signature};
use crate::grid::{DomainGrid, Node, VectorField};
use crate::sparse::{CsrMatrix, LinearError, LinearSolverConfig, LinearSystem, SolveStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("frozen metric is not spacelike at grid point {point} ({source})")]
    NonSpacelike { point: usize, source: GeometryError },
    #[error("linear solve for component {component} diverged: residual {residual:.3e}")]
    SolverDiverged { component: usize, residual: f64 },
    #[error("field does not match the grid")]
    Shape,
    #[error(transparent)]
    Linear(#[from] LinearError),
}

/// `s·I + t·L_w` on the unknowns, with `L_w u = g^{ij}(Dw) ∂_ij u`.
#[derive(Debug, Clone)]
pub struct FrozenOperator {
    coeffs: Vec<DMatrix<f64>>,
    /// Row-scaled interior block.
    matrix: CsrMatrix,
    /// Row-scaled coupling to boundary nodes.
    coupling: Vec<Vec<(usize, f64)>>,
    /// Factor each unscaled row was multiplied by.
    row_scale: Vec<f64>,
    n_boundary: usize,
}

/// Result of [`FrozenOperator::solve_dirichlet`].
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub u: VectorField,
    pub stats: Vec<SolveStats>,
}

impl DirichletSolution {
    /// Largest algebraic residual over the components.
    pub fn residual(&self) -> f64 {
        self.stats.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    pub fn iterations(&self) -> usize {
        self.stats.iter().map(|s| s.iterations).sum()
    }
}

/// Inverse induced metric at every unknown, from the discrete `Dw`.
pub fn frozen_coefficients(grid: &DomainGrid, w: &VectorField, sig: Signature) -> Result<Vec<DMatrix<f64>>, OperatorError> {
    if !w.is_consistent(grid) {
        return Err(OperatorError::Shape);
    }
    (0..grid.len())
        .into_par_iter()
        .map(|p| inverse_metric(&grid.jacobian_at(w, p), sig).map_err(|source| OperatorError::NonSpacelike { point: p, source }))
        .collect()
}

impl FrozenOperator {
    /// `L_w` with coefficients frozen at `w`.
    pub fn assemble(w: &VectorField, grid: &DomainGrid, sig: Signature) -> Result<Self, OperatorError> {
        let coeffs = frozen_coefficients(grid, w, sig)?;
        Ok(Self::from_coefficients(grid, coeffs, 0.0, 1.0))
    }

    /// The cut-cell Laplacian (`w ≡ 0`).
    pub fn laplacian(grid: &DomainGrid) -> Self {
        let m = grid.dim();
        Self::from_coefficients(grid, vec![DMatrix::identity(m, m); grid.len()], 0.0, 1.0)
    }

    /// `s·I + t·L` for the given per-point coefficient matrices.
    pub fn from_coefficients(grid: &DomainGrid, coeffs: Vec<DMatrix<f64>>, s: f64, t: f64) -> Self {
        let m = grid.dim();
        type Row = (Vec<(usize, f64)>, Vec<(usize, f64)>, f64);
        let rows: Vec<Row> = (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let c = &coeffs[p];
                let mut interior: Vec<(usize, f64)> = vec![(p, s)];
                let mut boundary: Vec<(usize, f64)> = Vec::new();
                for i in 0..m {
                    for j in i..m {
                        let weight = if i == j { c[(i, i)] } else { c[(i, j)] + c[(j, i)] };
                        if weight == 0.0 {
                            continue;
                        }
                        for &(node, w) in &grid.second_stencil(p, i, j).terms {
                            match node {
                                Node::Interior(q) => interior.push((q, t * weight * w)),
                                Node::Boundary(b) => boundary.push((b, t * weight * w)),
                            }
                        }
                    }
                }
                let diag: f64 = interior.iter().filter(|e| e.0 == p).map(|e| e.1).sum();
                let scale = if diag != 0.0 && diag.is_finite() { 1.0 / diag } else { 1.0 };
                interior.iter_mut().for_each(|e| e.1 *= scale);
                boundary.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(boundary.len());
                for (b, w) in boundary {
                    match merged.last_mut() {
                        Some(last) if last.0 == b => last.1 += w * scale,
                        _ => merged.push((b, w * scale)),
                    }
                }
                (interior, merged, scale)
            })
            .collect();
        let mut interior_rows = Vec::with_capacity(rows.len());
        let mut coupling = Vec::with_capacity(rows.len());
        let mut row_scale = Vec::with_capacity(rows.len());
        for (i, b, s) in rows {
            interior_rows.push(i);
            coupling.push(b);
            row_scale.push(s);
        }
        FrozenOperator {
            coeffs,
            matrix: CsrMatrix::from_rows(interior_rows),
            coupling,
            row_scale,
            n_boundary: grid.boundary_len(),
        }
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coefficients(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// The row-scaled interior matrix.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    /// Unscaled action on the unknowns of component `gamma`, boundary values
    /// taken from `u`.
    pub fn apply_component(&self, u: &VectorField, gamma: usize) -> Vec<f64> {
        let x = u.component(gamma);
        let mut y = vec![0.0; self.len()];
        self.matrix.matvec(&x, &mut y);
        for (p, yp) in y.iter_mut().enumerate() {
            for &(b, w) in &self.coupling[p] {
                *yp += w * u.boundary[b * u.n + gamma];
            }
            *yp /= self.row_scale[p];
        }
        y
    }

    /// Unscaled action on every component, row-major `len × n`.
    pub fn apply(&self, u: &VectorField) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * u.n];
        for g in 0..u.n {
            for (p, v) in self.apply_component(u, g).into_iter().enumerate() {
                out[p * u.n + g] = v;
            }
        }
        out
    }

    /// Solves `(s·I + t·L) u = source` at the unknowns with `u = data` on the
    /// boundary nodes. `data.interior` is the initial guess; `source` is
    /// row-major `len × n` and defaults to zero.
    pub fn solve_dirichlet(
        &self,
        data: &VectorField,
        source: Option<&[f64]>,
        cfg: &LinearSolverConfig,
    ) -> Result<DirichletSolution, OperatorError> {
        let n = data.n;
        if data.interior.len() != self.len() * n || data.boundary.len() != self.n_boundary * n {
            return Err(OperatorError::Shape);
        }
        if let Some(f) = source {
            if f.len() != self.len() * n {
                return Err(OperatorError::Shape);
            }
        }
        let system = LinearSystem::new(&self.matrix, *cfg);
        let results: Vec<Result<(Vec<f64>, SolveStats), OperatorError>> = (0..n)
            .into_par_iter()
            .map(|g| {
                let b: Vec<f64> = (0..self.len())
                    .map(|p| {
                        let f = source.map_or(0.0, |f| f[p * n + g]);
                        let bc: f64 = self.coupling[p].iter().map(|&(b, w)| w * data.boundary[b * n + g]).sum();
                        f * self.row_scale[p] - bc
                    })
                    .collect();
                let mut x = data.component(g);
                match system.solve(&b, &mut x) {
                    Ok(stats) => Ok((x, stats)),
                    Err(LinearError::Diverged { residual, .. }) => Err(OperatorError::SolverDiverged { component: g, residual }),
                    Err(e) => Err(e.into()),
                }
            })
            .collect();
        let mut u = data.clone();
        let mut stats = Vec::with_capacity(n);
        for (g, r) in results.into_iter().enumerate() {
            let (x, s) = r?;
            u.set_component(g, &x);
            stats.push(s);
        }
        Ok(DirichletSolution { u, stats })
    }
}
