//! Masked uniform grid over a [`Domain`] with cut-cell boundary stencils.
//!
//! Unknowns live at lattice points `c + h·k` strictly inside the domain. Where
//! a grid line leaves the domain between two lattice points, the arm is cut at
//! the true boundary intersection (length `θh`, `θ ∈ (0, 1]`) and a boundary
//! node is created there; Dirichlet data is sampled at those nodes.
//!
//! Derivative stencils:
//! * first derivatives use the three-point unequal-arm formula (second order);
//! * pure second derivatives use the Shortley–Weller formula (second order on
//!   full arms, first order on cut arms);
//! * mixed derivatives use the centered four-corner stencil when all corners
//!   are unknowns, otherwise a one-sided quadrant stencil, otherwise the
//!   four-corner stencil shifted inward (both first order).
//!
//! All three reproduce quadratic polynomials exactly.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::domain::{Domain, DomainError};
use crate::geometry::{Hessian, Jacobian};

/// Minimum number of unknowns a grid must carry.
pub const MIN_INTERIOR_POINTS: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("grid spacing {h} must satisfy 0 < h < diam/8 = {limit}")]
    InvalidSpacing { h: f64, limit: f64 },
    #[error("grid too coarse: {count} interior points (need at least {MIN_INTERIOR_POINTS})")]
    GridTooCoarse { count: usize },
    #[error("no mixed-derivative stencil available at interior point {point} for axes ({i}, {j})")]
    MixedStencil { point: usize, i: usize, j: usize },
}

/// A value location referenced by a stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Interior(usize),
    Boundary(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stencil {
    pub terms: Vec<(Node, f64)>,
}

impl Stencil {
    fn push(&mut self, node: Node, w: f64) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.0 == node) {
            t.1 += w;
        } else {
            self.terms.push((node, w));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedKind {
    Centered,
    Quadrant,
    Shifted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode {
    pub x: Vec<f64>,
    pub normal: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DomainGrid {
    domain: Domain,
    h: f64,
    points: Vec<Vec<f64>>,
    keys: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    boundary: Vec<BoundaryNode>,
    /// Per point and axis: `[θ₋, θ₊]`.
    arms: Vec<Vec<[f64; 2]>>,
    /// Per point and axis: whether the `[−, +]` neighbor is a boundary node.
    cut: Vec<Vec<[bool; 2]>>,
    first: Vec<Vec<Stencil>>,
    second: Vec<Vec<Stencil>>,
    mixed_kind: Vec<Vec<MixedKind>>,
}

/// Position of the pair `(i, j)`, `i ≤ j`, in the packed second-derivative list.
pub fn pair_index(i: usize, j: usize, m: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * (i + 1) / 2 + j
}

impl DomainGrid {
    /// Builds the masked grid. Points are ordered lexicographically by lattice
    /// index (first axis slowest).
    pub fn build(domain: &Domain, h: f64) -> Result<Self, GridError> {
        domain.validate()?;
        let limit = domain.diameter() / 8.0;
        if !(h.is_finite() && h > 0.0 && h < limit) {
            // too-coarse spacings that still enclose a few points are reported
            // by count, which is the more useful message
            if h.is_finite() && h > 0.0 {
                let count = crate::domain::lattice_points(domain, h, false).len();
                if count < MIN_INTERIOR_POINTS {
                    return Err(GridError::GridTooCoarse { count });
                }
            }
            return Err(GridError::InvalidSpacing { h, limit });
        }
        let m = domain.dim();
        let c = domain.center().to_vec();
        let ext = domain.half_extents();
        let kmax: Vec<i64> = ext.iter().map(|e| (e / h).floor() as i64 + 1).collect();

        let mut keys = Vec::new();
        let mut points = Vec::new();
        let mut k: Vec<i64> = kmax.iter().map(|v| -v).collect();
        'outer: loop {
            let x: Vec<f64> = (0..m).map(|i| c[i] + h * k[i] as f64).collect();
            if domain.contains(&x) {
                keys.push(k.clone());
                points.push(x);
            }
            let mut axis = m;
            loop {
                if axis == 0 {
                    break 'outer;
                }
                axis -= 1;
                if k[axis] < kmax[axis] {
                    k[axis] += 1;
                    break;
                }
                k[axis] = -kmax[axis];
            }
        }
        if points.len() < MIN_INTERIOR_POINTS {
            return Err(GridError::GridTooCoarse { count: points.len() });
        }
        let index: HashMap<Vec<i64>, usize> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();

        let mut grid = DomainGrid {
            domain: domain.clone(),
            h,
            points,
            keys,
            index,
            boundary: Vec::new(),
            arms: Vec::new(),
            cut: Vec::new(),
            first: Vec::new(),
            second: Vec::new(),
            mixed_kind: Vec::new(),
        };
        grid.build_stencils()?;
        Ok(grid)
    }

    fn build_stencils(&mut self) -> Result<(), GridError> {
        let m = self.dim();
        let h = self.h;
        let npts = self.points.len();
        let mut bindex: HashMap<Vec<i64>, usize> = HashMap::new();
        let quant = 1e9 / h;

        let mut arm_nodes: Vec<Vec<[Node; 2]>> = Vec::with_capacity(npts);
        for p in 0..npts {
            let mut per_axis_arms = Vec::with_capacity(m);
            let mut per_axis_nodes = Vec::with_capacity(m);
            let mut per_axis_cut = Vec::with_capacity(m);
            for axis in 0..m {
                let mut theta = [1.0; 2];
                let mut nodes = [Node::Interior(0); 2];
                let mut cut = [false; 2];
                for (side, dir) in [(0usize, -1i64), (1usize, 1i64)] {
                    let mut nk = self.keys[p].clone();
                    nk[axis] += dir;
                    if let Some(&q) = self.index.get(&nk) {
                        nodes[side] = Node::Interior(q);
                    } else {
                        let x = &self.points[p];
                        let s = self.domain.axis_hit(x, axis, dir as f64);
                        let th = (s / h).clamp(1e-12, 1.0);
                        let mut y = x.clone();
                        y[axis] += dir as f64 * th * h;
                        let bkey: Vec<i64> = y.iter().map(|v| (v * quant).round() as i64).collect();
                        let b = *bindex.entry(bkey).or_insert_with(|| {
                            let normal = self.domain.outward_normal(&y);
                            self.boundary.push(BoundaryNode { x: y.clone(), normal });
                            self.boundary.len() - 1
                        });
                        theta[side] = th;
                        nodes[side] = Node::Boundary(b);
                        cut[side] = true;
                    }
                }
                per_axis_arms.push(theta);
                per_axis_nodes.push(nodes);
                per_axis_cut.push(cut);
            }
            self.arms.push(per_axis_arms);
            self.cut.push(per_axis_cut);
            arm_nodes.push(per_axis_nodes);
        }

        let npairs = m * (m + 1) / 2;
        for p in 0..npts {
            let me = Node::Interior(p);
            let mut first = Vec::with_capacity(m);
            let mut second = vec![Stencil::default(); npairs];
            let mut kinds = vec![MixedKind::Centered; npairs];
            for axis in 0..m {
                let [tm, tp] = self.arms[p][axis];
                let (a, b) = (tp * h, tm * h);
                let [nm, np] = arm_nodes[p][axis];
                let mut d1 = Stencil::default();
                d1.push(np, b / (a * (a + b)));
                d1.push(nm, -a / (b * (a + b)));
                d1.push(me, (a - b) / (a * b));
                first.push(d1);
                let mut d2 = Stencil::default();
                d2.push(np, 2.0 / (a * (a + b)));
                d2.push(nm, 2.0 / (b * (a + b)));
                d2.push(me, -2.0 / (a * b));
                second[pair_index(axis, axis, m)] = d2;
            }
            for i in 0..m {
                for j in (i + 1)..m {
                    let (st, kind) = self.mixed_stencil(p, i, j)?;
                    let idx = pair_index(i, j, m);
                    second[idx] = st;
                    kinds[idx] = kind;
                }
            }
            self.first.push(first);
            self.second.push(second);
            self.mixed_kind.push(kinds);
        }
        Ok(())
    }

    fn lookup(&self, base: &[i64], offs: &[(usize, i64)]) -> Option<usize> {
        let mut k = base.to_vec();
        for &(ax, d) in offs {
            k[ax] += d;
        }
        self.index.get(&k).copied()
    }

    fn inward_score(&self, p: usize, offs: &[(usize, i64)]) -> f64 {
        let x = &self.points[p];
        let c = self.domain.center();
        offs.iter().map(|&(ax, d)| d as f64 * (c[ax] - x[ax])).sum()
    }

    fn mixed_stencil(&self, p: usize, i: usize, j: usize) -> Result<(Stencil, MixedKind), GridError> {
        let h2 = self.h * self.h;
        let base = &self.keys[p];
        let corners = |b: &[i64]| -> Option<[usize; 4]> {
            Some([
                self.lookup(b, &[(i, 1), (j, 1)])?,
                self.lookup(b, &[(i, 1), (j, -1)])?,
                self.lookup(b, &[(i, -1), (j, 1)])?,
                self.lookup(b, &[(i, -1), (j, -1)])?,
            ])
        };
        let centered = |[pp, pm, mp, mm]: [usize; 4]| {
            let w = 1.0 / (4.0 * h2);
            let mut st = Stencil::default();
            st.push(Node::Interior(pp), w);
            st.push(Node::Interior(pm), -w);
            st.push(Node::Interior(mp), -w);
            st.push(Node::Interior(mm), w);
            st
        };
        if let Some(cs) = corners(base) {
            return Ok((centered(cs), MixedKind::Centered));
        }

        let mut quads: Vec<(i64, i64)> = vec![(1, 1), (1, -1), (-1, 1), (-1, -1)];
        quads.sort_by(|a, b| {
            let sa = self.inward_score(p, &[(i, a.0), (j, a.1)]);
            let sb = self.inward_score(p, &[(i, b.0), (j, b.1)]);
            sb.total_cmp(&sa)
        });
        for (si, sj) in quads {
            let found = (|| {
                Some((
                    self.lookup(base, &[(i, si), (j, sj)])?,
                    self.lookup(base, &[(i, si)])?,
                    self.lookup(base, &[(j, sj)])?,
                ))
            })();
            if let Some((diag, ai, aj)) = found {
                let w = (si * sj) as f64 / h2;
                let mut st = Stencil::default();
                st.push(Node::Interior(diag), w);
                st.push(Node::Interior(ai), -w);
                st.push(Node::Interior(aj), -w);
                st.push(Node::Interior(p), w);
                return Ok((st, MixedKind::Quadrant));
            }
        }

        let mut shifts: Vec<Vec<(usize, i64)>> = Vec::new();
        for r in 1..=2i64 {
            for di in -r..=r {
                for dj in -r..=r {
                    if di.abs().max(dj.abs()) == r {
                        shifts.push(vec![(i, di), (j, dj)]);
                    }
                }
            }
        }
        shifts.sort_by(|a, b| {
            let ra = a.iter().map(|t| t.1.abs()).max();
            let rb = b.iter().map(|t| t.1.abs()).max();
            ra.cmp(&rb)
                .then_with(|| self.inward_score(p, b).total_cmp(&self.inward_score(p, a)))
        });
        for s in shifts {
            let mut k = base.clone();
            for &(ax, d) in &s {
                k[ax] += d;
            }
            if self.index.contains_key(&k) {
                if let Some(cs) = corners(&k) {
                    return Ok((centered(cs), MixedKind::Shifted));
                }
            }
        }
        Err(GridError::MixedStencil { point: p, i, j })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.points[p]
    }

    pub fn key(&self, p: usize) -> &[i64] {
        &self.keys[p]
    }

    /// Unknown at lattice index `k`, if any.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        self.index.get(k).copied()
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary.len()
    }

    /// `[θ₋, θ₊]` arm fractions of point `p` along `axis`.
    pub fn arms(&self, p: usize, axis: usize) -> [f64; 2] {
        self.arms[p][axis]
    }

    pub fn first_stencil(&self, p: usize, axis: usize) -> &Stencil {
        &self.first[p][axis]
    }

    pub fn second_stencil(&self, p: usize, i: usize, j: usize) -> &Stencil {
        &self.second[p][pair_index(i, j, self.dim())]
    }

    pub fn mixed_kind(&self, p: usize, i: usize, j: usize) -> MixedKind {
        self.mixed_kind[p][pair_index(i, j, self.dim())]
    }

    /// A point whose axis neighbors include a boundary node.
    pub fn is_boundary_adjacent(&self, p: usize) -> bool {
        self.cut[p].iter().any(|c| c[0] || c[1])
    }

    /// A point whose every stencil is the standard centered one.
    pub fn is_full_stencil(&self, p: usize) -> bool {
        !self.is_boundary_adjacent(p) && self.mixed_kind[p].iter().all(|k| *k == MixedKind::Centered)
    }

    /// Smallest cut-arm fraction on the grid.
    pub fn min_arm(&self) -> f64 {
        self.arms
            .iter()
            .flat_map(|a| a.iter().flat_map(|t| t.iter().copied()))
            .fold(1.0, f64::min)
    }

    /// Distance from point `p` to the boundary: exact for discs, otherwise
    /// the distance to the nearest of a dense boundary sample (accurate to
    /// the sampling resolution).
    pub fn distance_to_boundary(&self, p: usize) -> f64 {
        let x = &self.points[p];
        match &self.domain {
            Domain::Disc { center, radius } => {
                let r = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                radius - r
            }
            _ => {
                let samples = self.domain.boundary_samples(if self.dim() == 2 { 4096 } else { 20_000 });
                samples
                    .iter()
                    .map(|(b, _)| b.iter().zip(x).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt())
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Applies a stencil to component `gamma` of `u`.
    pub fn apply(&self, st: &Stencil, u: &VectorField, gamma: usize) -> f64 {
        st.terms.iter().map(|&(node, w)| w * u.node_value(node, gamma)).sum()
    }

    pub fn jacobian_at(&self, u: &VectorField, p: usize) -> Jacobian {
        let (m, n) = (self.dim(), u.n);
        let mut j = Jacobian::zeros(n, m);
        for g in 0..n {
            for i in 0..m {
                j.0[(g, i)] = self.apply(&self.first[p][i], u, g);
            }
        }
        j
    }

    pub fn hessian_at(&self, u: &VectorField, p: usize) -> Hessian {
        let (m, n) = (self.dim(), u.n);
        let mut hs = Vec::with_capacity(n);
        for g in 0..n {
            let mut hm = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let v = self.apply(&self.second[p][pair_index(i, j, m)], u, g);
                    hm[(i, j)] = v;
                    hm[(j, i)] = v;
                }
            }
            hs.push(hm);
        }
        Hessian(hs)
    }

    /// Discrete `Du` at every unknown.
    pub fn gradient_field(&self, u: &VectorField) -> Vec<Jacobian> {
        (0..self.len()).map(|p| self.jacobian_at(u, p)).collect()
    }

    /// Discrete `D²u` at every unknown.
    pub fn hessian_field(&self, u: &VectorField) -> Vec<Hessian> {
        (0..self.len()).map(|p| self.hessian_at(u, p)).collect()
    }

    /// CSV dump: header `x1,..,xm,u1,..,un`, one row per unknown in
    /// lexicographic order, 17 significant digits.
    pub fn write_csv<W: Write>(&self, u: &VectorField, mut w: W) -> std::io::Result<()> {
        let m = self.dim();
        let header: Vec<String> = (1..=m)
            .map(|i| format!("x{i}"))
            .chain((1..=u.n).map(|g| format!("u{g}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for p in 0..self.len() {
            let row: Vec<String> = self.points[p]
                .iter()
                .chain(u.value(p).iter())
                .map(|v| format!("{v:.16e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Field `u: Ω → ℝⁿ` on a grid: values at the unknowns and at boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub n: usize,
    /// Row-major `len × n`.
    pub interior: Vec<f64>,
    /// Row-major `boundary_len × n`.
    pub boundary: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &DomainGrid, n: usize) -> Self {
        VectorField {
            n,
            interior: vec![0.0; grid.len() * n],
            boundary: vec![0.0; grid.boundary_len() * n],
        }
    }

    /// Samples `f` at every unknown and boundary node.
    pub fn from_fn(grid: &DomainGrid, n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut interior = Vec::with_capacity(grid.len() * n);
        for x in grid.points() {
            let v = f(x);
            debug_assert_eq!(v.len(), n);
            interior.extend_from_slice(&v);
        }
        let mut boundary = Vec::with_capacity(grid.boundary_len() * n);
        for b in grid.boundary_nodes() {
            boundary.extend_from_slice(&f(&b.x));
        }
        VectorField { n, interior, boundary }
    }

    pub fn is_consistent(&self, grid: &DomainGrid) -> bool {
        self.interior.len() == grid.len() * self.n && self.boundary.len() == grid.boundary_len() * self.n
    }

    pub fn value(&self, p: usize) -> &[f64] {
        &self.interior[p * self.n..(p + 1) * self.n]
    }

    pub fn boundary_value(&self, b: usize) -> &[f64] {
        &self.boundary[b * self.n..(b + 1) * self.n]
    }

    pub fn node_value(&self, node: Node, gamma: usize) -> f64 {
        match node {
            Node::Interior(p) => self.interior[p * self.n + gamma],
            Node::Boundary(b) => self.boundary[b * self.n + gamma],
        }
    }

    /// Component `gamma` at the unknowns.
    pub fn component(&self, gamma: usize) -> Vec<f64> {
        self.interior.iter().skip(gamma).step_by(self.n).copied().collect()
    }

    pub fn set_component(&mut self, gamma: usize, values: &[f64]) {
        for (p, v) in values.iter().enumerate() {
            self.interior[p * self.n + gamma] = *v;
        }
    }

    pub fn boundary_component(&self, gamma: usize) -> Vec<f64> {
        self.boundary.iter().skip(gamma).step_by(self.n).copied().collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorField {
            n: self.n,
            interior: self.interior.iter().map(|v| v * s).collect(),
            boundary: self.boundary.iter().map(|v| v * s).collect(),
        }
    }

    /// Sup norm of the difference at the unknowns.
    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.interior
            .iter()
            .zip(&other.interior)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.interior.iter().chain(&self.boundary).all(|v| v.is_finite())
    }
}
