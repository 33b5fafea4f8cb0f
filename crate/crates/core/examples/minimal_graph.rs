//! The same solver with the Euclidean metric: a minimal graph of codimension two.

use maxgraph::solver::mean_curvature_residuals;
use maxgraph::{picard_solve, Domain, FnField, Signature, SolverConfig};

fn main() {
    // the boundary of the holomorphic graph z -> z^2 / 4
    let phi = FnField::new(2, 2, |x: &[f64], _| {
        vec![0.25 * (x[0] * x[0] - x[1] * x[1]), 0.5 * x[0] * x[1]]
    });
    let cfg = SolverConfig {
        signature: Signature::Euclidean,
        ..Default::default()
    };
    let sol = picard_solve(&Domain::unit_disc(), &phi, &cfg).unwrap();
    let res = mean_curvature_residuals(&sol.grid, &sol.u, Signature::Euclidean, None).unwrap();
    let worst = res.iter().copied().fold(0.0, f64::max);
    println!("converged in {} iterations, residual {worst:.2e}", sol.report.iterations());

    // holomorphic graphs are minimal, so the data are reproduced up to discretization error
    let exact = maxgraph::solver::sample(&sol.grid, &phi, 0.0);
    println!("max |u - z^2/4| = {:.2e}", sol.u.max_abs_diff(&exact));
}
