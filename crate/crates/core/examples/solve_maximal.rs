//! Solves for a maximal graph over the unit disc and prints the solver report.
//!
//! cargo run --example solve_maximal -- [h]

use maxgraph::{picard_solve, Domain, ExprField, SolverConfig};

fn main() {
    let h = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let phi = ExprField::parse(2, &["0.05*sin(x1 + x2)", "0.05*cos(x1 - x2)"]).unwrap();
    let cfg = SolverConfig { h, ..Default::default() };
    let sol = picard_solve(&Domain::unit_disc(), &phi, &cfg).unwrap();
    let r = &sol.report;

    println!("unknowns            {}", sol.grid.len());
    println!("picard iterations   {}", r.iterations());
    println!("continuation used   {}", r.continuation_used);
    println!("sup |||Du|||^2      {:.6e}", r.final_sup_slope_sq);
    println!("margin to 1 - kappa {:.6e}", r.margin);
    println!("residual            {:.3e}", r.final_residual);
    for (k, change) in r.history.iter().enumerate() {
        println!("  step {k:>2}: change {change:.3e}");
    }
}
