//! Convergence table for a manufactured solution.

use maxgraph::solver::manufactured_solution_check;
use maxgraph::{Domain, ExprField, SolverConfig};

fn main() {
    let u_star = ExprField::parse(2, &["0.3*sin(x1 + 0.5*x2)", "0.2*cos(x1*x2) + 0.1*x1"]).unwrap();
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let rows = manufactured_solution_check(&Domain::unit_disc(), &u_star, &SolverConfig::default(), &hs).unwrap();
    println!("{:>8} {:>9} {:>12} {:>6} {:>8}", "h", "unknowns", "error", "order", "seconds");
    for r in rows {
        let order = r.order.map_or("-".to_string(), |o| format!("{o:.2}"));
        println!(
            "{:>8} {:>9} {:>12.4e} {:>6} {:>8.2}",
            r.h, r.unknowns, r.error, order, r.wall_seconds
        );
    }
}
