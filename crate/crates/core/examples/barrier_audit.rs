//! Runs every a posteriori audit on a solution and prints the table.

use maxgraph::solver::sample;
use maxgraph::{check_hypothesis, picard_solve, run_audits, AuditConfig, AuditInput, Domain, ExprField, SolverConfig};

fn main() {
    let dom = Domain::unit_disc();
    let kappa = 0.25;
    let phi = ExprField::parse(2, &["0.003*(x1^2 - x2^2)", "0.006*x1*x2"]).unwrap();
    let hyp = check_hypothesis(&phi, &dom, kappa);
    let sol = picard_solve(
        &dom,
        &phi,
        &SolverConfig {
            kappa,
            ..Default::default()
        },
    )
    .unwrap();
    let phi_grid = sample(&sol.grid, &phi, 0.0);
    let input = AuditInput {
        grid: &sol.grid,
        u: &sol.u,
        phi: &phi_grid,
        kappa,
        sups: hyp.sups,
        residual: sol.report.final_residual,
    };
    println!("hypothesis: lhs {:.4} < rhs {:.4}: {}", hyp.lhs, hyp.rhs, hyp.pass);
    for a in run_audits(&input, &AuditConfig::default()).unwrap() {
        let rel = a.relation.map_or(String::new(), |r| {
            serde_json::to_value(r).unwrap().as_str().unwrap().to_string()
        });
        let bound = a.bound.map_or(String::new(), |b| format!("{b:.4e}"));
        let status = if a.vacuous {
            "vacuous"
        } else if a.pass {
            "pass"
        } else {
            "FAIL"
        };
        println!("{:<24} {:>12.4e} {:>2} {:<11} {status}", a.name, a.value, rel, bound);
    }
}
