//! Evaluates the data hypothesis for a few boundary data at several kappa.

use maxgraph::{check_hypothesis, Domain, ExprField};

fn main() {
    let dom = Domain::unit_disc();
    let data = [
        ("0.004 trig", vec!["0.004*sin(x1 + x2)", "0.004*cos(x1 - x2)"]),
        ("0.05 trig", vec!["0.05*sin(x1 + x2)", "0.05*cos(x1 - x2)"]),
        ("affine", vec!["0.2*x1 + 0.1*x2", "-0.1*x1 + 0.15*x2"]),
    ];
    println!(
        "{:>12} {:>6} {:>9} {:>9} {:>10} {:>6}",
        "data", "kappa", "lhs", "rhs", "sup D2phi", "pass"
    );
    for (name, src) in &data {
        let phi = ExprField::parse(2, src).unwrap();
        for kappa in [0.1, 0.25, 0.5] {
            let c = check_hypothesis(&phi, &dom, kappa);
            println!(
                "{name:>12} {kappa:>6} {:>9.4} {:>9.4} {:>10.4e} {:>6}",
                c.lhs, c.rhs, c.sups.hessian, c.pass
            );
        }
    }
}
