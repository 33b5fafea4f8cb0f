//! Flows a graph with time-dependent boundary data and writes the trajectory.
//!
//! cargo run --example mean_curvature_flow > trajectory.csv

use maxgraph::{flow_run, AuditConfig, Domain, ExprField, FlowConfig};

fn main() {
    let phi = ExprField::parse(2, &["0.004*sin(x1 + x2 + t)", "0.004*cos(x1 - x2)*exp(-t)"]).unwrap();
    let cfg = FlowConfig {
        dt: 0.02,
        t_final: 2.0,
        ..Default::default()
    };
    let out = flow_run(&Domain::unit_disc(), &phi, &cfg, &AuditConfig::default()).unwrap();
    out.write_trajectory(std::io::stdout()).unwrap();
    if let Some(h) = &out.hypothesis {
        eprintln!("parabolic hypothesis: lhs {:.4} rhs {:.4} pass {}", h.lhs, h.rhs, h.pass);
    }
    for a in &out.audits {
        eprintln!("{:<16} pass {} value {:.3e} vacuous {}", a.name, a.pass, a.value, a.vacuous);
    }
}
