mod common;

use common::{benchmark, hypothesis_set, restrict};
use maxgraph::estimates::{detg_max_principle_audit, holder_seminorm, subsolution_audit};
use maxgraph::solver::manufactured_solution_check;
use maxgraph::{check_hypothesis, picard_solve, run_audits, AuditConfig, AuditInput, Domain, ExprField, SolverConfig};

fn solve(h: f64, kappa: f64) -> maxgraph::MaximalSolution {
    let cfg = SolverConfig {
        h,
        kappa,
        ..Default::default()
    };
    picard_solve(&Domain::unit_disc(), &benchmark(), &cfg).unwrap()
}

fn max_diff(a: &[Vec<f64>], b: &maxgraph::VectorField) -> f64 {
    a.iter()
        .enumerate()
        .flat_map(|(p, v)| v.iter().zip(b.value(p)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn benchmark_self_converges_at_second_order() {
    let sols: Vec<_> = [0.1, 0.05, 0.025].iter().map(|&h| solve(h, 0.25)).collect();
    for s in &sols {
        assert!(s.report.converged);
        assert!(s.report.final_sup_slope_sq < 0.75);
    }
    let d1 = max_diff(&restrict(&sols[0].grid, &sols[1].grid, &sols[1].u), &sols[0].u);
    let d2 = max_diff(&restrict(&sols[1].grid, &sols[2].grid, &sols[2].u), &sols[1].u);
    let order = (d1 / d2).log2();
    assert!(order > 1.5, "self-convergence order {order} ({d1:e}, {d2:e})");
}

#[test]
fn hypothesis_set_converges_and_passes_audits() {
    for case in hypothesis_set() {
        let phi = case.field();
        let hyp = check_hypothesis(&phi, &case.domain, case.kappa);
        assert!(hyp.pass, "{}: lhs {} rhs {}", case.name, hyp.lhs, hyp.rhs);
        let cfg = SolverConfig {
            h: 0.05,
            kappa: case.kappa,
            ..Default::default()
        };
        let sol = picard_solve(&case.domain, &phi, &cfg).unwrap();
        assert!(sol.report.converged, "{}", case.name);
        assert!(sol.report.margin > 0.0, "{}", case.name);
        let phi_grid = maxgraph::solver::sample(&sol.grid, &phi, 0.0);
        let input = AuditInput {
            grid: &sol.grid,
            u: &sol.u,
            phi: &phi_grid,
            kappa: case.kappa,
            sups: hyp.sups,
            residual: sol.report.final_residual,
        };
        let audits = run_audits(&input, &AuditConfig::default()).unwrap();
        for a in &audits {
            assert!(a.pass, "{}: {:?}", case.name, a);
        }
        for name in [
            "barrier_lower_bound",
            "barrier_triples",
            "boundary_gradient",
            "detg_max_principle",
        ] {
            let a = audits.iter().find(|a| a.name == name).unwrap();
            assert!(!a.vacuous, "{}: {name} vacuous", case.name);
        }
    }
}

#[test]
fn detg_interior_minimum_within_h_squared() {
    let h = 0.05;
    let sol = solve(h, 0.25);
    let entries = detg_max_principle_audit(&sol.grid, &sol.u, 0.25, 10.0 * h * h);
    assert!(entries[0].pass, "{:?}", entries[0]);
}

#[test]
fn subsolution_is_nearly_nonnegative_at_large_kappa() {
    let h = 0.05;
    let sol = solve(h, 0.9);
    let entry = subsolution_audit(&sol.grid, &sol.u, 0.9, 0.1, h).unwrap();
    assert!(!entry.vacuous);
    assert!(entry.value >= -h, "{:?}", entry);
}

#[test]
fn holder_seminorm_is_stable_under_refinement() {
    let a = solve(0.05, 0.25);
    let b = solve(0.025, 0.25);
    for margin in [0.1, 0.0] {
        let sa = holder_seminorm(&a.grid, &a.u, 0.5, margin);
        let sb = holder_seminorm(&b.grid, &b.u, 0.5, margin);
        assert!((sa - sb).abs() <= 0.2 * sa.max(sb), "margin {margin}: {sa} vs {sb}");
    }
}

#[test]
fn manufactured_scalar_solution_has_order_two() {
    let u_star = ExprField::parse(2, &["0.1*sin(x1)*sin(x2)"]).unwrap();
    let rows = manufactured_solution_check(&Domain::unit_disc(), &u_star, &SolverConfig::default(), &[0.1, 0.05, 0.025]).unwrap();
    for r in &rows[1..] {
        let order = r.order.unwrap();
        assert!(order > 1.8, "{rows:?}");
    }
}

#[test]
fn superellipse_solution_is_spacelike() {
    let dom = Domain::Superellipse {
        center: vec![0.2, -0.1],
        semi_axes: vec![1.2, 0.9],
        exponent: 2.0,
    };
    let phi = ExprField::parse(2, &["0.1*x1*x2", "0.05*(x1 + x2)"]).unwrap();
    let sol = picard_solve(&dom, &phi, &SolverConfig::default()).unwrap();
    assert!(sol.report.converged);
    assert!(sol.report.final_residual < 1e-8);
}
