//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use common::{benchmark, hypothesis_set, Case, BENCHMARK};
use maxgraph::estimates::{data_sups, default_resolution};
use maxgraph::flow::{explicit_dt_limit, flow_step, FlowState};
use maxgraph::linear::{frozen_coefficients, FrozenOperator};
use maxgraph::runner::{self, JobConfig};
use maxgraph::solver::{manufactured_solution_check, mean_curvature_residuals, picard_solve_on, sample, SolveError};
use maxgraph::{
    check_hypothesis, flow_run, picard_solve, run_audits, AuditConfig, AuditEntry, AuditInput, Domain, DomainGrid, ExprField,
    FlowConfig, MaximalSolution, Mode, Signature, SolverConfig, Stepper, VectorField,
};

const H: f64 = 0.05;

type Outcome = Result<String, String>;

struct Run {
    name: String,
    kappa: f64,
    hypothesis: bool,
    sol: MaximalSolution,
    audits: Vec<AuditEntry>,
}

fn solve_and_audit(name: &str, dom: &Domain, phi: &ExprField, kappa: f64) -> Result<Run, String> {
    let cfg = SolverConfig {
        h: H,
        kappa,
        ..Default::default()
    };
    let hyp = check_hypothesis(phi, dom, kappa);
    let sol = picard_solve(dom, phi, &cfg).map_err(|e| format!("{name}: {e}"))?;
    let phi_grid = sample(&sol.grid, phi, 0.0);
    let input = AuditInput {
        grid: &sol.grid,
        u: &sol.u,
        phi: &phi_grid,
        kappa,
        sups: hyp.sups,
        residual: sol.report.final_residual,
    };
    let audits = run_audits(&input, &AuditConfig::default()).map_err(|e| format!("{name}: {e}"))?;
    Ok(Run {
        name: name.to_string(),
        kappa,
        hypothesis: hyp.pass,
        sol,
        audits,
    })
}

fn audit<'a>(run: &'a Run, name: &str) -> &'a AuditEntry {
    run.audits.iter().find(|a| a.name == name).expect("audit present")
}

fn criterion_1() -> Outcome {
    let fields: [&[&str]; 2] = [&["0.1*sin(x1)*sin(x2)"], &["0.3*sin(x1 + 0.5*x2)", "0.2*cos(x1*x2) + 0.1*x1"]];
    let dom = Domain::unit_disc();
    let mut notes = Vec::new();
    let mut ok = true;
    for f in fields {
        let u_star = ExprField::parse(2, f).unwrap();
        let slope = data_sups(&u_star, &dom, 0.0, default_resolution(2), 0).gradient_sq;
        if slope > 0.5 {
            return Err(format!("u* has sup slope² {slope:.3} > 0.5"));
        }
        let rows = manufactured_solution_check(&dom, &u_star, &SolverConfig::default(), &[0.1, 0.05, 0.025])
            .map_err(|e| e.to_string())?;
        let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
        let slowest = rows.iter().map(|r| r.wall_seconds).fold(0.0, f64::max);
        ok &= orders.len() == 2 && orders.iter().all(|&o| o >= 1.8) && slowest < 60.0;
        notes.push(format!("n={} orders {:.2?} slowest solve {:.2}s", f.len(), orders, slowest));
    }
    let msg = notes.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let dom = Domain::unit_disc();
    let cases: [(&str, &[&str]); 4] = [
        ("constant n=2", &["1.5", "-0.7"]),
        ("constant n=1", &["0.3"]),
        ("affine n=2", &["0.3*x1 - 0.2*x2 + 1", "0.1*x1 + 0.4*x2 - 0.5"]),
        ("affine n=1", &["0.5*x1 + 0.6*x2"]),
    ];
    let mut worst: f64 = 0.0;
    for (name, phi) in cases {
        let phi = ExprField::parse(2, phi).unwrap();
        let sol = picard_solve(
            &dom,
            &phi,
            &SolverConfig {
                h: H,
                ..Default::default()
            },
        )
        .map_err(|e| format!("{name}: {e}"))?;
        let exact = sample(&sol.grid, &phi, 0.0);
        let res = sol.report.full_stencil_residual;
        let err = sol.u.max_abs_diff(&exact);
        if res > 1e-9 || err > 1e-8 {
            return Err(format!("{name}: residual {res:.2e}, error {err:.2e}"));
        }
        worst = worst.max(res);
    }
    Ok(format!("worst full-stencil residual {worst:.2e}"))
}

fn criterion_3(runs: &[Run]) -> Outcome {
    let mut margins = Vec::new();
    for r in runs.iter().filter(|r| r.hypothesis) {
        let rep = &r.sol.report;
        if !rep.converged || rep.final_sup_slope_sq >= 1.0 - r.kappa || rep.margin <= 0.0 {
            return Err(format!(
                "{}: converged {}, slope² {:.4}, margin {:.4}",
                r.name, rep.converged, rep.final_sup_slope_sq, rep.margin
            ));
        }
        margins.push(rep.margin);
    }
    let n = margins.len();
    if n < 5 {
        return Err(format!("only {n} hypothesis-passing runs"));
    }
    Ok(format!(
        "{n} runs, smallest margin {:.4}",
        margins.iter().copied().fold(f64::INFINITY, f64::min)
    ))
}

fn all_pass(runs: &[Run], names: &[&str], hypothesis_only: bool) -> Outcome {
    let mut checked = 0;
    for r in runs.iter().filter(|r| r.hypothesis || !hypothesis_only) {
        for &name in names {
            let a = audit(r, name);
            if !a.pass || a.vacuous {
                return Err(format!(
                    "{}: {name} value {:e} bound {:?} vacuous {}",
                    r.name, a.value, a.bound, a.vacuous
                ));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} non-vacuous checks passed"))
}

fn criterion_4(runs: &[Run]) -> Outcome {
    for r in runs.iter().filter(|r| r.hypothesis) {
        let a = audit(r, "barrier_triples");
        if a.value < 1.0 {
            return Err(format!("{}: only {:.4} of triples hold", r.name, a.value));
        }
    }
    all_pass(runs, &["barrier_lower_bound", "barrier_triples"], true)
}

fn criterion_7() -> Outcome {
    let r = solve_and_audit("benchmark", &Domain::unit_disc(), &benchmark(), 0.95)?;
    let a = audit(&r, "subsolution");
    let msg = format!("min {:.4e} against -eps_h = {:.4e}", a.value, -a.tolerance);
    if a.pass && !a.vacuous {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn explicit_vs_semi(grid: &DomainGrid, dt: f64, t_final: f64) -> Result<f64, String> {
    let phi = benchmark();
    let mut fields: Vec<VectorField> = Vec::new();
    for stepper in [Stepper::ExplicitEuler, Stepper::SemiImplicit] {
        let cfg = FlowConfig {
            h: grid.h(),
            dt,
            t_final,
            stepper,
            ..Default::default()
        };
        let mut state = FlowState::new(grid, 0.0, sample(grid, &phi, 0.0));
        for _ in 0..(t_final / dt).round() as usize {
            state = flow_step(grid, &state, &phi, dt, &cfg).map_err(|e| e.to_string())?.0;
        }
        fields.push(state.u);
    }
    Ok(fields[0].max_abs_diff(&fields[1]))
}

fn criterion_8() -> Outcome {
    let dom = Domain::unit_disc();
    // hypothesis-satisfying data stay spacelike for the whole run
    let case = &hypothesis_set()[0];
    let cfg = FlowConfig {
        h: H,
        kappa: case.kappa,
        t_final: 5.0,
        ..Default::default()
    };
    let out = flow_run(&case.domain, &case.field(), &cfg, &AuditConfig::default()).map_err(|e| e.to_string())?;
    let worst = out.trajectory.iter().map(|r| r.sup_slope_sq).fold(0.0, f64::max);
    if worst >= 1.0 - case.kappa || !out.hypothesis.as_ref().is_some_and(|h| h.pass) {
        return Err(format!("sup slope² reached {worst:.4}"));
    }
    // the benchmark flow settles on the maximal solution
    let grid = DomainGrid::build(&dom, H).unwrap();
    let scfg = SolverConfig {
        h: H,
        ..Default::default()
    };
    let (target, _) = picard_solve_on(&grid, &sample(&grid, &benchmark(), 0.0), None, &scfg).map_err(|e| e.to_string())?;
    let fcfg = FlowConfig {
        h: H,
        t_final: 5.0,
        ..Default::default()
    };
    let flow = flow_run(&dom, &benchmark(), &fcfg, &AuditConfig::default()).map_err(|e| e.to_string())?;
    let dist = flow.state.u.max_abs_diff(&target);
    if dist > 10.0 * scfg.fp_tol {
        return Err(format!("distance to the maximal solution {dist:.2e}"));
    }
    // explicit against semi-implicit under dt halving
    let coarse = DomainGrid::build(&dom, 0.1).unwrap();
    let u0 = sample(&coarse, &benchmark(), 0.0);
    let op = FrozenOperator::from_coefficients(
        &coarse,
        frozen_coefficients(&coarse, &u0, Signature::SemiEuclidean).unwrap(),
        0.0,
        1.0,
    );
    let t_final = 0.05;
    let dt0 = t_final / (t_final / explicit_dt_limit(&coarse, &op, 0.25, 0.5)).ceil();
    let gaps = (0..4)
        .map(|k| explicit_vs_semi(&coarse, dt0 / 2f64.powi(k), t_final))
        .collect::<Result<Vec<f64>, String>>()?;
    let orders: Vec<f64> = gaps.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let msg = format!("max slope² {worst:.3e}; |u(5) - u_ell| = {dist:.2e}; stepper orders {orders:.3?}");
    if orders.iter().all(|&o| o >= 0.9) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_9() -> Outcome {
    let dom = Domain::unit_disc();
    let cfg = SolverConfig {
        h: H,
        signature: Signature::Euclidean,
        ..Default::default()
    };
    let sol = picard_solve(&dom, &benchmark(), &cfg).map_err(|e| e.to_string())?;
    let res = mean_curvature_residuals(&sol.grid, &sol.u, Signature::Euclidean, None)
        .map_err(|e| e.to_string())?
        .into_iter()
        .fold(0.0, f64::max);
    if !sol.report.converged || res > 1e-8 {
        return Err(format!("benchmark residual {res:.2e}"));
    }
    let large = ExprField::parse(2, &["5*sin(6*(x1 + x2))", "5*cos(6*(x1 - x2))"]).unwrap();
    let c2 = |f: &ExprField| {
        let s = data_sups(f, &dom, 0.0, default_resolution(2), 0);
        s.hessian + s.boundary_gradient
    };
    let ratio = c2(&large) / c2(&benchmark());
    if ratio < 10.0 {
        return Err(format!("large data only {ratio:.1}x the benchmark"));
    }
    let outcome = catch_unwind(AssertUnwindSafe(|| picard_solve(&dom, &large, &cfg)))
        .map_err(|_| "large-data solve panicked".to_string())?;
    match outcome {
        Err(SolveError::NotConverged { sigma, last_change, .. }) => Ok(format!(
            "benchmark residual {res:.2e}; data {ratio:.0}x larger stops at sigma {sigma} with change {last_change:.2e}"
        )),
        Ok(_) => Err("large-data run converged".into()),
        Err(e) => Err(format!("large-data run failed with {e}")),
    }
}

fn criterion_10(cases: &[Case]) -> Outcome {
    let mut jobs: Vec<(JobConfig, Mode)> = Vec::new();
    let mut bench = common::job(Domain::unit_disc(), &BENCHMARK, 0.25, H);
    jobs.push((bench.clone(), Mode::Solve));
    jobs.push((bench.clone(), Mode::Minimal));
    jobs.push((bench.clone(), Mode::Check));
    bench.flow = FlowConfig {
        dt: 0.05,
        t_final: 1.0,
        ..Default::default()
    };
    jobs.push((bench, Mode::Flow));
    let mut mms = common::job(Domain::unit_disc(), &["0.1*sin(x1)*sin(x2)"], 0.25, H);
    mms.mms.hs = vec![0.1, 0.05];
    jobs.push((mms, Mode::Mms));
    for c in cases {
        jobs.push((c.job(Mode::Solve, H), Mode::Solve));
    }
    for (job, mode) in &jobs {
        let a = runner::run(job, *mode);
        let b = runner::run(job, *mode);
        if a.report.to_json(true) != b.report.to_json(true) || a.artifacts != b.artifacts {
            return Err(format!("{mode} job {:?} differs between runs", job.name));
        }
    }
    Ok(format!("{} jobs byte-identical across two runs", jobs.len()))
}

fn main() -> ExitCode {
    let cases = hypothesis_set();
    let mut runs: Vec<Run> = Vec::new();
    let mut setup_error = None;
    for c in &cases {
        match solve_and_audit(c.name, &c.domain, &c.field(), c.kappa) {
            Ok(r) => runs.push(r),
            Err(e) => setup_error = Some(e),
        }
    }
    match solve_and_audit("benchmark", &Domain::unit_disc(), &benchmark(), 0.25) {
        Ok(r) => runs.push(r),
        Err(e) => setup_error = Some(e),
    }
    let shared = |f: &dyn Fn() -> Outcome| match &setup_error {
        Some(e) => Err(format!("setup failed: {e}")),
        None => f(),
    };

    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("manufactured-solution convergence", Box::new(criterion_1)),
        ("constant and affine exactness", Box::new(criterion_2)),
        (
            "hypothesis data converge with positive margin",
            Box::new(|| shared(&|| criterion_3(&runs))),
        ),
        ("barrier bound at every triple", Box::new(|| shared(&|| criterion_4(&runs)))),
        (
            "boundary gradient bound",
            Box::new(|| shared(&|| all_pass(&runs, &["boundary_gradient"], true))),
        ),
        (
            "det g maximum principle",
            Box::new(|| shared(&|| all_pass(&runs, &["detg_max_principle"], false))),
        ),
        ("subsolution inequality at kappa 0.95", Box::new(criterion_7)),
        ("mean curvature flow", Box::new(criterion_8)),
        ("minimal-graph mode", Box::new(criterion_9)),
        ("determinism", Box::new(|| criterion_10(&cases))),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
