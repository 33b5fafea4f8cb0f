//! Batch front end: job configuration, mode dispatch, reports and exit codes.
//!
//! A run never touches the filesystem; it returns the report and the
//! artifacts (CSV dumps) as strings, and [`RunOutcome::write_to`] persists
//! them. Exit codes: 0 success, 2 audit failure, 3 non-convergence, 4
//! configuration error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::Domain;
use crate::estimates::{
    data_sups, default_resolution, run_audits, AuditConfig, AuditEntry, AuditInput, HypothesisCheck, Relation,
};
use crate::expr::ExprField;
use crate::flow::{flow_run, FlowConfig, FlowError};
use crate::function::VectorFunction;
use crate::geometry::Signature;
use crate::solver::{manufactured_solution_check, picard_solve, picard_solve_on, sample, SolveError, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Flow,
    Check,
    Mms,
    Minimal,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Flow => "flow",
            Mode::Check => "check",
            Mode::Mms => "mms",
            Mode::Minimal => "minimal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solve" => Ok(Mode::Solve),
            "flow" => Ok(Mode::Flow),
            "check" => Ok(Mode::Check),
            "mms" => Ok(Mode::Mms),
            "minimal" => Ok(Mode::Minimal),
            _ => Err(format!("unknown mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmsConfig {
    pub hs: Vec<f64>,
    pub min_order: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        MmsConfig {
            hs: vec![0.1, 0.05, 0.025],
            min_order: 1.8,
        }
    }
}

/// One job. `phi` holds `n` expressions in `x1..xm` (and `t` for flows);
/// in `mms` mode it is the manufactured solution. `kappa` and `h`, when
/// given, override the values inside `solver` and `flow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub mode: Option<Mode>,
    pub domain: Domain,
    pub m: usize,
    pub n: usize,
    pub phi: Vec<String>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub mms: MmsConfig,
    /// Flow mode: also solve the elliptic problem and report the distance.
    #[serde(default)]
    pub compare_elliptic: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(self.solver.kappa)
    }

    pub fn solver_config(&self, mode: Mode) -> SolverConfig {
        let mut c = self.solver.clone();
        if let Some(k) = self.kappa {
            c.kappa = k;
        }
        if let Some(h) = self.h {
            c.h = h;
        }
        match mode {
            Mode::Minimal => c.signature = Signature::Euclidean,
            Mode::Solve | Mode::Flow | Mode::Check => c.signature = Signature::SemiEuclidean,
            Mode::Mms => {}
        }
        c
    }

    pub fn flow_config(&self) -> FlowConfig {
        let mut c = self.flow.clone();
        if let Some(k) = self.kappa {
            c.kappa = k;
        }
        if let Some(h) = self.h {
            c.h = h;
        }
        c
    }

    fn validate(&self) -> Result<ExprField, String> {
        self.domain.validate().map_err(|e| e.to_string())?;
        if self.domain.dim() != self.m {
            return Err(format!("m = {} but the domain has dimension {}", self.m, self.domain.dim()));
        }
        if self.n == 0 {
            return Err("n must be at least 1".into());
        }
        ExprField::parse_n(self.m, self.n, &self.phi).map_err(|e| format!("phi: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub pass: bool,
    pub margin: Option<f64>,
}

impl HypothesisSummary {
    fn unavailable() -> Self {
        HypothesisSummary {
            lhs: None,
            rhs: None,
            pass: false,
            margin: None,
        }
    }

    fn of(lhs: f64, rhs: f64, pass: bool) -> Self {
        HypothesisSummary {
            lhs: Some(lhs),
            rhs: Some(rhs),
            pass,
            margin: Some(rhs - lhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub m: usize,
    pub n: usize,
    pub domain: Option<Domain>,
    pub kappa: Option<f64>,
    pub hypothesis: HypothesisSummary,
    pub converged: bool,
    pub iterations: usize,
    pub final_sup_slope_sq: Option<f64>,
    pub final_residual: Option<f64>,
    pub audits: Vec<AuditEntry>,
    pub wall_seconds: f64,
    pub exit_code: i32,
    pub error: Option<String>,
    pub details: Value,
}

impl RunReport {
    fn empty(mode: &str) -> Self {
        RunReport {
            mode: mode.to_string(),
            m: 0,
            n: 0,
            domain: None,
            kappa: None,
            hypothesis: HypothesisSummary::unavailable(),
            converged: false,
            iterations: 0,
            final_sup_slope_sq: None,
            final_residual: None,
            audits: Vec::new(),
            wall_seconds: 0.0,
            exit_code: EXIT_CONFIG,
            error: None,
            details: Value::Null,
        }
    }

    /// A report for a job that could not be configured.
    pub fn config_error(mode: &str, msg: impl Into<String>) -> Self {
        RunReport {
            error: Some(msg.into()),
            ..Self::empty(mode)
        }
    }

    pub fn audits_passed(&self) -> usize {
        self.audits.iter().filter(|a| a.pass).count()
    }

    /// Pretty JSON; with `canonical` every `wall_seconds` is zeroed.
    pub fn to_json(&self, canonical: bool) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if canonical {
            zero_timings(&mut v);
        }
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}

fn zero_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for (k, x) in map.iter_mut() {
                if k == "wall_seconds" {
                    *x = json!(0.0);
                } else {
                    zero_timings(x);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(zero_timings),
        _ => {}
    }
}

/// A report plus named text artifacts.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub artifacts: Vec<(String, String)>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }

    /// Writes `report.json` and every artifact into `dir`.
    pub fn write_to(&self, dir: &Path, canonical: bool) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json(canonical))?;
        for (name, text) in &self.artifacts {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

fn exit_for_audits(audits: &[AuditEntry]) -> i32 {
    if audits.iter().any(AuditEntry::is_failure) {
        EXIT_AUDIT
    } else {
        EXIT_OK
    }
}

fn field_csv(grid: &crate::grid::DomainGrid, u: &crate::grid::VectorField) -> String {
    let mut buf = Vec::new();
    grid.write_csv(u, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Runs one job in the given mode (the job's own `mode` is ignored).
pub fn run(job: &JobConfig, mode: Mode) -> RunOutcome {
    let clock = Instant::now();
    let mut out = match job.validate() {
        Err(msg) => RunOutcome {
            report: RunReport::config_error(mode.as_str(), msg),
            artifacts: Vec::new(),
        },
        Ok(phi) => {
            let mut report = RunReport::empty(mode.as_str());
            report.m = job.m;
            report.n = job.n;
            report.domain = Some(job.domain.clone());
            report.kappa = Some(match mode {
                Mode::Flow => job.flow_config().kappa,
                _ => job.solver_config(mode).kappa,
            });
            let mut artifacts = Vec::new();
            match mode {
                Mode::Solve | Mode::Minimal => run_solve(job, mode, &phi, &mut report, &mut artifacts),
                Mode::Check => run_check(job, &phi, &mut report),
                Mode::Flow => run_flow(job, &phi, &mut report, &mut artifacts),
                Mode::Mms => run_mms(job, &phi, &mut report, &mut artifacts),
            }
            RunOutcome { report, artifacts }
        }
    };
    out.report.wall_seconds = clock.elapsed().as_secs_f64();
    out
}

fn hypothesis_check(job: &JobConfig, phi: &dyn VectorFunction, kappa: f64) -> HypothesisCheck {
    let m = job.domain.dim();
    let sups = data_sups(phi, &job.domain, 0.0, default_resolution(m), job.seed);
    HypothesisCheck::from_sups(m, kappa, job.domain.diameter(), sups)
}

fn solve_error_code(e: &SolveError) -> i32 {
    match e {
        SolveError::Config(_) | SolveError::Grid(_) => EXIT_CONFIG,
        SolveError::NotConverged { .. } | SolveError::Operator(_) => EXIT_NOT_CONVERGED,
    }
}

fn run_solve(job: &JobConfig, mode: Mode, phi: &ExprField, report: &mut RunReport, artifacts: &mut Vec<(String, String)>) {
    let cfg = job.solver_config(mode);
    let hyp = hypothesis_check(job, phi, cfg.kappa);
    report.hypothesis = HypothesisSummary::of(hyp.lhs, hyp.rhs, hyp.pass);
    match picard_solve(&job.domain, phi, &cfg) {
        Ok(sol) => {
            let r = &sol.report;
            report.converged = true;
            report.iterations = r.iterations();
            report.final_sup_slope_sq = Some(r.final_sup_slope_sq);
            report.final_residual = Some(r.final_residual);
            report.audits = match cfg.signature {
                Signature::SemiEuclidean => {
                    let phi_grid = sample(&sol.grid, phi, 0.0);
                    let input = AuditInput {
                        grid: &sol.grid,
                        u: &sol.u,
                        phi: &phi_grid,
                        kappa: cfg.kappa,
                        sups: hyp.sups,
                        residual: r.final_residual,
                    };
                    run_audits(&input, &job.audit).unwrap_or_else(|e| {
                        vec![AuditEntry::compare("audit_suite", 0.0, Relation::AtLeast, 1.0, 0.0).with_note(e.to_string())]
                    })
                }
                Signature::Euclidean => vec![AuditEntry::compare(
                    "mean_curvature_residual",
                    r.final_residual,
                    Relation::AtMost,
                    job.audit.residual_tol,
                    0.0,
                )],
            };
            report.exit_code = exit_for_audits(&report.audits);
            report.details = json!({
                "grid": { "h": sol.grid.h(), "unknowns": sol.grid.len(), "boundary_nodes": sol.grid.boundary_len() },
                "solver": r,
                "hypothesis": hyp,
            });
            artifacts.push(("solution.csv".into(), field_csv(&sol.grid, &sol.u)));
        }
        Err(e) => {
            report.exit_code = solve_error_code(&e);
            report.error = Some(e.to_string());
            if let SolveError::NotConverged { report: r, .. } = &e {
                report.iterations = r.iterations();
                report.final_sup_slope_sq = Some(r.final_sup_slope_sq);
                report.final_residual = Some(r.final_residual);
                report.details = json!({ "solver": r, "hypothesis": hyp });
            } else {
                report.details = json!({ "hypothesis": hyp });
            }
        }
    }
}

fn run_check(job: &JobConfig, phi: &ExprField, report: &mut RunReport) {
    let kappa = job.kappa();
    let hyp = hypothesis_check(job, phi, kappa);
    report.hypothesis = HypothesisSummary::of(hyp.lhs, hyp.rhs, hyp.pass);
    report.converged = true;
    report.final_sup_slope_sq = Some(hyp.sups.gradient_sq);
    report.audits = vec![
        AuditEntry::compare("hypothesis", hyp.lhs, Relation::Below, hyp.rhs, 0.0),
        AuditEntry::compare("data_slope", hyp.sups.gradient_sq, Relation::AtMost, 1.0 - kappa, 0.0),
    ];
    report.exit_code = exit_for_audits(&report.audits);
    report.details = json!({ "hypothesis": hyp });
}

fn run_flow(job: &JobConfig, phi: &ExprField, report: &mut RunReport, artifacts: &mut Vec<(String, String)>) {
    let cfg = job.flow_config();
    match flow_run(&job.domain, phi, &cfg, &job.audit) {
        Ok(mut out) => {
            if let Some(h) = &out.hypothesis {
                report.hypothesis = HypothesisSummary::of(h.lhs, h.rhs, h.pass);
            }
            report.converged = true;
            report.iterations = out.steps;
            report.final_sup_slope_sq = Some(out.state.sup_slope_sq);
            report.final_residual = out.trajectory.last().map(|r| r.residual);
            if job.compare_elliptic {
                let scfg = SolverConfig {
                    kappa: cfg.kappa,
                    h: cfg.h,
                    ..job.solver.clone()
                };
                let data = sample(&out.grid, phi, cfg.t_final);
                let entry = match picard_solve_on(&out.grid, &data, None, &scfg) {
                    Ok((u, _)) => AuditEntry::diagnostic(
                        "flow_elliptic_distance",
                        out.state.u.max_abs_diff(&u),
                        "exploratory: sup |u(T) - u_elliptic| against a maximal solve on the same grid",
                    ),
                    Err(e) => AuditEntry::diagnostic(
                        "flow_elliptic_distance",
                        f64::NAN,
                        &format!("exploratory: elliptic solve failed: {e}"),
                    ),
                };
                out.audits.push(entry);
            }
            report.audits = out.audits.clone();
            report.exit_code = exit_for_audits(&report.audits);
            report.details = json!({
                "grid": { "h": out.grid.h(), "unknowns": out.grid.len(), "boundary_nodes": out.grid.boundary_len() },
                "flow": cfg,
                "parabolic_hypothesis": out.hypothesis,
                "t_final": out.state.t,
                "min_sqrt_detg": out.state.min_sqrt_detg,
            });
            let mut traj = Vec::new();
            out.write_trajectory(&mut traj).expect("writing to memory");
            artifacts.push(("trajectory.csv".into(), String::from_utf8(traj).expect("ascii output")));
            artifacts.push(("final.csv".into(), field_csv(&out.grid, &out.state.u)));
        }
        Err(FlowError::SpacelikeLost { t, point, partial }) => {
            report.exit_code = EXIT_NOT_CONVERGED;
            report.error = Some(format!("graph stopped being spacelike at t = {t} near {point:?}"));
            report.iterations = partial.steps;
            report.final_sup_slope_sq = Some(partial.state.sup_slope_sq);
            if let Some(h) = &partial.hypothesis {
                report.hypothesis = HypothesisSummary::of(h.lhs, h.rhs, h.pass);
            }
            let mut traj = Vec::new();
            partial.write_trajectory(&mut traj).expect("writing to memory");
            artifacts.push(("trajectory.csv".into(), String::from_utf8(traj).expect("ascii output")));
        }
        Err(e @ (FlowError::Config(_) | FlowError::Grid(_) | FlowError::StepRejected { .. })) => {
            report.exit_code = EXIT_CONFIG;
            report.error = Some(e.to_string());
        }
        Err(e @ FlowError::Operator(_)) => {
            report.exit_code = EXIT_NOT_CONVERGED;
            report.error = Some(e.to_string());
        }
    }
}

fn run_mms(job: &JobConfig, u_star: &ExprField, report: &mut RunReport, artifacts: &mut Vec<(String, String)>) {
    let cfg = job.solver_config(Mode::Mms);
    let hyp = hypothesis_check(job, u_star, cfg.kappa);
    report.hypothesis = HypothesisSummary::of(hyp.lhs, hyp.rhs, hyp.pass);
    report.final_sup_slope_sq = Some(hyp.sups.gradient_sq);
    match manufactured_solution_check(&job.domain, u_star, &cfg, &job.mms.hs) {
        Ok(rows) => {
            report.converged = rows.iter().all(|r| r.converged);
            report.iterations = rows.iter().map(|r| r.iterations).sum();
            let min_order = rows.iter().filter_map(|r| r.order).fold(f64::INFINITY, f64::min);
            let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
            // an exactly reproduced solution has no measurable order
            let entry = if max_error <= 1e-10 {
                AuditEntry::compare("mms_error", max_error, Relation::AtMost, 1e-10, 0.0)
            } else {
                AuditEntry::compare("mms_order", min_order, Relation::AtLeast, job.mms.min_order, 0.0)
            };
            report.audits = vec![entry];
            report.exit_code = exit_for_audits(&report.audits);
            let mut csv = String::from("h,unknowns,error,order\n");
            for r in &rows {
                let order = r.order.map_or(String::new(), |o| format!("{o:.16e}"));
                csv.push_str(&format!("{:.16e},{},{:.16e},{}\n", r.h, r.unknowns, r.error, order));
            }
            artifacts.push(("convergence.csv".into(), csv));
            report.details = json!({ "table": rows, "hypothesis": hyp });
        }
        Err(e) => {
            report.exit_code = solve_error_code(&e);
            report.error = Some(e.to_string());
        }
    }
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub job: usize,
    pub name: Option<String>,
    pub mode: Option<String>,
    pub kappa: Option<f64>,
    pub hypothesis_margin: Option<f64>,
    pub converged: bool,
    pub final_sup_slope_sq: Option<f64>,
    pub audits_passed: usize,
    pub audits_total: usize,
    pub exit_code: i32,
    pub error: Option<String>,
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<RunOutcome>,
}

impl SweepOutcome {
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "job",
            "name",
            "mode",
            "kappa",
            "hypothesis_margin",
            "converged",
            "final_sup_slope_sq",
            "audits_passed",
            "audits_total",
            "exit_code",
            "error",
        ])
        .expect("writing to memory");
        let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        for r in &self.rows {
            w.write_record([
                r.job.to_string(),
                r.name.clone().unwrap_or_default(),
                r.mode.clone().unwrap_or_default(),
                num(r.kappa),
                num(r.hypothesis_margin),
                r.converged.to_string(),
                num(r.final_sup_slope_sq),
                r.audits_passed.to_string(),
                r.audits_total.to_string(),
                r.exit_code.to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 fields")
    }

    /// Writes `summary.csv` and each job's outputs under `job_<i>/`.
    pub fn write_to(&self, dir: &Path, canonical: bool) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        for (i, o) in self.outcomes.iter().enumerate() {
            o.write_to(&dir.join(format!("job_{i}")), canonical)?;
        }
        Ok(())
    }
}

/// Runs every job independently; a malformed job becomes an error row.
pub fn sweep(jobs: &[Value]) -> SweepOutcome {
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|v| {
            let mode_hint = v.get("mode").and_then(Value::as_str).unwrap_or("unknown").to_string();
            match serde_json::from_value::<JobConfig>(v.clone()) {
                Err(e) => RunOutcome {
                    report: RunReport::config_error(&mode_hint, format!("config: {e}")),
                    artifacts: Vec::new(),
                },
                Ok(job) => match job.mode {
                    Some(mode) => run(&job, mode),
                    None => RunOutcome {
                        report: RunReport::config_error(&mode_hint, "sweep jobs need a 'mode' field"),
                        artifacts: Vec::new(),
                    },
                },
            }
        })
        .collect();
    let rows = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let r = &o.report;
            SweepRow {
                job: i,
                name: jobs[i].get("name").and_then(Value::as_str).map(str::to_string),
                mode: (r.mode != "unknown").then(|| r.mode.clone()),
                kappa: r.kappa,
                hypothesis_margin: r.hypothesis.margin,
                converged: r.converged,
                final_sup_slope_sq: r.final_sup_slope_sq,
                audits_passed: r.audits_passed(),
                audits_total: r.audits.len(),
                exit_code: r.exit_code,
                error: r.error.clone(),
            }
        })
        .collect();
    SweepOutcome { rows, outcomes }
}
