use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use maxgraph::runner::{self, JobConfig, Mode, RunReport, EXIT_CONFIG, EXIT_OK};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Solve,
    Flow,
    Check,
    Mms,
    Minimal,
    Sweep,
}

/// Spacelike maximal graphs and their mean curvature flow.
#[derive(Parser, Debug)]
#[command(name = "maxgraph", version)]
struct Args {
    mode: Cmd,
    /// JSON job file (an array of jobs for `sweep`)
    #[arg(long)]
    config: PathBuf,
    /// output directory; the report is printed to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// zero all timings so reruns are byte-identical
    #[arg(long)]
    canonical: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.mode {
        Cmd::Sweep => sweep(&args),
        Cmd::Solve => single(&args, Mode::Solve),
        Cmd::Flow => single(&args, Mode::Flow),
        Cmd::Check => single(&args, Mode::Check),
        Cmd::Mms => single(&args, Mode::Mms),
        Cmd::Minimal => single(&args, Mode::Minimal),
    };
    ExitCode::from(code as u8)
}

fn single(args: &Args, mode: Mode) -> i32 {
    let parsed = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))
        .and_then(|text| JobConfig::from_json(&text));
    let outcome = match parsed {
        Ok(job) => {
            let out = runner::run(&job, mode);
            let dir = args.out.clone().or(job.output.clone());
            (out, dir)
        }
        Err(msg) => (
            runner::RunOutcome {
                report: RunReport::config_error(mode.as_str(), msg),
                artifacts: Vec::new(),
            },
            args.out.clone(),
        ),
    };
    let (out, dir) = outcome;
    match dir {
        Some(dir) => {
            if let Err(e) = out.write_to(&dir, args.canonical) {
                eprintln!("maxgraph: cannot write {}: {e}", dir.display());
                return EXIT_CONFIG;
            }
            let r = &out.report;
            println!(
                "{}: exit {} converged={} audits {}/{}{}",
                r.mode,
                r.exit_code,
                r.converged,
                r.audits_passed(),
                r.audits.len(),
                r.error.as_ref().map_or(String::new(), |e| format!(" error: {e}"))
            );
        }
        None => print!("{}", out.report.to_json(args.canonical)),
    }
    out.exit_code()
}

fn sweep(args: &Args) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("maxgraph: cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let jobs = match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(serde_json::Value::Array(jobs)) => jobs,
        Ok(_) => {
            eprintln!("maxgraph: a sweep config must be a JSON array of jobs");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("maxgraph: config: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = runner::sweep(&jobs);
    match &args.out {
        Some(dir) => {
            if let Err(e) = out.write_to(dir, args.canonical) {
                eprintln!("maxgraph: cannot write {}: {e}", dir.display());
                return EXIT_CONFIG;
            }
        }
        None => print!("{}", out.summary_csv()),
    }
    EXIT_OK
}
