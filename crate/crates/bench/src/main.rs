use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand};
use simplex_qp::dopt::generate_design_data;
use simplex_qp::generator::{gen_projection_instance, gen_qp_instance, QpInstanceSpec};
use simplex_qp::io::{read_instance, write_instance, Instance, ProjectionInstance, QpInstance};
use simplex_qp::pnewton::{pn_solve_traced, PnConfig, QpSubsolver};
use simplex_qp::problem::relative_error;
use simplex_qp::proj::{proj_box, ssn_solve, SsnConfig};
use simplex_qp::vem::{vem_solve, TerminationRule, VemConfig};
use simplex_qp::{GeneralizedSimplex, StartPoint};

use qpbench::format::{OutputFormat, Table};
use qpbench::tables::{
    run_dopt_table, run_projection_table, run_qp_table, term_label, SolverKind,
};

#[derive(Clone, Copy, Debug)]
enum TermArg {
    Gap,
    Kkt,
}

impl FromStr for TermArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gap" => Ok(Self::Gap),
            "kkt" => Ok(Self::Kkt),
            other => Err(format!("unknown termination rule {other:?}; expected gap or kkt")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum SubsolverArg {
    Vem,
    Fw,
}

impl FromStr for SubsolverArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vem" => Ok(Self::Vem),
            "fw" => Ok(Self::Fw),
            other => Err(format!("unknown QP subsolver {other:?}; expected vem or fw")),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qpbench",
    about = "Instance generation and benchmark tables for the simplex-qp solvers",
    long_about = "Generates projection and QP instances, runs single solves with CSV \
                  reports, and renders the benchmark tables. Solvers start from the \
                  projection of the origin onto the feasible set. Exit code is 0 only \
                  when every in-run assertion passes."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a projection instance file.
    GenProj {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a box-constrained QP instance file with a planted optimum.
    GenQp {
        #[arg(long)]
        n: usize,
        /// Hessian spectral condition number, >= 1.
        #[arg(long)]
        cond: f64,
        /// Fraction of planted coordinates pinned to a bound, in (0, 1).
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project an instance's sample point onto its feasible set.
    SolveProj {
        #[arg(long)]
        instance: PathBuf,
        /// Stop once the dual derivative magnitude drops here.
        #[arg(long, default_value_t = 1e-12)]
        grad_tol: f64,
        /// CSV report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve a QP instance from the projected origin.
    SolveQp {
        #[arg(long)]
        instance: PathBuf,
        /// One of vem, pg, fista, fw.
        #[arg(long)]
        solver: SolverKind,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Exchange-method stopping rule: gap (exchange gap over ||Q||_F)
        /// or kkt (projected-gradient residual). Ignored by the baselines,
        /// which stop on iterate distance and residual checks.
        #[arg(long, default_value = "gap")]
        term: TermArg,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        /// CSV report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run projected Newton on a generated D-optimal design instance.
    Dopt {
        #[arg(long)]
        n: usize,
        /// Number of experiment rows, 1 <= p < n.
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inner QP subsolver: vem or fw.
        #[arg(long, default_value = "vem")]
        qp_solver: SubsolverArg,
        /// Stop once the Newton decrement drops here.
        #[arg(long, default_value_t = 1e-3)]
        lambda_stop: f64,
        /// CSV report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Projection accuracy and timing across instance sizes.
    ProjTable {
        #[arg(long, value_delimiter = ',', default_value = "100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Solver grid over condition numbers and pinned-coordinate ratios.
    QpTable {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1e2,1e4,1e6,1e8")]
        conds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8")]
        ratios: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "vem,pg,fista,fw")]
        solvers: Vec<SolverKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// D-optimal design runs with both QP subsolvers, p = n/10.
    DoptTable {
        #[arg(long, value_delimiter = ',', default_value = "1000")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in &failures {
                eprintln!("assertion failed: {f}");
            }
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<Vec<String>, Box<dyn std::error::Error>> {
    match command {
        Command::GenProj { n, seed, out } => {
            let (set, x0) = gen_projection_instance(n, seed)?;
            let instance = Instance::Projection(ProjectionInstance { set, x0, seed: Some(seed) });
            write_instance(&out, &instance)?;
            Ok(Vec::new())
        }
        Command::GenQp { n, cond, ratio, seed, out } => {
            let generated = gen_qp_instance(&QpInstanceSpec { n, cond, ratio, seed })?;
            write_instance(&out, &Instance::Qp(QpInstance::from_generated(&generated)))?;
            Ok(Vec::new())
        }
        Command::SolveProj { instance, grad_tol, report } => {
            solve_proj(&instance, grad_tol, report.as_deref())
        }
        Command::SolveQp { instance, solver, tol, term, max_iter, report } => {
            solve_qp(&instance, solver, tol, term, max_iter, report.as_deref())
        }
        Command::Dopt { n, p, seed, qp_solver, lambda_stop, report } => {
            run_dopt(n, p, seed, qp_solver, lambda_stop, report.as_deref())
        }
        Command::ProjTable { sizes, seed, out, format } => {
            let (table, failures) = run_projection_table(&sizes, seed)?;
            write_output(out.as_deref(), &table.render(format))?;
            Ok(failures)
        }
        Command::QpTable { n, conds, ratios, solvers, seed, out, format } => {
            let (grid, failures) = run_qp_table(n, &conds, &ratios, &solvers, seed)?;
            write_output(out.as_deref(), &grid.render(format))?;
            Ok(failures)
        }
        Command::DoptTable { ns, seed, out, format } => {
            let (table, failures) = run_dopt_table(&ns, seed)?;
            write_output(out.as_deref(), &table.render(format))?;
            Ok(failures)
        }
    }
}

fn solve_proj(
    path: &Path,
    grad_tol: f64,
    report: Option<&Path>,
) -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let Instance::Projection(inst) = read_instance(path)? else {
        return Err("instance file holds a QP, not a projection problem".into());
    };
    let cfg = SsnConfig { grad_tol, ..SsnConfig::default() };
    let clock = Instant::now();
    let (y, trace) = ssn_solve(&inst.x0, &inst.set, &cfg)?;
    let shifted: Vec<f64> = inst.x0.iter().map(|&v| v + y).collect();
    let x = proj_box(&shifted, inst.set.lower(), inst.set.upper())?;
    let elapsed = clock.elapsed();
    let violation = inst.set.budget_violation(&x).abs();

    let mut table = Table::new(["n", "iterations", "violation", "time_s"]);
    table.push_row([
        inst.set.dim().to_string(),
        trace.iterations.to_string(),
        format!("{violation:.3e}"),
        format!("{:.6}", elapsed.as_secs_f64()),
    ]);
    write_output(report, &table.to_csv())?;

    let tol = grad_tol.max(1e-12 * inst.set.b().abs().max(1.0));
    let mut failures = Vec::new();
    if !(violation <= tol) {
        failures.push(format!("projection violation {violation:.3e} exceeds {tol:.3e}"));
    }
    Ok(failures)
}

fn solve_qp(
    path: &Path,
    solver: SolverKind,
    tol: f64,
    term: TermArg,
    max_iter: usize,
    report: Option<&Path>,
) -> Result<Vec<String>, Box<dyn std::error::Error>> {
    use simplex_qp::baselines::{fista_solve, fw_solve, pg_solve, BaselineConfig};

    let Instance::Qp(inst) = read_instance(path)? else {
        return Err("instance file holds a projection problem, not a QP".into());
    };
    let n = inst.problem.dim();
    let start = StartPoint::Project(vec![0.0; n]);
    let solve_report = match solver {
        SolverKind::Vem => {
            let termination = match term {
                TermArg::Gap => TerminationRule::GapOverQNorm,
                TermArg::Kkt => TerminationRule::KktResidual,
            };
            let cfg = VemConfig { tol, max_iter, termination, ..VemConfig::default() };
            vem_solve(&inst.problem, start, &cfg)?
        }
        SolverKind::Pg | SolverKind::Fista | SolverKind::Fw => {
            let cfg = BaselineConfig { tol, max_iter, ..BaselineConfig::default() };
            match solver {
                SolverKind::Pg => pg_solve(&inst.problem, start, &cfg)?,
                SolverKind::Fista => fista_solve(&inst.problem, start, &cfg)?,
                _ => fw_solve(&inst.problem, start, &cfg)?,
            }
        }
    };

    let relerr = inst
        .planted
        .as_ref()
        .map(|p| relative_error(&solve_report.x, &p.xbar));
    let mut table = Table::new([
        "n",
        "solver",
        "iterations",
        "objective",
        "kkt_residual",
        "relerr",
        "time_s",
        "termination",
    ]);
    table.push_row([
        n.to_string(),
        solver.to_string(),
        solve_report.iterations.to_string(),
        format!("{:.12e}", solve_report.objective),
        format!("{:.3e}", solve_report.kkt_residual),
        relerr.map_or_else(String::new, |e| format!("{e:.3e}")),
        format!("{:.6}", solve_report.wall_time.as_secs_f64()),
        term_label(solve_report.termination).to_string(),
    ]);
    write_output(report, &table.to_csv())?;

    let mut failures = Vec::new();
    if !inst.problem.set().is_report_feasible(&solve_report.x) {
        failures.push("returned point violates the feasibility contract".to_string());
    }
    if !solve_report.objective.is_finite() || !solve_report.kkt_residual.is_finite() {
        failures.push("report carries a non-finite objective or residual".to_string());
    }
    Ok(failures)
}

fn run_dopt(
    n: usize,
    p: usize,
    seed: u64,
    qp_solver: SubsolverArg,
    lambda_stop: f64,
    report: Option<&Path>,
) -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let design = generate_design_data(n, p, seed)?;
    let set = GeneralizedSimplex::standard(n);
    let x0 = vec![1.0 / n as f64; n];
    let subsolver = match qp_solver {
        SubsolverArg::Vem => QpSubsolver::Vem,
        SubsolverArg::Fw => QpSubsolver::FrankWolfe,
    };
    let cfg = PnConfig { subsolver, lambda_stop, ..PnConfig::default() };
    let (solve_report, trace) = pn_solve_traced(&design, &x0, &set, &cfg)?;

    let mut table = Table::new([
        "n",
        "p",
        "qp_solver",
        "ttime_s",
        "qptime_s",
        "lambda",
        "outer_iterations",
        "objective",
    ]);
    table.push_row([
        n.to_string(),
        p.to_string(),
        match qp_solver {
            SubsolverArg::Vem => "vem".to_string(),
            SubsolverArg::Fw => "fw".to_string(),
        },
        format!("{:.6}", solve_report.wall_time.as_secs_f64()),
        format!("{:.6}", trace.qp_time.as_secs_f64()),
        format!("{:.3e}", trace.final_lambda),
        trace.outer_iterations.to_string(),
        format!("{:.12e}", solve_report.objective),
    ]);
    write_output(report, &table.to_csv())?;

    let mut failures = Vec::new();
    if !(trace.final_lambda <= lambda_stop) {
        failures.push(format!(
            "terminal decrement {:.3e} above stop value {lambda_stop:.1e}",
            trace.final_lambda
        ));
    }
    Ok(failures)
}

fn write_output(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
