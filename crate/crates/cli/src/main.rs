//! `vpx`: solve, certify and cross-check best uniform approximation
//! problems described by JSON problem files.

mod problem_file;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vpx_core::oracle::lp_minimax;
use vpx_core::solver::{certify_optimality, default_certify_tol, CertifyOutcome};
use vpx_core::{
    deviation_profile, solve_minimax, CoefficientVector, Problem, SingularityPolicy, SolveStatus,
    SolverError,
};

use problem_file::{
    build_problem, check_coefficients, solve_options, CoefficientsFile, Overrides, ProblemFile,
};

#[derive(Parser)]
#[command(name = "vpx", version, about = "best uniform approximation on finite point sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exchange solver and report coefficients, deviation and
    /// certificate.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the same problem as a linear program (reference route).
    Oracle {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a coefficient vector for optimality and print the certificate.
    Certify {
        problem: PathBuf,
        /// JSON file with a "coefficients" array; solve reports work as is.
        coefficients: PathBuf,
        /// Certification tolerance (default derived from the solve default).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve each problem by both routes and print a comparison table.
    Compare {
        problems: Vec<PathBuf>,
        #[command(flatten)]
        flags: SolveFlags,
    },
}

#[derive(Args)]
struct SolveFlags {
    /// Termination tolerance on the deviation comparison.
    #[arg(long)]
    tol: Option<f64>,
    /// Exchange step budget.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Seed for singularity-recovery randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// What to do when a working basis turns out singular.
    #[arg(long = "singular-policy", value_enum)]
    singular_policy: Option<PolicyArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Fail,
    Retry,
}

impl SolveFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            singular_policy: self.singular_policy.map(|p| match p {
                PolicyArg::Fail => SingularityPolicy::Fail,
                PolicyArg::Retry => SingularityPolicy::PerturbRetry,
            }),
        }
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { problem, flags, out } => cmd_solve(&problem, &flags, out.as_deref()),
        Command::Oracle { problem, out } => cmd_oracle(&problem, out.as_deref()),
        Command::Certify {
            problem,
            coefficients,
            tol,
            out,
        } => cmd_certify(&problem, &coefficients, tol, out.as_deref()),
        Command::Compare { problems, flags } => cmd_compare(&problems, &flags),
    }
}

fn load_problem(path: &Path) -> Result<(ProblemFile, Problem), String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let file: ProblemFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let problem = build_problem(&file).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((file, problem))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(path: &Path, flags: &SolveFlags, out: Option<&Path>) -> i32 {
    let (file, problem) = match load_problem(path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let opts = solve_options(&file.options, &flags.overrides());
    match solve_minimax(&problem, &opts) {
        Ok(result) => {
            let text = report::render(&report::solve_report(&result));
            if let Err(e) = emit(&text, out) {
                eprintln!("{e}");
                return 1;
            }
            match result.status {
                SolveStatus::OptimalCertified => 0,
                SolveStatus::IterationLimit => 2,
                SolveStatus::SingularBasis => 3,
            }
        }
        Err(SolverError::InsufficientPoints { needed, available }) => {
            eprintln!(
                "{}: needs at least {needed} grid points, found {available}",
                path.display()
            );
            1
        }
        Err(e @ SolverError::SingularBasis { .. }) => {
            eprintln!("{}: {e}", path.display());
            3
        }
    }
}

fn cmd_oracle(path: &Path, out: Option<&Path>) -> i32 {
    let (_, problem) = match load_problem(path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    match lp_minimax(problem.domain(), problem.family()) {
        Ok((coefficients, sigma)) => {
            let text = report::render(&report::oracle_report(&coefficients.a, sigma));
            if let Err(e) = emit(&text, out) {
                eprintln!("{e}");
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            3
        }
    }
}

fn cmd_certify(path: &Path, coeff_path: &Path, tol: Option<f64>, out: Option<&Path>) -> i32 {
    let (file, problem) = match load_problem(path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let coeff_text = match fs::read_to_string(coeff_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", coeff_path.display());
            return 1;
        }
    };
    let coeffs: CoefficientsFile = match serde_json::from_str(&coeff_text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", coeff_path.display());
            return 1;
        }
    };
    if let Err(e) = check_coefficients(&problem, &coeffs.coefficients) {
        eprintln!("{}: {e}", coeff_path.display());
        return 1;
    }
    let tol = tol.unwrap_or_else(|| {
        default_certify_tol(file.options.tol.unwrap_or(1e-9))
    });
    let cv = CoefficientVector::new(coeffs.coefficients.clone());
    let profile = deviation_profile(&cv, &problem);
    let outcome = certify_optimality(&cv, &problem, tol);
    let text = report::render(&report::certify_report(
        &coeffs.coefficients,
        profile.max_abs,
        &outcome,
    ));
    if let Err(e) = emit(&text, out) {
        eprintln!("{e}");
        return 1;
    }
    match outcome {
        CertifyOutcome::Certified(_) => 0,
        CertifyOutcome::Refused(_) => 2,
    }
}

fn cmd_compare(paths: &[PathBuf], flags: &SolveFlags) -> i32 {
    println!(
        "{:<24} {:>18} {:>18} {:>10} {:>6} {:>9}  status",
        "problem", "solver sigma", "oracle sigma", "|delta|", "iters", "ms"
    );
    for path in paths {
        let (file, problem) = match load_problem(path) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("{e}");
                return 1;
            }
        };
        let opts = solve_options(&file.options, &flags.overrides());
        let started = Instant::now();
        let solved = solve_minimax(&problem, &opts);
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        let oracle = lp_minimax(problem.domain(), problem.family());
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let (solver_sigma, iters, status) = match &solved {
            Ok(r) => (
                Some(r.sigma),
                r.iterations.len(),
                report::status_name(r.status).to_string(),
            ),
            Err(e) => {
                let status = match e {
                    SolverError::SingularBasis { .. } => "singular-basis".to_string(),
                    SolverError::InsufficientPoints { .. } => "insufficient-points".to_string(),
                };
                (None, 0, status)
            }
        };
        let oracle_sigma = oracle.as_ref().ok().map(|(_, s)| *s);
        let delta = match (solver_sigma, oracle_sigma) {
            (Some(a), Some(b)) => format!("{:.3e}", (a - b).abs()),
            _ => "-".to_string(),
        };
        let fmt_sigma = |s: Option<f64>| match s {
            Some(v) => format!("{v:.12e}"),
            None => "-".to_string(),
        };
        println!(
            "{:<24} {:>18} {:>18} {:>10} {:>6} {:>9.1}  {}",
            name,
            fmt_sigma(solver_sigma),
            fmt_sigma(oracle_sigma),
            delta,
            iters,
            elapsed_ms,
            status
        );
    }
    0
}
