use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use dcmip::dca::{run_scmip, run_smoothing_scmip, Mode, Status};
use dcmip::io::{write_trace, ProblemDoc};
use dcmip::verify::{run_suite, Suite};
use dcmip::{corpus, Error};
use serde_json::json;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_ITERATION_LIMIT: u8 = 4;
const EXIT_SUBPROBLEM: u8 = 5;

#[derive(Parser)]
#[command(name = "dcmip", version, about = "Mixed-integer DC programming solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Scmip,
    Smoothing,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Nogap,
    Toland,
    SmoothingProps,
    Descent,
    Subsolver,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file (or a bundled problem by name).
    Run {
        file: String,
        #[arg(long, value_enum, default_value = "scmip")]
        mode: ModeArg,
        /// Trace output (newline-delimited JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Starting point, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
        /// Weight of the proximal term added when h is not strongly convex.
        #[arg(long)]
        rho: Option<f64>,
        /// Smoothing decay factor in (0, 1).
        #[arg(long)]
        gamma: Option<f64>,
        /// Initial smoothing parameters for g and h, as `a,b`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        mu0: Option<Vec<f64>>,
        /// Outer iteration limit.
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Run a seeded randomized property suite.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Report output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a problem file.
    Validate { file: String },
    /// List bundled problems or print one.
    Corpus { name: Option<String> },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::Io(_) => EXIT_PARSE,
            Error::Subproblem(_) | Error::NodeLimit { .. } => EXIT_SUBPROBLEM,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: e.to_string(),
        }
    }
}

fn read_doc(file: &str) -> Result<ProblemDoc, Failure> {
    let path = Path::new(file);
    let text = if !path.exists() && corpus::text(file).is_some() {
        corpus::text(file).unwrap_or_default().to_string()
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure {
            code: EXIT_PARSE,
            message: format!("{file}: {e}"),
        })?
    };
    ProblemDoc::parse(&text).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("{file}: {e}"),
    })
}

fn print_json(v: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("JSON values serialize")
    );
}

#[allow(clippy::too_many_arguments)]
fn run(
    file: &str,
    mode: ModeArg,
    out: Option<PathBuf>,
    x0: Option<Vec<f64>>,
    rho: Option<f64>,
    gamma: Option<f64>,
    mu0: Option<Vec<f64>>,
    max_iter: Option<usize>,
) -> Result<u8, Failure> {
    let doc = read_doc(file)?;
    let p = doc.to_problem()?;
    let mode = match mode {
        ModeArg::Scmip => Mode::Scmip,
        ModeArg::Smoothing => Mode::Smoothing,
    };
    let mut cfg = doc.solver_config(mode);
    if let Some(x0) = x0 {
        cfg.x0 = Some(x0);
    }
    if let Some(r) = rho {
        cfg.rho = r;
    }
    if let Some(g) = gamma {
        cfg.gamma = g;
    }
    if let Some(m) = mu0 {
        let [a, b] = m[..] else {
            return Err(Failure {
                code: EXIT_VALIDATION,
                message: format!("--mu0 takes two values, got {}", m.len()),
            });
        };
        cfg.mu0 = [a, b];
    }
    if let Some(k) = max_iter {
        cfg.max_iter = k;
    }
    let start = Instant::now();
    let outcome = match mode {
        Mode::Scmip => run_scmip(&p, &cfg)?,
        Mode::Smoothing => run_smoothing_scmip(&p, &cfg)?,
    };
    let wall = start.elapsed().as_secs_f64();
    if let Some(path) = out {
        let mut w = BufWriter::new(File::create(&path)?);
        write_trace(&outcome.trace, &mut w)?;
        w.flush()?;
    }
    print_json(&json!({
        "problem": doc.name.clone().unwrap_or_else(|| file.to_string()),
        "mode": mode,
        "status": outcome.status,
        "x": outcome.x,
        "f": outcome.objective,
        "residual": outcome.residual,
        "iterations": outcome.trace.records.len(),
        "plateau_start": outcome.plateau_start,
        "message": outcome.trace.terminal.message,
        "wall_time_s": wall,
    }));
    Ok(match outcome.status {
        Status::Converged => 0,
        Status::IterationLimit => EXIT_ITERATION_LIMIT,
        Status::SubproblemFailure => EXIT_SUBPROBLEM,
    })
}

fn verify(suite: SuiteArg, seed: u64, count: usize, out: Option<PathBuf>) -> Result<u8, Failure> {
    let suite = match suite {
        SuiteArg::Nogap => Suite::Nogap,
        SuiteArg::Toland => Suite::Toland,
        SuiteArg::SmoothingProps => Suite::SmoothingProps,
        SuiteArg::Descent => Suite::Descent,
        SuiteArg::Subsolver => Suite::Subsolver,
    };
    let report = run_suite(suite, seed, count);
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    eprintln!(
        "{}: {} passed, {} failed",
        suite.name(),
        report.passed,
        report.failed
    );
    Ok(if report.all_passed() {
        0
    } else {
        EXIT_VERIFY_FAILED
    })
}

fn validate(file: &str) -> Result<u8, Failure> {
    let doc = read_doc(file)?;
    let p = doc.to_problem()?;
    let r = p.validate()?;
    print_json(&json!({
        "dimension": p.dim(),
        "integer": p.integers(),
        "relaxation_point": r.relaxation_point,
        "feasible_point": r.feasible_point,
        "tau_h": r.tau_h,
        "kappa_h": p.h().kappa_bound(),
        "warnings": r.warnings,
    }));
    Ok(0)
}

fn list_corpus(name: Option<String>) -> Result<u8, Failure> {
    match name {
        None => {
            for n in corpus::NAMES {
                println!("{n}");
            }
        }
        Some(n) => match corpus::text(&n) {
            Some(t) => print!("{t}"),
            None => {
                return Err(Failure {
                    code: EXIT_VALIDATION,
                    message: format!("no bundled problem named {n}"),
                })
            }
        },
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DCMIP_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            file,
            mode,
            out,
            x0,
            rho,
            gamma,
            mu0,
            max_iter,
        } => run(&file, mode, out, x0, rho, gamma, mu0, max_iter),
        Command::Verify {
            suite,
            seed,
            count,
            out,
        } => verify(suite, seed, count, out),
        Command::Validate { file } => validate(&file),
        Command::Corpus { name } => list_corpus(name),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            log::error!("{}", f.message);
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
