mod commands;
mod problem;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lyapcert::moments::CertificateConstants;
use serde_json::{json, Value};
use thiserror::Error;

use problem::{Kind, ProblemFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown kind `{0}` (expected one of {kinds})", kinds = problem::KINDS.join(", "))]
    UnknownKind(String),
    #[error("{kind} problem is missing `{field}`")]
    MissingField { kind: Kind, field: String },
    #[error("cannot parse `{field}`: {message}")]
    BadExpression { field: String, message: String },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Invalid(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("rejected: {0}")]
    Rejected(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Rejected(_) => 2,
            _ => 1,
        }
    }
}

/// Lyapunov-condition checks and Gaussian-integrability certificates.
#[derive(Debug, Parser)]
#[command(name = "lyapcert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write a CSV table here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the condition for a problem file and certify each δ.
    Certify {
        #[arg(long)]
        problem: PathBuf,
        /// Overrides the δ values of the problem file.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Moment bounds from constants.
    Moments {
        #[arg(long, requires = "b", conflicts_with_all = ["lambda1p", "lambda2p"])]
        c: Option<f64>,
        #[arg(long, requires = "c")]
        b: Option<f64>,
        #[arg(long, requires = "lambda2p")]
        lambda1p: Option<f64>,
        #[arg(long, requires = "lambda1p")]
        lambda2p: Option<f64>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        delta: Option<f64>,
        /// Problem file whose measure supplies oracle moments.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Oracle value of the Gaussian integral for a problem file.
    Integrate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 400_000)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Gaussian series of a jump problem.
    Series {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        stride: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Optimal δ over the free parameter of the Gozlan constants.
    OptimizeGozlan {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        a: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Finite-difference audit of random expressions, or re-validation of a report.
    Audit {
        #[arg(long, conflicts_with_all = ["seed", "count"])]
        report: Option<PathBuf>,
        /// Required for the random audit.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[command(flatten)]
        output: Output,
    },
}

fn emit(json: &Value, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => report::write_json(path, json),
        None => {
            let mut text = serde_json::to_string_pretty(json).map_err(|e| CliError::Io(e.to_string()))?;
            text.push('\n');
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn status(accepted: bool, summary: &str) -> u8 {
    eprintln!("{summary}");
    if accepted {
        0
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Certify {
            problem,
            delta,
            seed,
            output,
        } => {
            let pf = ProblemFile::load(&problem)?;
            let report = commands::certify_problem(pf, &delta, seed)?;
            emit(&report::to_value(&report), &output.out)?;
            if let Some(path) = &output.csv {
                let rows: Vec<_> = report
                    .certificate
                    .deltas
                    .iter()
                    .map(|d| {
                        json!({
                            "delta": d.delta,
                            "accepted": d.accepted,
                            "exp_bound": d.exp_bound.as_ref().map(|b| b.value),
                            "ln_exp_bound": d.ln_exp_bound.as_ref().map(|b| b.value),
                        })
                    })
                    .collect();
                let rows: Vec<CertRow> = rows.into_iter().map(|v| serde_json::from_value(v).unwrap()).collect();
                report::write_csv(path, &rows)?;
            }
            let mut summary = format!("{}: {}", report.problem.kind, if report.accepted() { "accepted" } else { "rejected" });
            for r in &report.certificate.reasons {
                summary.push_str(&format!("\n  {r}"));
            }
            for d in &report.certificate.deltas {
                summary.push_str(&format!(
                    "\n  delta = {}: {}{}",
                    d.delta,
                    if d.accepted { "accepted" } else { "rejected" },
                    match (&d.exp_bound, &d.ln_exp_bound) {
                        (Some(b), _) if b.value.is_finite() => format!(", bound {}", b.value),
                        (_, Some(l)) => format!(", bound exp({})", l.value),
                        _ => String::new(),
                    }
                ));
                for r in &d.reasons {
                    summary.push_str(&format!("\n    {r}"));
                }
            }
            Ok(status(report.accepted(), &summary))
        }
        Command::Moments {
            c,
            b,
            lambda1p,
            lambda2p,
            n,
            delta,
            problem,
            output,
        } => {
            let constants = match (c, b, lambda1p, lambda2p) {
                (Some(c), Some(b), None, None) => CertificateConstants::Lyapunov { c, b },
                (None, None, Some(l1), Some(l2)) => CertificateConstants::Gozlan {
                    lambda1p: l1,
                    lambda2p: l2,
                },
                _ => return Err(CliError::Usage("give --c and --b, or --lambda1p and --lambda2p".into())),
            };
            let pf = problem.as_deref().map(ProblemFile::load).transpose()?;
            let (rows, cert) = commands::moments_table(constants, n, delta, pf.as_ref())?;
            if let Some(path) = &output.csv {
                report::write_csv(path, &rows)?;
            }
            emit(&json!({ "constants": constants, "bounds": rows, "certificate": cert }), &output.out)?;
            Ok(status(true, &format!("{} moment bounds", rows.len())))
        }
        Command::Integrate {
            problem,
            delta,
            seed,
            steps,
            output,
        } => {
            let pf = ProblemFile::load(&problem)?;
            let r = commands::integrate(&pf, delta, seed.or(pf.seed), steps)?;
            emit(&report::to_value(&r), &output.out)?;
            Ok(status(r.is_finite(), &format!("{:?}: {}", r.verdict, r.value)))
        }
        Command::Series {
            problem,
            delta,
            stride,
            output,
        } => {
            let pf = ProblemFile::load(&problem)?;
            let o = commands::series(&pf, delta, output.csv.as_deref(), stride)?;
            emit(&o.json, &output.out)?;
            Ok(status(o.accepted, &o.summary))
        }
        Command::OptimizeGozlan { m, a, output } => {
            let o = commands::optimize_gozlan(m, a, output.csv.as_deref())?;
            emit(&o.json, &output.out)?;
            Ok(status(o.accepted, &o.summary))
        }
        Command::Audit {
            report: Some(path),
            output,
            ..
        } => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let value: Value =
                serde_json::from_str(&text).map_err(|e| CliError::MalformedJson(format!("{}: {e}", path.display())))?;
            let (same, msg) = commands::revalidate(&value)?;
            emit(&json!({ "reproduced": same, "summary": msg }), &output.out)?;
            Ok(status(same, &msg))
        }
        Command::Audit {
            report: None,
            seed,
            count,
            m,
            depth,
            h,
            output,
        } => {
            let seed = seed.ok_or_else(|| CliError::Usage("the random audit needs --seed".into()))?;
            let o = commands::audit_random(seed, count, m, depth, h)?;
            emit(&o.json, &output.out)?;
            Ok(status(o.accepted, &o.summary))
        }
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CertRow {
    delta: f64,
    accepted: bool,
    exp_bound: Option<f64>,
    ln_exp_bound: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
