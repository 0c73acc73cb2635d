use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use riemopt_cli::experiment::{DEFAULT_AUDIT_SAMPLES, DEFAULT_TOL};
use riemopt_cli::{
    audit_config, collect_rows, load_config, run_config, summary_csv, CliError, Tolerances,
    EXIT_ERROR, EXIT_FAILED, EXIT_OK,
};

#[derive(Parser)]
#[command(name = "riemopt", version, about = "Run Riemannian optimization experiments and certify their bounds")]
struct Cli {
    /// Relative tolerance for certificates and audits.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file; write traces and certificates.
    Run { config: PathBuf },
    /// Run the sampled audit suites on each experiment's manifold and objective.
    Audit {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_AUDIT_SAMPLES)]
        samples: usize,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate certificate files as CSV.
    Summarize {
        paths: Vec<PathBuf>,
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if !(cli.tol >= 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Config(format!("--tol {} must be finite and >= 0", cli.tol)));
    }
    match cli.command {
        Command::Run { config } => {
            let file = load_config(&config)?;
            let results = run_config(&file, Tolerances::global(cli.tol))?;
            let mut ok = true;
            for r in &results {
                for c in &r.certificates {
                    match c {
                        riemopt::certificates::CertificateOutcome::Certified(c) => println!(
                            "{} {} N={} lhs={:e} rhs={:e} {}",
                            r.id,
                            c.theorem_id,
                            c.n,
                            c.lhs,
                            c.rhs,
                            if c.holds { "holds" } else { "FAILS" }
                        ),
                        riemopt::certificates::CertificateOutcome::NotApplicable { theorem_id, reason } => {
                            println!("{} {theorem_id} not-applicable: {reason}", r.id)
                        }
                    }
                }
                for a in r.trace_audits.iter().chain(r.audits.iter().flatten()) {
                    if !a.passed() {
                        println!("{} audit {} FAILS: {} violations", r.id, a.suite_id, a.violations);
                    }
                }
                println!("{} terminated: {}", r.id, r.trace.terminated_reason);
                ok &= r.passed();
            }
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Audit {
            config,
            seed,
            samples,
            out,
        } => {
            let file = load_config(&config)?;
            let (passed, json) = audit_config(&file, seed, samples, cli.tol, out.as_deref())?;
            if out.is_none() {
                print!("{json}");
            }
            Ok(if passed { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Summarize { paths, out } => {
            let csv = summary_csv(&collect_rows(&paths)?);
            match out {
                Some(p) => std::fs::write(&p, csv).map_err(|e| CliError::Io { path: p, source: e })?,
                None => print!("{csv}"),
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
