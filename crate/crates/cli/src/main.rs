//! Batch driver for the quadchab toolkit.
//!
//! Subcommands: `icc basis`, `hensel solve`, `qc alphas`, `qc tsets`,
//! `qc run`. All inputs and outputs are JSON; outputs are byte-identical
//! across runs for identical manifests.
//!
//! Exit codes: 0 success, 1 input error, 2 precision failure,
//! 3 budget exceeded.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod run;

use run::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "quadchab", version, about = "p-adic quadratic Chabauty toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Idele class characters of quadratic fields.
    Icc {
        #[command(subcommand)]
        sub: IccCommand,
    },
    /// Certified p-adic root solving.
    Hensel {
        #[command(subcommand)]
        sub: HenselCommand,
    },
    /// Height-coefficient solving, target sets and residue-pair runs.
    Qc {
        #[command(subcommand)]
        sub: QcCommand,
    },
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded in the manifest echo (reserved for randomized modes).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum IccCommand {
    /// Compute a basis of the space of continuous idele class characters.
    Basis {
        /// Field fixture JSON.
        #[arg(long)]
        field: PathBuf,
        /// The split prime p.
        #[arg(long)]
        p: u64,
        /// Working precision (digits of p).
        #[arg(long)]
        prec: u32,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Subcommand)]
enum HenselCommand {
    /// Enumerate and certify the roots of a series system.
    Solve {
        /// Job JSON: system plus search configuration.
        #[arg(long)]
        input: PathBuf,
        /// Override the target depth n.
        #[arg(long)]
        depth: Option<u32>,
        /// Override the evaluation budget.
        #[arg(long)]
        budget: Option<u64>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Subcommand)]
enum QcCommand {
    /// Solve the linear system for the height coefficients alpha.
    Alphas {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Assemble finite target sets from per-prime local height tables.
    Tsets {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Full residue-pair run from a problem bundle.
    Run {
        #[arg(long)]
        bundle: PathBuf,
        /// Override the target depth n.
        #[arg(long)]
        depth: Option<u32>,
        /// Override the evaluation budget.
        #[arg(long)]
        budget: Option<u64>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Icc {
            sub: IccCommand::Basis {
                field,
                p,
                prec,
                common,
            },
        } => run::cmd_icc_basis(&field, p, prec, common.seed).and_then(|v| emit(&v, &common.out)),
        Command::Hensel {
            sub:
                HenselCommand::Solve {
                    input,
                    depth,
                    budget,
                    common,
                },
        } => run::cmd_hensel_solve(&input, depth, budget, common.seed)
            .and_then(|v| emit(&v, &common.out)),
        Command::Qc { sub } => match sub {
            QcCommand::Alphas { input, common } => {
                run::cmd_qc_alphas(&input, common.seed).and_then(|v| emit(&v, &common.out))
            }
            QcCommand::Tsets { input, common } => {
                run::cmd_qc_tsets(&input, common.seed).and_then(|v| emit(&v, &common.out))
            }
            QcCommand::Run {
                bundle,
                depth,
                budget,
                common,
            } => run::cmd_qc_run(&bundle, depth, budget, common.seed)
                .and_then(|v| emit(&v, &common.out)),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn emit<T: Serialize>(value: &T, out: &Option<PathBuf>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
    text.push('\n');
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
    }
}

pub(crate) fn resolve_relative(base_file: &Path, relative: &str) -> PathBuf {
    let p = Path::new(relative);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_file
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(p)
    }
}
