use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fermigrade::input::{self, StateFile};
use fermigrade::run::{self, MatelemOptions, Output};
use fermigrade::CliError;
use fermigrade_core::Tolerances;

/// Graded orthogonality, Araki angles and group-function matrix elements of
/// fermionic states.
#[derive(Debug, Parser)]
#[command(name = "fermigrade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Largest cross overlap of internal spaces still counted as orthogonal
    #[arg(long, env = "GRADE_TOL", default_value_t = 1e-8)]
    tol: f64,
    /// Relative eigenvalue cutoff separating an internal space from the kernel
    #[arg(long, default_value_t = 1e-10)]
    rank_tol: f64,
    /// Also write the result table as CSV
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// p-orthogonality verdicts and the orthogonality grade of two states
    Grade {
        file: PathBuf,
        first: String,
        second: String,
        #[command(flatten)]
        common: Common,
    },
    /// Araki angles between the p-internal spaces of two states
    Araki {
        file: PathBuf,
        first: String,
        second: String,
        #[arg(long = "p")]
        p: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Overlap or operator matrix element between two group products
    Matelem {
        file: PathBuf,
        bra: String,
        ket: String,
        /// Operator file; without it the overlap is computed
        #[arg(long, value_name = "PATH")]
        operator: Option<PathBuf>,
        /// Declared orthogonality grade of the active group, enabling the restricted sums
        #[arg(long)]
        q: Option<usize>,
        /// Check the declared orthogonality first (exit code 4 when it fails)
        #[arg(long, requires = "q")]
        verify: bool,
        /// Print the number of enumerated terms
        #[arg(long)]
        report_terms: bool,
        /// Worker threads for the plan sum
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Orthonormal basis of the p-internal space of a state
    Internal {
        file: PathBuf,
        state: String,
        #[arg(long = "p")]
        p: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<StateFile, CliError> {
    StateFile::parse(&read(path)?).map_err(|source| CliError::Parse { path: path.display().to_string(), source })
}

fn tolerances(common: &Common) -> Result<Tolerances, CliError> {
    for (name, v) in [("--tol", common.tol), ("--rank-tol", common.rank_tol)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Usage(format!("{name} must be a positive number, got {v}")));
        }
    }
    Ok(Tolerances { rank: common.rank_tol, ortho: common.tol, ..Tolerances::default() })
}

fn write_csv(path: &Path, out: &Output) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(out.columns).map_err(io)?;
    for row in &out.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), CliError> {
    let (out, common) = match command {
        Command::Grade { file, first, second, common } => {
            let f = load(&file)?;
            (run::grade(&f, &first, &second, &tolerances(&common)?)?, common)
        }
        Command::Araki { file, first, second, p, common } => {
            let f = load(&file)?;
            (run::araki(&f, &first, &second, p, &tolerances(&common)?)?, common)
        }
        Command::Matelem { file, bra, ket, operator, q, verify, report_terms, threads, common } => {
            let f = load(&file)?;
            let op = match &operator {
                Some(path) => Some(
                    input::parse_operator(&read(path)?, f.basis())
                        .map_err(|source| CliError::Parse { path: path.display().to_string(), source })?,
                ),
                None => None,
            };
            let options = MatelemOptions { q, verify, report_terms, threads };
            (run::matelem(&f, &bra, &ket, op.as_ref(), &options, &tolerances(&common)?)?, common)
        }
        Command::Internal { file, state, p, common } => {
            let f = load(&file)?;
            (run::internal(&f, &state, p, &tolerances(&common)?)?, common)
        }
    };
    print!("{}", out.text);
    if let Some(path) = &common.csv {
        write_csv(path, &out)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
