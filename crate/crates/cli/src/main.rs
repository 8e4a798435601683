use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qmstree::par::Execution;
use qmstree::verify::Backend;
use qmstree_cli::run::{self, CheckKind, Command, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "qmstree",
    version,
    about = "Evaluate and verify quantum Markov states on Cayley trees"
)]
struct Cli {
    /// Model file (JSON).
    #[arg(long, global = true, env = "QMSTREE_MODEL")]
    model: Option<PathBuf>,
    /// Observable file (JSON).
    #[arg(long, global = true, env = "QMSTREE_OBSERVABLE")]
    observable: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1e-9, env = "QMSTREE_TOL")]
    tol: f64,
    /// Largest finite volume the handle may contract.
    #[arg(long, global = true, env = "QMSTREE_NMAX")]
    nmax: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, env = "QMSTREE_OUT")]
    out: Option<PathBuf>,
    /// Largest region, in sites, for dense matrices.
    #[arg(long, global = true, env = "QMSTREE_DENSE_BUDGET")]
    dense_budget: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = BackendArg::Pauli, env = "QMSTREE_BACKEND")]
    backend: BackendArg,
    /// Disable the thread pool.
    #[arg(long, global = true, env = "QMSTREE_SEQUENTIAL")]
    sequential: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Pauli,
    Dense,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Evaluate the observables of --observable.
    Evaluate,
    /// Run structural checks on the model.
    Verify {
        #[arg(long, value_enum, value_delimiter = ',')]
        checks: Vec<CheckKind>,
    },
    /// Solve the fixed-point equation for the root weight.
    Fixpoint,
    /// Sweep the competing Ising family over a (beta, J) grid.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
        js: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Evaluate => Command::Evaluate,
        Sub::Verify { checks } => Command::Verify { checks },
        Sub::Fixpoint => Command::Fixpoint,
        Sub::Sweep { betas, js } => Command::Sweep { betas, js },
    };
    let config = RunConfig {
        command,
        model: cli.model,
        observable: cli.observable,
        tol: cli.tol,
        n_max: cli.nmax,
        out: cli.out,
        dense_budget: cli.dense_budget,
        backend: match cli.backend {
            BackendArg::Pauli => Backend::Pauli,
            BackendArg::Dense => Backend::Dense,
        },
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let (outcome, write_error) = run::run_and_write(&config);
    if config.out.is_none() || write_error.is_some() {
        let mut stdout = std::io::stdout().lock();
        let _ = stdout.write_all(outcome.to_json().as_bytes());
    }
    if let Some(msg) = write_error {
        eprintln!("{msg}");
    } else if let Some(err) = outcome.report["body"].get("error") {
        eprintln!("error: {}", err["message"].as_str().unwrap_or("unknown"));
    }
    ExitCode::from(outcome.code as u8)
}
