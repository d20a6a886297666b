//! `dqfi`: spectra, generators and Fisher-information sweeps for Lindblad models.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dqfi", version, about = "Dissipative quantum Fisher information of Lindblad models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file
    #[arg(long)]
    pub model: PathBuf,
    /// Parameter value (defaults to the value declared in the model)
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Override a constant or the parameter default, NAME=VALUE; repeatable
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub nt: Option<usize>,
    /// Comma-separated parameter values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,
    /// auto, spectral, quadrature, fd or ep-jordan
    #[arg(long)]
    pub route: Option<String>,
    /// Protocol repetitions for the Cramér–Rao column
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Worker threads (default: available cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of the supermatrix with left-vector norms and EP flags
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entries of the dissipative generator at one time
    Generator {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value = "auto")]
        route: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DQFI, CQFI, purity and bound over a time grid at one parameter value
    Dqfi {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// As `dqfi`, over a list of parameter values (parameter-major rows)
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the spin-flip figure data: fig1.csv, fig2.csv, fig3.csv
    Reproduce {
        /// 1, 2, 3 or all
        #[arg(long, default_value = "all")]
        figure: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DQFI_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum { model, out } => commands::spectrum(&model, out.as_deref()),
        Command::Generator { model, t, route, out } => commands::generator(&model, t, &route, out.as_deref()),
        Command::Dqfi { model, grid, out } => commands::dqfi(&model, &grid, false, out.as_deref()),
        Command::Sweep { model, grid, out } => commands::dqfi(&model, &grid, true, out.as_deref()),
        Command::Reproduce { figure, out, jobs } => commands::reproduce(&figure, &out, jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dqfi: {e}");
            ExitCode::from(e.code())
        }
    }
}
