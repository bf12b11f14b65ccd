//! `qhbmo` — Whitney decompositions, quasi-hyperbolic geodesics, `(ε,δ)`
//! classification, `bmo_λ` norms and the extension operator from the shell.

mod args;
mod commands;
mod emit;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qhbmo::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Parser, Debug)]
#[command(name = "qhbmo", version, about = "Whitney cubes, quasi-hyperbolic distance and bmo extension experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Domain file, or a built-in `name[:params]` (disk:1, slit_disk:1,1, l_shape:2,2, intro_lipschitz, ...).
    #[arg(long, default_value = "disk:1")]
    pub domain: String,
    /// Square window `cx,cy,side`; defaults to the domain's bounding box.
    #[arg(long)]
    pub window: Option<String>,
    /// Cell size, a dyadic fraction of the window side (`1/256`).
    #[arg(long, default_value = "1/128")]
    pub resolution: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, env = "QHBMO_OUT", default_value = "qhbmo-out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Whitney decomposition of the window down to the resolution.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Quasi-hyperbolic distance and geodesic between two points.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
    },
    /// (ε,δ) evidence from sampled and adversarial pairs.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Random pairs per resolution.
        #[arg(long, default_value_t = 32)]
        pairs: usize,
    },
    /// bmo_λ, BMO or local-surrogate norm of a test function.
    Norm {
        #[command(flatten)]
        common: Common,
        /// const:c, x, y, x+2y, x^2-y^2, max-x, sign, log-d or k:ax,ay.
        #[arg(long, allow_hyphen_values = true)]
        function: String,
        #[arg(long, default_value_t = 0.125)]
        lambda: f64,
        /// bmo-lambda, bmo, local or abc.
        #[arg(long, default_value = "bmo-lambda")]
        kind: String,
    },
    /// Extension operator T_λ and its experiments.
    Extend {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true, default_value = "x")]
        function: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Fall back to the nearest interior cube when no matching cube exists.
        #[arg(long)]
        best_effort: bool,
        /// single, operator or counterexample.
        #[arg(long, default_value = "single")]
        mode: String,
        /// λ multiples of λ_max for `operator`; window sizes for `counterexample`.
        #[arg(long)]
        values: Option<String>,
    },
    /// Aggregates the CSV files of a results directory into report.csv.
    Report {
        /// Results directory (defaults to the output directory).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, env = "QHBMO_OUT", default_value = "qhbmo-out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qhbmo: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
