//! `ldp`: command-line front end for large-deviation rate computations.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use output::{Manifest, Run};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "ldp",
    version,
    about = "Large-deviation rate functions for finite Markov chains"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Write the CSV part of the output (estimate, level3) to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for Monte Carlo estimates.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Stopping tolerance for iterative bounds.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Print only the JSON document on stdout.
    #[arg(long, global = true)]
    pub json_only: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
enum Command {
    /// Irreducible classes, transient states and the reachability order.
    Classify { chain: PathBuf },
    /// Balance and admissibility of a measure.
    CheckMeasure { chain: PathBuf, measure: PathBuf },
    /// The rate function of a measure at its level.
    Rate {
        chain: PathBuf,
        measure: PathBuf,
        /// Level of the rate; must match the arity of the measure.
        #[arg(long)]
        level: Option<usize>,
        /// Also compute the Donsker–Varadhan and conjugate-SCGF bounds.
        #[arg(long)]
        cross_check: bool,
    },
    /// The scaled cumulant generating function of a potential.
    Scgf {
        chain: PathBuf,
        #[arg(long)]
        potential: PathBuf,
        /// Kill the chain outside these states.
        #[arg(long, value_delimiter = ',')]
        truncate: Option<Vec<String>>,
    },
    /// A certified lower bound on the Legendre conjugate of the SCGF.
    Conjugate { chain: PathBuf, measure: PathBuf },
    /// Greedy minimal-cycle decomposition of a balanced pair measure.
    Decompose {
        chain: PathBuf,
        measure: PathBuf,
        #[arg(long)]
        terms: usize,
    },
    /// A word whose empirical pair measure is within 3/m of the measure.
    Approximate {
        chain: PathBuf,
        measure: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Slicing, stitching and coupling of words.
    Words {
        #[arg(value_enum)]
        op: commands::WordOp,
        chain: PathBuf,
        /// The window K, as state labels.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<String>,
        /// Ordered class indices J0, as reported by `classify`.
        #[arg(long, value_delimiter = ',', required = true)]
        j0: Vec<usize>,
        /// Word file, one word per line; stdin when absent.
        #[arg(long)]
        words: Option<PathBuf>,
        /// Truncation index for stitching and coupling; the full word by default.
        #[arg(long)]
        t: Option<usize>,
    },
    /// Exact ball probabilities and Ruelle–Lanford slopes.
    Estimate {
        chain: PathBuf,
        measure: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Monte Carlo cross-check, e.g. `samples=100000,seed=7`.
        #[arg(long)]
        mc: Option<String>,
    },
    /// Entropies of the marginals of a stationary Markov measure.
    Level3 {
        chain: PathBuf,
        /// Stationary law, as a level-1 measure file.
        #[arg(long)]
        pi: PathBuf,
        /// Kernel file with `trans` lines.
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        kmax: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::CheckMeasure { .. } => "check-measure",
            Command::Rate { .. } => "rate",
            Command::Scgf { .. } => "scgf",
            Command::Conjugate { .. } => "conjugate",
            Command::Decompose { .. } => "decompose",
            Command::Approximate { .. } => "approximate",
            Command::Words { .. } => "words",
            Command::Estimate { .. } => "estimate",
            Command::Level3 { .. } => "level3",
        }
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = Cli::parse();
    if let Some(w) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let mut run = Run::new(&cli.global);
    let result = commands::dispatch(&cli.command, &cli.global, &mut run);
    let manifest = Manifest {
        subcommand: cli.command.name(),
        inputs: run.inputs.clone(),
        config: serde_json::to_value(&cli).expect("arguments serialize"),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    match result {
        Ok(value) => {
            run.finish(value, manifest);
            ExitCode::SUCCESS
        }
        Err(f) => {
            let code = f.exit_code();
            run.fail(f, manifest);
            ExitCode::from(code)
        }
    }
}
