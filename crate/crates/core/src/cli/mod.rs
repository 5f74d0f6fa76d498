mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use rcl::error::Error;
use output::OutputMode;

#[derive(Debug, Parser)]
#[command(name = "rcl", version, about = "Reward distributions of ranking-utility objectives")]
pub struct Cli {
    /// Artifacts to produce.
    #[arg(long, value_enum, global = true, default_value = "json")]
    pub output: OutputMode,

    /// Destination path; stdout when absent. With `--output both` the
    /// extension is replaced by .json and .csv.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolveOpts {
    /// Stop when the projected gradient norm falls below this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    /// Echoed in the report; the solvers are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal rewards for n ranked completions.
    Solve {
        /// Utility spec such as `power:gamma=0.5` or `log:ext=appendixA`.
        #[arg(long)]
        utility: String,
        /// Number of ranked completions.
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Large-n law of the optimal rewards.
    Limit {
        #[arg(long)]
        utility: String,
    },
    /// Compare a reward file with the limit law of a utility.
    Fit {
        #[arg(long)]
        rewards: PathBuf,
        #[arg(long)]
        utility: String,
        /// Distance to 0 or 1 counted as endpoint mass when the law is only a bound.
        #[arg(long, default_value_t = 1e-4)]
        endpoint_tol: f64,
    },
    /// Deviation of c ↦ E|X − c|^γ from a constant under the matching Beta law.
    Flatness {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 101)]
        c_grid: usize,
        #[arg(long, default_value_t = 2000)]
        quad: usize,
    },
    /// Optimal symmetric measure on an equispaced grid.
    Measure {
        #[arg(long)]
        utility: String,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Rewards from Bradley–Terry–Luce scores.
    Btl {
        #[arg(long)]
        utility: String,
        /// A file of scores, `preset:left` or `preset:right`.
        #[arg(long)]
        thetas: String,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Fixed vs prompt-aware utilities across generated prompts.
    CollapseDemo {
        #[arg(long, default_value_t = 16)]
        prompts: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value = "logsigmoid:sigma=1")]
        fixed: String,
        #[arg(long, default_value = "negpow:gamma=1,ext=appendixA")]
        open: String,
        #[arg(long, default_value = "linear")]
        concrete: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the invariant suite.
    Verify,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    code: &'a str,
    message: String,
}

fn report(code: &str, message: String) {
    let line = serde_json::to_string(&ErrorLine { code, message })
        .unwrap_or_else(|_| format!("{{\"code\":\"{code}\"}}"));
    eprintln!("{line}");
}

fn classify(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Prompt { source, .. } => classify(source),
        Error::NotConverged { .. } => ("not_converged", 1),
        Error::Quadrature { .. } => ("quadrature", 1),
        Error::InvalidUtility(_) => ("invalid_utility", 2),
        Error::InvalidInput(_) => ("invalid_input", 2),
        Error::BadInit => ("bad_init", 2),
        Error::Inapplicable(_) => ("inapplicable", 2),
        Error::Io(_) => ("io", 2),
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("RCL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::InvalidInput(format!("RCL_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("cannot size the thread pool: {e}")))
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            report("usage", first.to_string());
            return ExitCode::from(2);
        }
    };
    let result = init_threads().and_then(|()| commands::run(&cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            report("verify_failed", "at least one invariant check failed".into());
            ExitCode::from(1)
        }
        Err(e) => {
            let (code, exit) = classify(&e);
            report(code, e.to_string());
            ExitCode::from(exit)
        }
    }
}
