//! `cutpoints` command-line front end.

mod commands;
mod files;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{write_records, Format, Record};

#[derive(Parser, Debug)]
#[command(
    name = "cutpoints",
    version,
    about = "Cutpoints of transient birth-and-death chains: exact formulas, simulation and Monte Carlo checks"
)]
struct Cli {
    /// Worker threads for replicate loops (wall time only; results are unchanged).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
#[group(required = true, multiple = false)]
pub struct ProfileArgs {
    /// Canonical profile r_k = 1/(k (ln k)^beta), r_1 = r_2.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Explicit profile file: one resistance per line from k = 1.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Evaluate one exact formula.
    Exact {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_enum)]
        op: ExactOp,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<u32>,
        /// Upper summation limit for `--op divergence`.
        #[arg(long)]
        big_m: Option<usize>,
        #[command(flatten)]
        #[serde(skip)]
        output: OutputArgs,
    },
    /// Simulate one trajectory and write it in the dump format.
    Simulate {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 1)]
        start: u32,
        /// Stop at the first visit to this level.
        #[arg(long, conflicts_with = "horizon")]
        first_passage: Option<u32>,
        /// Stop after this many steps.
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Hard cap on the number of steps.
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Cutpoint indicators of a dumped or freshly sampled trajectory.
    Cutpoints {
        #[command(flatten)]
        profile: ProfileArgs,
        /// Read a dumped first-passage trajectory instead of sampling.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Highest level analyzed.
        #[arg(long)]
        k: usize,
        /// Censor level (default 4K).
        #[arg(long)]
        n: Option<usize>,
        /// Sampling method (default exact; a trajectory file implies censored).
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Also list strong cut times of the observed path.
        #[arg(long)]
        strong: bool,
        #[command(flatten)]
        #[serde(skip)]
        output: OutputArgs,
    },
    /// Walk on a tree file; report V, M, U, L and the reconstructions.
    Tree {
        /// Tree file (`root x`, `absorb y`, `u v [weight]` lines).
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Start vertex (default: the file's root).
        #[arg(long)]
        x0: Option<u32>,
        /// Absorbing vertex (default: the file's absorb line).
        #[arg(long)]
        absorb: Option<u32>,
        /// Random leaf orders tried in addition to smallest-id-first.
        #[arg(long, default_value_t = 5)]
        leaf_orders: u64,
        /// Also dump the walk here.
        #[arg(long)]
        #[serde(skip)]
        trajectory_out: Option<PathBuf>,
        #[command(flatten)]
        #[serde(skip)]
        output: OutputArgs,
    },
    /// Run a tree walk from lazy stacks, reorder, rerun and resample.
    Stacks {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        reorderings: u64,
        #[command(flatten)]
        #[serde(skip)]
        output: OutputArgs,
    },
    /// Monte Carlo estimators compared with exact targets.
    Experiment {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Block index or inclusive range `lo:hi`.
        #[arg(long)]
        m: Option<String>,
        /// Comma-separated levels for `--census`.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
        /// Comma-separated `j:k` pairs for `--census`.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        #[arg(long)]
        reps: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "ladder")]
        sampler: SamplerKind,
        /// Censor level for the step-level sampler (default 4K).
        #[arg(long)]
        censor_level: Option<usize>,
        /// Largest K a census may request.
        #[arg(long, default_value_t = cutpoints::experiments::DEFAULT_K_LIMIT)]
        k_limit: usize,
        #[command(flatten)]
        #[serde(skip)]
        output: OutputArgs,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
#[group(required = true, multiple = false)]
pub struct ModeArgs {
    /// P[walk from k+1 never returns to k] vs p_k (needs --k).
    #[arg(long)]
    pub escape: bool,
    /// P[walk from j+1 hits k+1 before j] vs Q_k(j) (needs --j, --k).
    #[arg(long)]
    pub conditional: bool,
    /// P[walk from k hits n before 1] (needs --k, --n).
    #[arg(long)]
    pub hit: bool,
    /// Marginal and conditional cutpoint frequencies (needs --levels and/or --pairs).
    #[arg(long)]
    pub census: bool,
    /// Dyadic block statistics (needs --m).
    #[arg(long)]
    pub block: bool,
    /// Block inequality audit (needs --m).
    #[arg(long)]
    pub audit: bool,
    /// a_m m^2 table (needs --m).
    #[arg(long)]
    pub summability: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactOp {
    /// r_k
    R,
    /// t_k with its enclosure
    T,
    /// p_k = r_k / t_k
    P,
    /// Q_k(j)
    Q,
    /// P[hit n before 1 from k]
    Hit,
    /// t_n / t_k
    Return,
    /// b_m
    B,
    /// sum of p_j over (2^(m-1), 2^(m+1)]
    Psum,
    /// sum_{k=m}^{M} p_k against 1 - t_{M+1}/t_m
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Censored,
    Exact,
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Ladder,
    Step,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(cutpoints::Error),
    Io(String),
}

impl From<cutpoints::Error> for CliError {
    fn from(e: cutpoints::Error) -> Self {
        CliError::Compute(e)
    }
}

fn open_output(path: Option<&PathBuf>) -> std::io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let name = commands::name(&cli.command);
    let (format, out) = commands::output_target(&cli.command);

    match commands::run(&cli.command, cli.threads) {
        Ok(commands::Output::Records(records)) => emit(out.as_ref(), format, &records),
        Ok(commands::Output::Text(text)) => match open_output(out.as_ref()).and_then(|mut w| {
            w.write_all(text.as_bytes())?;
            w.flush()
        }) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Compute(e)) => {
            eprintln!("error: {e}");
            let config = commands::config_json(&cli.command);
            let mut rec = Record::new(name, "error", &config);
            rec.status = e.code().into();
            rec.derived = Some(e.to_string());
            let _ = emit(out.as_ref(), format, &[rec]);
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: Option<&PathBuf>, format: Format, records: &[Record]) -> ExitCode {
    match open_output(out).and_then(|mut w| {
        write_records(&mut *w, format, records)?;
        w.flush()
    }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
