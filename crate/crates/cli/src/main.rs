//! `metastruct`: synthetic data, meta-structure search, fixed-gene training,
//! evaluation, gradient checks and gene inspection.
//!
//! Human-readable progress goes to stderr, machine-readable JSON to stdout.
//! Exit status is 0 on success, 1 for bad input or configuration and 2 when a
//! run aborts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

#[derive(Debug, Parser)]
#[command(name = "metastruct", version, about = "Evolutionary meta-structure search for link ranking on heterogeneous graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted synthetic graph.
    Synth(SynthArgs),
    /// Run the evolutionary search.
    Search(SearchArgs),
    /// Train once on a fixed gene set.
    Fixed(FixedArgs),
    /// Train a fixed gene set once per value of one training parameter.
    Sweep(SweepArgs),
    /// Score a checkpoint on the test split.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Validate gene strings and count their instances.
    InspectGenes(InspectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Collaborative,
    YelpLike,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Synthetic spec JSON; overrides --preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "collaborative")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Schema JSON.
    #[arg(long)]
    schema: PathBuf,
    /// Edge file (`relation<TAB>a<TAB>b` lines).
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Search config JSON; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; a fresh one is drawn and recorded when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: PathBuf,
    /// Evaluate every individual instead of filtering with the predictor.
    #[arg(long)]
    no_predictor: bool,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    genes_per_individual: Option<usize>,
}

#[derive(Debug, Args)]
struct FixedArgs {
    /// One gene per line.
    #[arg(long)]
    genes: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    L2,
    Margin,
    Lr,
    Dim,
    Epochs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    genes: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    genes: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to the seed stored in the checkpoint.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding size of the micro-instances.
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Number of views of the micro-instances.
    #[arg(long, default_value_t = 2)]
    views: usize,
    /// Random micro-batches per model.
    #[arg(long, default_value_t = 20)]
    batches: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Count instances on this graph by exhaustive matching.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// File with one gene per line.
    #[arg(long)]
    genes: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gene strings.
    gene: Vec<String>,
}

/// A command failure and the exit status it maps to.
#[derive(Debug)]
pub enum Fail {
    User(String),
    Runtime(String),
}

impl Fail {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Fail::User(format!("I/O error on {}: {e}", path.display()))
    }
}

impl From<metastruct::Error> for Fail {
    fn from(e: metastruct::Error) -> Self {
        if e.is_user_error() {
            Fail::User(e.to_string())
        } else {
            Fail::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Search(a) => commands::search(a),
        Command::Fixed(a) => commands::fixed(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::InspectGenes(a) => commands::inspect_genes(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
