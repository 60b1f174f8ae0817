use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hamrec::cli::{self, Emit, OutputFormat, ProfileTemplate, SweepConfig};
use hamrec::models::ModelKind;
use hamrec::spectral::SteadyStateSpec;
use hamrec::{Error, Parallelism};

#[derive(Parser)]
#[command(name = "hamrec", version, about = "Recover k-local chain Hamiltonians from degenerate steady states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the recovery pipeline on one random instance and print a JSON report.
    Recover(RecoverArgs),
    /// Recovery error statistics over a range of chain lengths.
    Sweep(SweepArgs),
    /// S, N and commutator rank r for the (2,2) steady state.
    Table1(Table1Args),
    /// Equation counts and recoverability without simulation.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    H2,
    H3,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::H2 => ModelKind::H2,
            Model::H3 => ModelKind::H3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the generation timestamp.
    #[arg(long)]
    reproducible: bool,
}

impl OutputArgs {
    fn emit(&self) -> Emit {
        let format = match self.format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
        Emit { format, reproducible: self.reproducible }
    }
}

#[derive(Args)]
struct ExecArgs {
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl ExecArgs {
    fn parallelism(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::default()
        }
    }
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(short = 'L', long)]
    length: usize,
    /// Degeneracy profile: "2", "3", "2,2", "rho-me" or "full".
    #[arg(long, default_value = "2", conflicts_with = "spec")]
    profile: String,
    /// Steady-state specification as JSON: {"classes":[{"weight":..,"indices":[..]}]}.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also compute the commutator rank r.
    #[arg(long)]
    rank: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for symmetry with the other subcommands; the report has no timestamp.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long, default_value = "2")]
    profile: String,
    #[arg(long)]
    lmin: Option<usize>,
    #[arg(long, default_value_t = 10)]
    lmax: usize,
    #[arg(long, default_value_t = cli::DEFAULT_TRIALS)]
    trials: usize,
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = cli::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 10)]
    lmax: usize,
    /// Random instances per cell; r is the majority vote.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long, default_value = "2")]
    profile: String,
    #[arg(long, default_value_t = 12)]
    lmax: usize,
    #[command(flatten)]
    output: OutputArgs,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Numerical(_) | Error::NotHermitian { .. } => Failure::Numerical(err.to_string()),
            Error::Io(e) => Failure::Io(e),
            _ => Failure::Usage(err.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        Failure::Io(err)
    }
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn profile(s: &str) -> Result<ProfileTemplate, Failure> {
    Ok(s.parse::<ProfileTemplate>()?)
}

fn recover(args: RecoverArgs) -> Result<(), Failure> {
    let spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<SteadyStateSpec>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => {
            let template = profile(&args.profile)?;
            if !template.fits(args.length) {
                return Err(Failure::Usage(format!("profile {template} does not fit in 2^{} states", args.length)));
            }
            template.spec_at(args.length)
        }
    };
    let report = cli::cmd_recover(args.model.into(), args.length, &spec, args.seed, args.rank)?;
    let mut out = sink(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::other)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let kind: ModelKind = args.model.into();
    let mut config = SweepConfig::new(kind, profile(&args.profile)?, args.lmin.unwrap_or(kind.min_length()), args.lmax);
    config.trials = args.trials;
    config.base_seed = args.seed;
    config.threshold = args.threshold;
    config.workers = args.exec.workers;
    config.parallelism = args.exec.parallelism();
    let rows = cli::cmd_sweep(&config)?;
    for row in rows.iter().filter(|r| r.failed_trials > 0) {
        log::warn!("L={}: {} of {} trials failed", row.length, row.failed_trials, row.trials);
    }
    let mut out = sink(args.output.out.as_deref())?;
    cli::write_sweep(&mut out, args.output.emit(), &rows)?;
    out.flush()?;
    Ok(())
}

fn table1(args: Table1Args) -> Result<(), Failure> {
    let par = args.exec.parallelism();
    let rows = hamrec::parallel::with_workers(par, args.exec.workers, || {
        cli::cmd_table1(args.lmax, args.seeds, args.seed, par)
    })?;
    let mut out = sink(args.output.out.as_deref())?;
    cli::write_table1(&mut out, args.output.emit(), &rows)?;
    out.flush()?;
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), Failure> {
    let prediction = cli::cmd_predict(args.model.into(), &profile(&args.profile)?, args.lmax)?;
    let mut out = sink(args.output.out.as_deref())?;
    cli::write_prediction(&mut out, args.output.emit(), &prediction)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Recover(a) => recover(a),
        Command::Sweep(a) => sweep(a),
        Command::Table1(a) => table1(a),
        Command::Predict(a) => predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(err)) => {
            eprintln!("I/O error: {err}");
            ExitCode::from(1)
        }
    }
}
