//! Command-line front end: `separate`, `bench` and `info`.
//!
//! Exit status is 0 on success, 1 on usage errors and 2 on processing
//! errors. Failures print one line to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{describe, Settings};
use crate::error::Error;
use crate::harness::dataset::{load_dataset, sweep_dataset};
use crate::harness::{sweep, MatrixKind, SweepGrid, SweepTable, SyntheticSpec};
use crate::operator::MixingModel;
use crate::pipeline::{separate, SeparationConfig};
use crate::solve::Algorithm;
use crate::wav::{read_wav, write_wav};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PROCESSING: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ampsep", version, about = "Sparse source separation with AMP and VAMP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Separate a multichannel WAV given its mixing matrix.
    Separate(SeparateArgs),
    /// Run damping and iteration sweeps and write CSV.
    Bench(BenchArgs),
    /// Print the resolved configuration.
    Info(SolverArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Flags shared by every subcommand. Unset flags fall through to the
/// config file, then to the defaults.
#[derive(Debug, Args)]
struct SolverArgs {
    /// Flat key = value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["amp", "vamp"])]
    algo: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    frame_len: Option<usize>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    trunc_len: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long, value_enum)]
    em_noise: Option<Switch>,
    #[arg(long)]
    parallel_frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SeparateArgs {
    /// M-channel mixture (16-bit PCM or 32-bit float).
    #[arg(long)]
    mix: PathBuf,
    /// M x N mixing matrix as CSV.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON-lines frame diagnostics; defaults to <out-dir>/diagnostics.jsonl.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Theta,
    Iter,
    Both,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Which sweep to run.
    #[arg(long, value_enum, default_value = "both")]
    sweep: SweepKind,
    /// Run both algorithms unless `--algo` is given.
    #[command(flatten)]
    solver: SolverArgs,
    /// Synthetic instances per grid point.
    #[arg(long, default_value_t = 8)]
    instances: usize,
    #[arg(long, default_value_t = 2)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    sources: usize,
    /// Coefficients per block.
    #[arg(long, default_value_t = 720)]
    block: usize,
    #[arg(long, default_value = "unit_column_mixing")]
    matrix_kind: String,
    /// Sweep over recordings in this directory instead of synthetic data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_PROCESSING,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl SolverArgs {
    fn settings(&self) -> Result<Settings, Failure> {
        let mut s = match &self.config {
            // a bad settings file is a usage problem, like a bad flag
            Some(path) => Settings::read(path).map_err(|e| Failure::usage(e.to_string()))?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let mut put = |k: &str, v: Option<String>| -> Result<(), Failure> {
            if let Some(v) = v {
                flags.set(k, v)?;
            }
            Ok(())
        };
        put("algo", self.algo.clone())?;
        put("theta", self.theta.map(|v| v.to_string()))?;
        put("max_iter", self.max_iter.map(|v| v.to_string()))?;
        put("tol", self.tol.map(|v| v.to_string()))?;
        put("rho", self.rho.map(|v| v.to_string()))?;
        put("mu", self.mu.map(|v| v.to_string()))?;
        put("sigma2", self.sigma2.map(|v| v.to_string()))?;
        put("snr_db", self.snr_db.map(|v| v.to_string()))?;
        put("frame_len", self.frame_len.map(|v| v.to_string()))?;
        put("overlap", self.overlap.map(|v| v.to_string()))?;
        put("trunc_len", self.trunc_len.map(|v| v.to_string()))?;
        put("block_size", self.block_size.map(|v| v.to_string()))?;
        put(
            "em_noise",
            self.em_noise.map(|v| match v {
                Switch::On => "on".to_string(),
                Switch::Off => "off".to_string(),
            }),
        )?;
        put("parallel_frames", self.parallel_frames.map(|v| v.to_string()))?;
        put("seed", self.seed.map(|v| v.to_string()))?;
        s.merge(&flags);
        Ok(s)
    }

    fn resolve(&self) -> Result<(SeparationConfig, u64, Settings), Failure> {
        let s = self.settings()?;
        let cfg = s.resolve()?;
        let seed = s.seed()?;
        Ok((cfg, seed, s))
    }
}

fn run_separate(args: &SeparateArgs) -> Result<(), Failure> {
    let (cfg, _, _) = args.solver.resolve()?;
    let wav = read_wav(&args.mix)?;
    let model = MixingModel::read_csv(&args.matrix, 1.0)?;
    if wav.channels.len() != model.channels() {
        return Err(Failure {
            code: EXIT_PROCESSING,
            message: format!(
                "{} has {} channels but {} has {} rows",
                args.mix.display(),
                wav.channels.len(),
                args.matrix.display(),
                model.channels()
            ),
        });
    }
    let result = separate(&wav.channels, &model, &cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    for (j, src) in result.sources.iter().enumerate() {
        let path = args.out_dir.join(format!("source_{}.wav", j + 1));
        write_wav(&path, wav.sample_rate, wav.format, &[src])?;
    }
    let diag = args
        .diagnostics
        .clone()
        .unwrap_or_else(|| args.out_dir.join("diagnostics.jsonl"));
    result.write_diagnostics_file(&diag)?;
    if result.all_failed() {
        return Err(Failure {
            code: EXIT_PROCESSING,
            message: format!("all {} frames failed; see {}", result.frames.len(), diag.display()),
        });
    }
    if result.failed_frames() > 0 {
        eprintln!(
            "warning: {} of {} frames failed and were zeroed",
            result.failed_frames(),
            result.frames.len()
        );
    }
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<(), Failure> {
    let settings = args.solver.settings()?;
    let (cfg, seed, _) = args.solver.resolve()?;
    let algos: Vec<Algorithm> = match settings.get("algo") {
        Some(_) => vec![cfg.solver.algo],
        None => vec![Algorithm::Amp, Algorithm::Vamp],
    };
    let explicit_iter = settings.get("max_iter").is_some();
    let explicit_theta = settings.get("theta").is_some();

    let mut table = SweepTable::default();
    let dataset = match &args.data_dir {
        Some(dir) => Some(load_dataset(dir)?),
        None => None,
    };
    let spec = SyntheticSpec {
        m: args.channels,
        n: args.sources,
        t: args.block,
        prior: cfg.solver.prior,
        snr_db: cfg.snr_db.unwrap_or(f64::INFINITY),
        num_instances: args.instances,
        seed,
        matrix_kind: args.matrix_kind.parse::<MatrixKind>().map_err(Failure::usage)?,
    };
    if dataset.is_none() {
        spec.validate()?;
    }

    for algo in algos {
        let mut base = cfg.clone();
        base.solver.algo = algo;
        let mut grids = Vec::new();
        if matches!(args.sweep, SweepKind::Theta | SweepKind::Both) {
            let cap = if explicit_iter { cfg.solver.max_iter() } else { base.solver.max_iter() };
            grids.push(SweepGrid::damping(cap));
        }
        if matches!(args.sweep, SweepKind::Iter | SweepKind::Both) {
            let mut g = SweepGrid::iterations();
            if explicit_theta {
                g.thetas = vec![cfg.solver.theta()];
            }
            grids.push(g);
        }
        for grid in grids {
            let part = match &dataset {
                Some(items) => sweep_dataset(items, &grid, &base)?,
                None => {
                    let mut solver = base.solver.clone();
                    // sweeps measure fixed iteration budgets
                    solver.set_tol(0.0);
                    sweep(&spec, algo, &grid, &solver)?
                }
            };
            table.extend(part);
        }
    }

    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            let mut w = std::io::BufWriter::new(file);
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn run_info(args: &SolverArgs) -> Result<(), Failure> {
    let (cfg, seed, _) = args.resolve()?;
    if let Some(path) = &args.config {
        println!("# config file: {}", path.display());
    }
    print!("{}", describe(&cfg, seed));
    Ok(())
}

/// Parses `argv` (including the program name) and runs one subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Separate(a) => run_separate(a),
        Command::Bench(a) => run_bench(a),
        Command::Info(a) => run_info(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let line = f.message.replace('\n', " ");
            eprintln!("ampsep: {line}");
            f.code
        }
    }
}

/// Convenience for tests: runs with the given args and no program name.
pub fn run_args<S: AsRef<str>>(args: &[S]) -> i32 {
    let argv = std::iter::once("ampsep".to_string()).chain(args.iter().map(|s| s.as_ref().to_string()));
    run_cli(argv)
}
