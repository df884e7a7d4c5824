mod commands;
mod layout;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ladb_core::config::ExperimentConfig;
use ladb_core::Error;

use commands::{Stage, TargetKind};
use layout::Layout;

const EXIT_CONFIG: u8 = 2;
const EXIT_PREREQ: u8 = 3;
const EXIT_TRANSLATE_ARGS: u8 = 4;
const EXIT_BENCH_FAILED: u8 = 5;

#[derive(Parser)]
#[command(name = "ladb", version, about = "Latent diffusion bridge experiments")]
struct Cli {
    /// Base seed; overrides LADB_SEED and the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Source,
    Ladm,
    DdibTarget,
    Ddbm,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Ladm,
    Ddib,
}

#[derive(Subcommand)]
enum Command {
    /// Sample every domain, split pairs, and write the mixture manifest.
    GenData {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train one stage from artifacts already in the run directory.
    Train {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        config: PathBuf,
    },
    /// Translate source points to the target domain.
    Translate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// `tag:rho,...`; defaults to the primary source with weight 1.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ladm")]
        target: TargetArg,
    },
    /// Run the method x fraction x seed benchmark.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Also write wall-clock times to `bench/timing.csv`.
        #[arg(long)]
        record_timing: bool,
    },
    /// Translate along the weight path from one source to another.
    InterpSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights_from: String,
        #[arg(long)]
        weights_to: String,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Aligned inputs with `<tag>.x*` columns; defaults to the generated test inputs.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to `interp_sweep.csv` in the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        class: Option<usize>,
        #[arg(long, value_enum, default_value = "ladm")]
        target: TargetArg,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn general(e: Error) -> Failure {
    let code = match e {
        Error::Config { .. } => EXIT_CONFIG,
        Error::MissingPrerequisite(_) => EXIT_PREREQ,
        _ => 1,
    };
    Failure::new(code, e.to_string())
}

fn translate_arg(e: Error) -> Failure {
    match e {
        Error::WeightSum(s) => {
            Failure::new(EXIT_TRANSLATE_ARGS, format!("ρ must sum to 1 (got {s})"))
        }
        Error::UnknownTag(_) | Error::InvalidArgument(_) => {
            Failure::new(EXIT_TRANSLATE_ARGS, e.to_string())
        }
        other => general(other),
    }
}

fn resolve_seed(flag: Option<u64>, cfg: &ExperimentConfig) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("LADB_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::new(
                EXIT_CONFIG,
                format!("config error at `LADB_SEED`: `{v}` is not an unsigned integer"),
            )
        }),
        Err(_) => Ok(cfg.seed),
    }
}

fn load_config(path: &Path, seed_flag: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(general)?;
    cfg.seed = resolve_seed(seed_flag, &cfg)?;
    Ok(cfg)
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenData { config } => {
            let cfg = load_config(&config, cli.seed)?;
            commands::gen_data(&cfg, cfg.seed, &mut log).map_err(general)
        }
        Command::Train { stage, config } => {
            let cfg = load_config(&config, cli.seed)?;
            let stage = match stage {
                StageArg::Source => Stage::Source,
                StageArg::Ladm => Stage::Ladm,
                StageArg::DdibTarget => Stage::DdibTarget,
                StageArg::Ddbm => Stage::Ddbm,
            };
            commands::train(&cfg, cfg.seed, stage, &mut log).map_err(general)
        }
        Command::Translate {
            config,
            input,
            weights,
            class,
            out,
            target,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            let weighting =
                commands::parse_weights(weights.as_deref(), &cfg).map_err(translate_arg)?;
            let n = commands::translate(&cfg, &input, &out, &weighting, class, target.into())
                .map_err(translate_arg)?;
            log(&format!("wrote {n} rows to {}", out.display()));
            Ok(())
        }
        Command::Bench {
            config,
            record_timing,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            let summary = commands::bench(&cfg, record_timing, &mut log).map_err(general)?;
            if summary.cells > 0 && summary.failed == summary.cells {
                return Err(Failure::new(
                    EXIT_BENCH_FAILED,
                    format!("all {} bench cells failed", summary.cells),
                ));
            }
            log(&format!(
                "bench finished: {} cells, {} failed",
                summary.cells, summary.failed
            ));
            Ok(())
        }
        Command::InterpSweep {
            config,
            weights_from,
            weights_to,
            steps,
            input,
            out,
            class,
            target,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            let lay = Layout::new(&cfg.out_dir);
            let input = input.unwrap_or_else(|| lay.test_inputs());
            let out = out.unwrap_or_else(|| lay.root.join("interp_sweep.csv"));
            commands::interp_sweep(
                &cfg,
                &input,
                &out,
                &weights_from,
                &weights_to,
                steps,
                class,
                target.into(),
            )
            .map_err(translate_arg)?;
            log(&format!("wrote {}", out.display()));
            Ok(())
        }
    }
}

impl From<TargetArg> for TargetKind {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Ladm => TargetKind::Ladm,
            TargetArg::Ddib => TargetKind::Ddib,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
