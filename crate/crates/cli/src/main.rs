use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qwm_cli::commands::{self, EvalSource, ExtractArgs};
use qwm_cli::config::{parse_pirate, ExperimentConfig};
use qwm_cli::{CliError, CliResult};
use qwm_core::api::Engine;

#[derive(Parser, Debug)]
#[command(name = "qwm", version, about = "Watermarkable PRF simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML experiment config; its params act as defaults for every command
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or directory for keygen and experiment
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Overrides the number of trials per pirate
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EngineArg {
    Exact,
    Fast,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Exact => Engine::Exact,
            EngineArg::Fast => Engine::Fast,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a PRF key and its public tag
    Keygen {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed_bits: Option<usize>,
        #[arg(long)]
        range_bits: Option<usize>,
    },
    /// Mark a PRF key with a message
    Mark {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        message: String,
    },
    /// Evaluate a marked circuit or a PRF key
    Eval {
        #[arg(long, conflicts_with = "key", required_unless_present = "key")]
        circuit: Option<PathBuf>,
        #[arg(long)]
        key: Option<PathBuf>,
        /// Domain point as a binary string (repeatable)
        #[arg(long = "x")]
        points: Vec<String>,
        /// Also evaluate this many seeded uniform points
        #[arg(long)]
        random: Option<usize>,
    },
    /// Sample the simulated distribution for index i from the tag
    Sim {
        #[arg(long)]
        tag: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        coins: Option<usize>,
    },
    /// Extract a mark from a pirate built on a marked circuit
    Extract {
        #[arg(long)]
        tag: PathBuf,
        #[arg(long)]
        circuit: PathBuf,
        /// honest, anti, coin, noisy:ETA, sp:THETA or sp:THETA:A:B
        #[arg(long, default_value = "honest")]
        pirate: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta_prime: Option<f64>,
        #[arg(long)]
        coins: Option<usize>,
    },
    /// Run a batch experiment from --config
    Experiment {
        /// Also write per-trial runtimes to this CSV
        #[arg(long)]
        timings: Option<PathBuf>,
    },
    /// Recompute a summary from its CSV and compare
    Verify {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        summary: PathBuf,
    },
}

fn load_config(g: &Global) -> CliResult<Option<ExperimentConfig>> {
    g.config.as_deref().map(ExperimentConfig::load).transpose()
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    let params = cfg.as_ref().map(|c| c.params.clone()).unwrap_or_default();
    let seed = g.seed.or(cfg.as_ref().map(|c| c.seed));
    let need_seed = || seed.ok_or_else(|| CliError::Usage("--seed (or a config) is required".into()));
    let engine = g.engine.map(Engine::from).unwrap_or(params.engine);
    let dim_cap = commands::dim_cap_from_env()?;
    match cli.command {
        Command::Keygen { k, seed_bits, range_bits } => {
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let (kp, tp) = commands::keygen(
                need_seed()?,
                k.unwrap_or(params.k),
                seed_bits.unwrap_or(params.seed_bits),
                range_bits.unwrap_or(params.range_bits),
                &out,
            )?;
            eprintln!("wrote {} and {}", kp.display(), tp.display());
        }
        Command::Mark { key, message } => {
            let out = g.out.clone().ok_or_else(|| CliError::Usage("mark needs --out".into()))?;
            commands::mark(&key, &message, &out)?;
        }
        Command::Eval { circuit, key, points, random } => {
            let src = match (circuit, key) {
                (Some(c), _) => EvalSource::Circuit(c),
                (None, Some(k)) => EvalSource::Key(k),
                (None, None) => return Err(CliError::Usage("eval needs --circuit or --key".into())),
            };
            let s = if random.is_some() { need_seed()? } else { seed.unwrap_or(0) };
            commands::output_text(g.out.as_deref(), &commands::eval(&src, &points, random, s)?)?;
        }
        Command::Sim { tag, index, coins } => {
            let text = commands::sim(&tag, index, coins.unwrap_or(params.coins), need_seed()?)?;
            commands::output_text(g.out.as_deref(), &text)?;
        }
        Command::Extract { tag, circuit, pirate, eps, delta_prime, coins } => {
            let args = ExtractArgs {
                eps: eps.unwrap_or(params.eps),
                delta_prime: delta_prime.unwrap_or(params.delta_prime),
                coins: coins.unwrap_or(params.coins),
                engine,
                dim_cap,
            };
            let text = commands::extract(&tag, &circuit, &parse_pirate(&pirate)?, &args, need_seed()?)?;
            commands::output_text(g.out.as_deref(), &text)?;
        }
        Command::Experiment { timings } => {
            let mut cfg = cfg.ok_or_else(|| CliError::Usage("experiment needs --config".into()))?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            if let Some(t) = g.trials {
                cfg.params.trials = t;
            }
            cfg.params.engine = engine;
            let paths = commands::experiment(&cfg, g.out.as_deref(), timings.as_deref(), dim_cap)?;
            eprintln!("wrote {} and {}", paths.csv.display(), paths.summary.display());
        }
        Command::Verify { csv, summary } => {
            commands::verify(&csv, &summary)?;
            eprintln!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
