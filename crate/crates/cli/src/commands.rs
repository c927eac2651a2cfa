//! File-in/file-out wrappers over the library operations.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use qwm_core::api::Engine;
use qwm_core::bits::Bits;
use qwm_core::circuit::IdentityObfuscator;
use qwm_core::crypto::keyed_seed;
use qwm_core::elwm::{MarkedCircuit, PrfKey, Tag, TripleDistribution};
use qwm_core::pirates::PirateSpec;
use qwm_core::wmprf::{self, ExtractParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::{self, decoded_label};
use crate::formats::FileFormat;

pub const DIM_CAP_ENV: &str = "QWM_DIM_CAP";
pub const KEY_FILE: &str = "prf.key";
pub const TAG_FILE: &str = "tag.key";

pub fn dim_cap_from_env() -> CliResult<Option<usize>> {
    match std::env::var(DIM_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::parameter(format!("{DIM_CAP_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Command-scoped randomness: `keyed_seed(seed, label)`.
pub fn command_rng(seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(keyed_seed(&seed.to_be_bytes(), label.as_bytes()))
}

pub fn command_key(seed: u64, label: &str) -> [u8; 32] {
    keyed_seed(&seed.to_be_bytes(), label.as_bytes())
}

pub fn output_text(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn keygen(
    seed: u64,
    k: usize,
    seed_bits: usize,
    range_bits: usize,
    out_dir: &Path,
) -> CliResult<(PathBuf, PathBuf)> {
    let mut rng = command_rng(seed, "keygen");
    let (prfk, tag) = wmprf::gen(k, seed_bits, range_bits, &IdentityObfuscator, &mut rng)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let (kp, tp) = (out_dir.join(KEY_FILE), out_dir.join(TAG_FILE));
    prfk.save(&kp)?;
    tag.save(&tp)?;
    Ok((kp, tp))
}

pub fn parse_bits(s: &str) -> CliResult<Bits> {
    Bits::parse_binary(s.trim()).map_err(|_| CliError::Usage(format!("{s:?} is not a binary string")))
}

pub fn mark(key: &Path, message: &str, out: &Path) -> CliResult<()> {
    let prfk = PrfKey::load(key)?;
    let m = parse_bits(message)?;
    wmprf::wm_mark(&prfk, &m, &IdentityObfuscator)?.save(out)
}

type Evaluator = Box<dyn Fn(&Bits) -> qwm_core::Result<Bits>>;

pub enum EvalSource {
    Circuit(PathBuf),
    Key(PathBuf),
}

/// `x y` lines for the given points, or for `random` uniform points drawn
/// from the seed.
pub fn eval(src: &EvalSource, points: &[String], random: Option<usize>, seed: u64) -> CliResult<String> {
    let (domain, f): (usize, Evaluator) = match src {
        EvalSource::Circuit(p) => {
            let c = MarkedCircuit::load(p)?;
            (c.domain_bits(), Box::new(move |x| c.eval(x)))
        }
        EvalSource::Key(p) => {
            let k = PrfKey::load(p)?;
            (k.params.domain_bits(), Box::new(move |x| k.eval(x)))
        }
    };
    let mut xs = points.iter().map(|s| parse_bits(s)).collect::<CliResult<Vec<_>>>()?;
    if let Some(n) = random {
        let mut rng = command_rng(seed, "eval");
        xs.extend((0..n).map(|_| Bits::random(&mut rng, domain)));
    }
    let mut out = String::new();
    for x in &xs {
        out.push_str(&format!("{x} {}\n", f(x)?));
    }
    Ok(out)
}

/// `γ x y` lines for `D_{τ,i}` over `coins` coins.
pub fn sim(tag: &Path, index: usize, coins: usize, seed: u64) -> CliResult<String> {
    let tag = Tag::load(tag)?;
    let dist = TripleDistribution::sim(&tag, index, coins, &command_key(seed, "sim"))?;
    Ok(dist.triples().iter().map(|t| format!("{} {} {}\n", t.gamma as u8, t.x, t.y)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractOutput {
    pub pirate: String,
    pub decoded: String,
    pub mark: Option<String>,
    pub p_tilde: Vec<f64>,
    pub agreements: Vec<usize>,
    pub flush_rounds: Vec<usize>,
}

pub struct ExtractArgs {
    pub eps: f64,
    pub delta_prime: f64,
    pub coins: usize,
    pub engine: Engine,
    pub dim_cap: Option<usize>,
}

pub fn extract(tag: &Path, circuit: &Path, pirate: &PirateSpec, args: &ExtractArgs, seed: u64) -> CliResult<String> {
    let tag = Tag::load(tag)?;
    let marked = Arc::new(MarkedCircuit::load(circuit)?);
    let k = tag
        .params
        .msg_bits
        .checked_sub(1)
        .filter(|k| *k > 0)
        .ok_or_else(|| CliError::parameter("tag carries no message bits"))?;
    let mut params = ExtractParams::new(args.eps, k, args.delta_prime, args.coins, args.engine)?;
    if let Some(cap) = args.dim_cap {
        params = params.with_dim_cap(cap);
    }
    let prog = pirate.build(&marked, &command_key(seed, "noise"))?;
    let mut rng = command_rng(seed, "extract");
    let report = wmprf::extract(&tag, &prog, params, &command_key(seed, "sim"), &mut rng)?;
    let out = ExtractOutput {
        pirate: pirate.label(),
        decoded: decoded_label(&report.decoded),
        mark: report.mark(k).map(|m| m.to_binary_string()),
        p_tilde: report.p_tilde.clone(),
        agreements: report.transcripts.iter().map(|t| t.agreements).collect(),
        flush_rounds: report.transcripts.iter().map(|t| t.flush_rounds).collect(),
    };
    let mut s = serde_json::to_string_pretty(&out).map_err(|e| CliError::decode(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub struct ExperimentPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// Runs the batch and writes the CSV and summary. Paths in the config are
/// resolved against `out_dir` when one is given.
pub fn experiment(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    timings: Option<&Path>,
    dim_cap: Option<usize>,
) -> CliResult<ExperimentPaths> {
    let resolve = |p: &Path| match out_dir {
        Some(d) => d.join(p),
        None => p.to_path_buf(),
    };
    let paths = ExperimentPaths { csv: resolve(&cfg.outputs.csv), summary: resolve(&cfg.outputs.summary) };
    let run = experiment::run_experiment(cfg, dim_cap)?;
    for p in [&paths.csv, &paths.summary] {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    let csv = experiment::rows_to_csv(&run.rows)?;
    std::fs::write(&paths.csv, csv).map_err(|e| CliError::io(&paths.csv, e))?;
    let summary = experiment::summary_json(&experiment::summarize(cfg.seed, &run.rows))?;
    std::fs::write(&paths.summary, summary).map_err(|e| CliError::io(&paths.summary, e))?;
    if let Some(t) = timings {
        let bytes = experiment::timings_csv(&run.rows, &run.runtimes)?;
        std::fs::write(t, bytes).map_err(|e| CliError::io(t, e))?;
    }
    Ok(paths)
}

pub fn verify(csv: &Path, summary: &Path) -> CliResult<()> {
    let bytes = std::fs::read(csv).map_err(|e| CliError::io(csv, e))?;
    let rows = experiment::rows_from_csv(&bytes)?;
    let text = std::fs::read_to_string(summary).map_err(|e| CliError::io(summary, e))?;
    let s: experiment::Summary = serde_json::from_str(&text).map_err(|e| CliError::decode(format!("summary: {e}")))?;
    experiment::verify(&rows, &s)
}
