//! Batch unremovability experiments.
//!
//! Every `(pirate, trial)` pair owns a ChaCha20 stream seeded by
//! `keyed_seed(seed, "trial" ‖ pirate ‖ trial)`, draws fresh keys and a
//! fresh message from it, and runs one Live measurement plus one
//! extraction. Trials run on the rayon pool and are merged back in index
//! order, so the CSV does not depend on scheduling.

use std::sync::Arc;
use std::time::{Duration, Instant};

use qwm_core::bits::Bits;
use qwm_core::circuit::IdentityObfuscator;
use qwm_core::crypto::keyed_seed;
use qwm_core::pirates::PirateSpec;
use qwm_core::wmprf::{self, Decoded, EventClassifier, ExtractParams};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub fn trial_rng(seed: u64, pirate: usize, trial: usize) -> ChaCha20Rng {
    let mut input = b"trial".to_vec();
    input.extend_from_slice(&(pirate as u64).to_be_bytes());
    input.extend_from_slice(&(trial as u64).to_be_bytes());
    ChaCha20Rng::from_seed(keyed_seed(&seed.to_be_bytes(), &input))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub pirate_index: usize,
    pub pirate: String,
    pub trial: usize,
    pub message: String,
    pub live_value: f64,
    pub live: u8,
    pub decoded: String,
    pub good_ext: u8,
    pub bad_ext: u8,
    /// `p̃` in extraction order (`k+1` first), `;`-separated
    pub p_tilde: String,
}

impl TrialRow {
    pub fn p_tilde_values(&self) -> CliResult<Vec<f64>> {
        if self.p_tilde.is_empty() {
            return Ok(Vec::new());
        }
        self.p_tilde
            .split(';')
            .map(|v| v.parse().map_err(|_| CliError::decode(format!("bad p_tilde entry {v:?}"))))
            .collect()
    }
}

pub fn decoded_label(d: &Decoded) -> String {
    match d {
        Decoded::Message(m) => m.to_binary_string(),
        Decoded::Unmarked => "unmarked".into(),
        Decoded::ZeroFallback { at } => format!("fallback:{at}"),
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";")
}

fn random_key(rng: &mut ChaCha20Rng) -> [u8; 16] {
    let mut k = [0u8; 16];
    rng.fill_bytes(&mut k);
    k
}

/// One trial: fresh keys, a random message, one Live sample and one extraction.
pub fn run_trial(
    cfg: &ExperimentConfig,
    params: ExtractParams,
    pirate_index: usize,
    trial: usize,
) -> CliResult<(TrialRow, Duration)> {
    let start = Instant::now();
    let spec: &PirateSpec = &cfg.pirates[pirate_index];
    let p = &cfg.params;
    let mut rng = trial_rng(cfg.seed, pirate_index, trial);
    let (prfk, tag) = wmprf::gen(p.k, p.seed_bits, p.range_bits, &IdentityObfuscator, &mut rng)?;
    let message = Bits::random(&mut rng, p.k);
    let marked = Arc::new(wmprf::wm_mark(&prfk, &message, &IdentityObfuscator)?);
    let noise_key = random_key(&mut rng);
    let real_key = random_key(&mut rng);
    let sim_key = random_key(&mut rng);
    let pirate = spec.build(&marked, &noise_key)?;
    let classifier = EventClassifier::new(pirate, &prfk, &tag, &message, params, &real_key, &sim_key)?;
    let out = classifier.trial(&mut rng)?;
    let row = TrialRow {
        pirate_index,
        pirate: spec.label(),
        trial,
        message: message.to_binary_string(),
        live_value: out.live_value,
        live: out.live as u8,
        decoded: decoded_label(&out.report.decoded),
        good_ext: out.good_ext as u8,
        bad_ext: out.bad_ext as u8,
        p_tilde: join_floats(&out.report.p_tilde),
    };
    Ok((row, start.elapsed()))
}

pub struct ExperimentRun {
    pub rows: Vec<TrialRow>,
    pub runtimes: Vec<Duration>,
}

pub fn run_experiment(cfg: &ExperimentConfig, dim_cap: Option<usize>) -> CliResult<ExperimentRun> {
    cfg.validate()?;
    let params = cfg.params.extract_params(dim_cap)?;
    let trials = cfg.params.trials;
    let jobs: Vec<(usize, usize)> = (0..cfg.pirates.len()).flat_map(|p| (0..trials).map(move |t| (p, t))).collect();
    let results: Vec<CliResult<(TrialRow, Duration)>> =
        jobs.par_iter().map(|&(p, t)| run_trial(cfg, params, p, t)).collect();
    let mut rows = Vec::with_capacity(jobs.len());
    let mut runtimes = Vec::with_capacity(jobs.len());
    for (&(pirate, trial), r) in jobs.iter().zip(results) {
        let (row, dt) = r.map_err(|e| CliError::Trial { pirate, trial, source: Box::new(e) })?;
        rows.push(row);
        runtimes.push(dt);
    }
    Ok(ExperimentRun { rows, runtimes })
}

pub fn rows_to_csv(rows: &[TrialRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::decode(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::decode(format!("csv: {e}")))
}

pub fn rows_from_csv(bytes: &[u8]) -> CliResult<Vec<TrialRow>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .map(|r| r.map_err(|e| CliError::decode(format!("csv: {e}"))))
        .collect()
}

pub fn timings_csv(rows: &[TrialRow], runtimes: &[Duration]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::decode(format!("csv: {e}"));
    w.write_record(["pirate_index", "trial", "runtime_us"]).map_err(io)?;
    for (r, dt) in rows.iter().zip(runtimes) {
        w.write_record([r.pirate_index.to_string(), r.trial.to_string(), dt.as_micros().to_string()]).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::decode(format!("csv: {e}")))
}

/// A frequency with its 95% Wilson score interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: usize,
    pub freq: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub half_width: f64,
}

impl Frequency {
    pub fn new(count: usize, n: usize) -> Self {
        if n == 0 {
            return Self { count, freq: 0.0, wilson_low: 0.0, wilson_high: 1.0, half_width: 0.5 };
        }
        let nf = n as f64;
        let p = count as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Self {
            count,
            freq: p,
            wilson_low: (centre - half).max(0.0),
            wilson_high: (centre + half).min(1.0),
            half_width: half,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PirateSummary {
    pub pirate_index: usize,
    pub pirate: String,
    pub trials: usize,
    pub live: Frequency,
    pub good_ext: Frequency,
    pub bad_ext: Frequency,
    pub unmarked: Frequency,
    pub zero_fallback: Frequency,
    pub mean_live_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub pirates: Vec<PirateSummary>,
}

pub fn summarize(seed: u64, rows: &[TrialRow]) -> Summary {
    let mut indices: Vec<usize> = rows.iter().map(|r| r.pirate_index).collect();
    indices.sort_unstable();
    indices.dedup();
    let pirates = indices
        .into_iter()
        .map(|idx| {
            let rs: Vec<&TrialRow> = rows.iter().filter(|r| r.pirate_index == idx).collect();
            let n = rs.len();
            let count = |f: &dyn Fn(&TrialRow) -> bool| rs.iter().filter(|r| f(r)).count();
            PirateSummary {
                pirate_index: idx,
                pirate: rs[0].pirate.clone(),
                trials: n,
                live: Frequency::new(count(&|r| r.live == 1), n),
                good_ext: Frequency::new(count(&|r| r.good_ext == 1), n),
                bad_ext: Frequency::new(count(&|r| r.bad_ext == 1), n),
                unmarked: Frequency::new(count(&|r| r.decoded == "unmarked"), n),
                zero_fallback: Frequency::new(count(&|r| r.decoded.starts_with("fallback:")), n),
                mean_live_value: rs.iter().map(|r| r.live_value).sum::<f64>() / n as f64,
            }
        })
        .collect();
    Summary { seed, pirates }
}

pub fn summary_json(s: &Summary) -> CliResult<String> {
    let mut out = serde_json::to_string_pretty(s).map_err(|e| CliError::decode(format!("json: {e}")))?;
    out.push('\n');
    Ok(out)
}

/// Recomputes the summary from the rows and compares it with `summary`.
pub fn verify(rows: &[TrialRow], summary: &Summary) -> CliResult<()> {
    let again = summarize(summary.seed, rows);
    if again.pirates.len() != summary.pirates.len() {
        return Err(CliError::Verify(format!(
            "summary lists {} pirates, csv has {}",
            summary.pirates.len(),
            again.pirates.len()
        )));
    }
    for (a, b) in again.pirates.iter().zip(&summary.pirates) {
        if a != b {
            return Err(CliError::Verify(format!("pirate {} ({}) does not match the csv", b.pirate_index, b.pirate)));
        }
    }
    Ok(())
}
