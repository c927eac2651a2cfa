//! TOML experiment configuration.
//!
//! ```toml
//! seed = 42
//!
//! [params]
//! k = 4
//! seed_bits = 8
//! range_bits = 16
//! eps = 0.25
//! delta_prime = 0.01
//! coins = 8
//! engine = "fast"
//! trials = 50
//!
//! [[pirates]]
//! kind = "honest"
//!
//! [[pirates]]
//! kind = "superposed"
//! theta = 0.5235987755982988
//! a = { kind = "honest" }
//! b = { kind = "coin" }
//!
//! [outputs]
//! csv = "trials.csv"
//! summary = "summary.json"
//! ```

use std::path::{Path, PathBuf};

use qwm_core::api::Engine;
use qwm_core::pirates::PirateSpec;
use qwm_core::wmprf::{ExtractParams, DEFAULT_DELTA_PRIME};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
    pub pirates: Vec<PirateSpec>,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub k: usize,
    pub seed_bits: usize,
    pub range_bits: usize,
    pub eps: f64,
    pub delta_prime: f64,
    pub coins: usize,
    pub engine: Engine,
    pub trials: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            k: 4,
            seed_bits: 8,
            range_bits: 16,
            eps: 0.25,
            delta_prime: DEFAULT_DELTA_PRIME,
            coins: 8,
            engine: Engine::Fast,
            trials: 50,
        }
    }
}

impl Params {
    pub fn extract_params(&self, dim_cap: Option<usize>) -> CliResult<ExtractParams> {
        let p = ExtractParams::new(self.eps, self.k, self.delta_prime, self.coins, self.engine)?;
        Ok(match dim_cap {
            Some(cap) => p.with_dim_cap(cap),
            None => p,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { csv: "trials.csv".into(), summary: "summary.json".into() }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let c: Self = toml::from_str(text).map_err(|e| CliError::decode(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::decode(format!("config: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        let p = &self.params;
        if p.trials == 0 {
            return Err(CliError::parameter("trials must be positive"));
        }
        if self.pirates.is_empty() {
            return Err(CliError::parameter("at least one pirate is required"));
        }
        qwm_core::wmprf::elwm_params(p.k, p.seed_bits, p.range_bits)?;
        p.extract_params(None)?;
        for spec in &self.pirates {
            check_pirate(spec)?;
        }
        Ok(())
    }
}

fn check_pirate(spec: &PirateSpec) -> CliResult<()> {
    match spec {
        PirateSpec::Noisy { eta } if !(0.0..=1.0).contains(eta) => {
            Err(CliError::parameter(format!("noisy pirate eta {eta} is outside [0, 1]")))
        }
        PirateSpec::Superposed { theta, a, b } => {
            if !theta.is_finite() {
                return Err(CliError::parameter("superposed pirate theta must be finite"));
            }
            check_pirate(a)?;
            check_pirate(b)
        }
        _ => Ok(()),
    }
}

/// Parses the compact pirate syntax used on the command line:
/// `honest`, `anti`, `coin`, `noisy:ETA`, `sp:THETA` (honest over coin) or
/// `sp:THETA:A:B` with `A`, `B` simple pirates.
pub fn parse_pirate(s: &str) -> CliResult<PirateSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {t:?} in pirate {s:?}")));
    let spec = match parts.as_slice() {
        ["honest"] => PirateSpec::Honest,
        ["anti"] => PirateSpec::Anti,
        ["coin"] => PirateSpec::Coin,
        ["noisy", eta] => PirateSpec::Noisy { eta: num(eta)? },
        ["sp", theta] => PirateSpec::superposed(num(theta)?, PirateSpec::Honest, PirateSpec::Coin),
        ["sp", theta, a, b] => PirateSpec::superposed(num(theta)?, parse_pirate(a)?, parse_pirate(b)?),
        _ => return Err(CliError::Usage(format!("unknown pirate {s:?}"))),
    };
    check_pirate(&spec)?;
    Ok(spec)
}
