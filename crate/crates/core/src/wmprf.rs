//! Watermarking PRF on top of the extraction-less scheme.
//!
//! Marking embeds `m ‖ 0` (so the inner scheme carries `k + 1` bits).
//! Extraction runs the approximate projective implementation against the
//! simulated distributions `D_{τ,k+1}, D_{τ,1}, …, D_{τ,k}` in that order,
//! threading the pirate's collapsed state from one call into the next:
//!
//! * `p̃_{k+1} < 1/2 + ε − 4ε′` means unmarked;
//! * `p̃_i > 1/2 + ε − 4(i+1)ε′` decodes bit `i` as 0;
//! * `p̃_i < 1/2 − ε + 4(i+1)ε′` decodes bit `i` as 1;
//! * anything in between stops and returns `0^k`, flagged as a fallback.
//!
//! with `ε′ = ε / (4(k+1))`.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::api::{self, ApiParams, ApiTranscript, Direction, Engine, FastApi};
use crate::bits::Bits;
use crate::circuit::Obfuscator;
use crate::elwm::{self, ElwmParams, MarkedCircuit, PrfKey, Tag, TripleDistribution};
use crate::error::{Error, Result};
use crate::quantum::{QuantumProgram, StateVector, DEFAULT_DIM_CAP};
use crate::spectral::{MixedBinaryPOVM, SpectralMeasurement};

pub const DEFAULT_DELTA_PRIME: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtractParams {
    pub eps: f64,
    pub k: usize,
    pub eps_prime: f64,
    pub delta_prime: f64,
    pub coins: usize,
    pub engine: Engine,
    pub dim_cap: usize,
}

impl ExtractParams {
    pub fn new(eps: f64, k: usize, delta_prime: f64, coins: usize, engine: Engine) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::InvalidParameter("eps must lie in (0, 1/2]"));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("message length must be positive"));
        }
        if !(delta_prime > 0.0 && delta_prime < 1.0) {
            return Err(Error::InvalidParameter("delta_prime must lie in (0, 1)"));
        }
        if coins == 0 {
            return Err(Error::InvalidParameter("coin space must be non-empty"));
        }
        let eps_prime = eps / (4.0 * (k as f64 + 1.0));
        Ok(Self { eps, k, eps_prime, delta_prime, coins, engine, dim_cap: DEFAULT_DIM_CAP })
    }

    pub fn with_dim_cap(mut self, cap: usize) -> Self {
        self.dim_cap = cap;
        self
    }

    pub fn api_params(&self) -> Result<ApiParams> {
        Ok(ApiParams::new(self.eps_prime, self.delta_prime)?.with_dim_cap(self.dim_cap))
    }

    /// `1/2 + ε − 4ε′`
    pub fn unmarked_threshold(&self) -> f64 {
        0.5 + self.eps - 4.0 * self.eps_prime
    }

    /// `1/2 + ε − 4(i+1)ε′`
    pub fn zero_threshold(&self, i: usize) -> f64 {
        0.5 + self.eps - 4.0 * (i as f64 + 1.0) * self.eps_prime
    }

    /// `1/2 − ε + 4(i+1)ε′`
    pub fn one_threshold(&self, i: usize) -> f64 {
        0.5 - self.eps + 4.0 * (i as f64 + 1.0) * self.eps_prime
    }

    /// `1/2 + ε`
    pub fn live_threshold(&self) -> f64 {
        0.5 + self.eps
    }
}

/// Parameters of the inner scheme for `k`-bit marks.
pub fn elwm_params(k: usize, seed_bits: usize, range_bits: usize) -> Result<ElwmParams> {
    ElwmParams::new(k + 1, seed_bits, range_bits)
}

pub fn gen<R: RngCore + ?Sized>(
    k: usize,
    seed_bits: usize,
    range_bits: usize,
    obf: &dyn Obfuscator,
    rng: &mut R,
) -> Result<(PrfKey, Tag)> {
    elwm::gen(elwm_params(k, seed_bits, range_bits)?, obf, rng)
}

/// Marks `m` by embedding `m ‖ 0`.
pub fn wm_mark(prfk: &PrfKey, m: &Bits, obf: &dyn Obfuscator) -> Result<MarkedCircuit> {
    let k = prfk.params.msg_bits - 1;
    if m.len() != k {
        return Err(Error::LengthMismatch { expected: k, actual: m.len() });
    }
    elwm::mark(prfk, &m.concat(&Bits::zeros(1)), obf)
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Decoded {
    Message(Bits),
    Unmarked,
    /// The loop stopped in the middle band at bit `at` and returned `0^k`.
    ZeroFallback {
        at: usize,
    },
}

impl Decoded {
    /// The extracted mark: `None` for unmarked, `0^k` for the fallback.
    pub fn mark(&self, k: usize) -> Option<Bits> {
        match self {
            Self::Message(m) => Some(m.clone()),
            Self::Unmarked => None,
            Self::ZeroFallback { .. } => Some(Bits::zeros(k)),
        }
    }

    /// Applies the threshold rules to `p̃_{k+1}, p̃_1, …`.
    pub fn from_estimates(p_tilde: &[f64], params: &ExtractParams) -> Result<Self> {
        let first = *p_tilde.first().ok_or(Error::Invariant("no estimates"))?;
        if first < params.unmarked_threshold() {
            return Ok(Self::Unmarked);
        }
        let mut bits = Vec::with_capacity(params.k);
        for i in 1..=params.k {
            let p = *p_tilde.get(i).ok_or(Error::Invariant("estimate list ends before a decision"))?;
            if p > params.zero_threshold(i) {
                bits.push(false);
            } else if p < params.one_threshold(i) {
                bits.push(true);
            } else {
                return Ok(Self::ZeroFallback { at: i });
            }
        }
        Ok(Self::Message(Bits::from_bools(&bits)))
    }
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtractionReport {
    /// `p̃_{k+1}, p̃_1, …` up to the exit point.
    pub p_tilde: Vec<f64>,
    pub decoded: Decoded,
    pub transcripts: Vec<ApiTranscript>,
}

impl ExtractionReport {
    pub fn mark(&self, k: usize) -> Option<Bits> {
        self.decoded.mark(k)
    }
}

/// The per-index POVMs of a pirate program, built once and reused for every
/// fresh copy of that pirate.
#[derive(Clone, Debug)]
pub struct Extractor {
    params: ExtractParams,
    api: ApiParams,
    /// position 0 is index `k+1`, position `i` is index `i`
    povms: Vec<MixedBinaryPOVM>,
    fast: Vec<FastApi>,
}

impl Extractor {
    pub fn new(tag: &Tag, pirate: &QuantumProgram, params: ExtractParams, sim_key: &[u8]) -> Result<Self> {
        if tag.params.msg_bits != params.k + 1 {
            return Err(Error::InvalidParameter("tag was generated for a different message length"));
        }
        pirate.check_cap(params.dim_cap)?;
        let api = params.api_params()?;
        let povms = core::iter::once(params.k + 1)
            .chain(1..=params.k)
            .map(|i| TripleDistribution::sim(tag, i, params.coins, sim_key)?.povm(pirate))
            .collect::<Result<Vec<_>>>()?;
        let fast = match params.engine {
            Engine::Fast => povms.iter().map(FastApi::prepare).collect::<Result<_>>()?,
            Engine::Exact => Vec::new(),
        };
        Ok(Self { params, api, povms, fast })
    }

    pub fn params(&self) -> &ExtractParams {
        &self.params
    }

    fn step<R: Rng + ?Sized>(&self, pos: usize, state: &StateVector, rng: &mut R) -> Result<api::ApiOutcome> {
        match self.params.engine {
            Engine::Fast => self.fast[pos].run(state, &self.api, Direction::Forward, rng),
            Engine::Exact => api::api_exact(&self.povms[pos], state, &self.api, Direction::Forward, rng),
        }
    }

    pub fn run<R: Rng + ?Sized>(&self, state: &StateVector, rng: &mut R) -> Result<ExtractionReport> {
        let mut p_tilde = Vec::with_capacity(self.params.k + 1);
        let mut transcripts = Vec::with_capacity(self.params.k + 1);
        let mut state = state.clone();
        for pos in 0..=self.params.k {
            let out = self.step(pos, &state, rng)?;
            p_tilde.push(out.estimate);
            transcripts.push(out.transcript);
            state = out.post;
            let p = *p_tilde.last().expect("just pushed");
            let stop = if pos == 0 {
                p < self.params.unmarked_threshold()
            } else {
                p <= self.params.zero_threshold(pos) && p >= self.params.one_threshold(pos)
            };
            if stop {
                break;
            }
        }
        let decoded = Decoded::from_estimates(&p_tilde, &self.params)?;
        Ok(ExtractionReport { p_tilde, decoded, transcripts })
    }
}

pub fn extract<R: Rng + ?Sized>(
    tag: &Tag,
    pirate: &QuantumProgram,
    params: ExtractParams,
    sim_key: &[u8],
    rng: &mut R,
) -> Result<ExtractionReport> {
    Extractor::new(tag, pirate, params, sim_key)?.run(pirate.state(), rng)
}

/// `ProjImp(M_D)` for the real distribution, the measurement behind Live.
#[derive(Clone, Debug)]
pub struct LiveTest {
    threshold: f64,
    spectral: SpectralMeasurement,
}

impl LiveTest {
    pub fn new(prfk: &PrfKey, pirate: &QuantumProgram, params: &ExtractParams, real_key: &[u8]) -> Result<Self> {
        pirate.check_cap(params.dim_cap)?;
        let povm = TripleDistribution::real(prfk, params.coins, real_key)?.povm(pirate)?;
        Ok(Self { threshold: params.live_threshold(), spectral: SpectralMeasurement::of(&povm)? })
    }

    /// The sampled eigenvalue and whether it makes the pirate live.
    pub fn measure<R: Rng + ?Sized>(&self, state: &StateVector, rng: &mut R) -> Result<(f64, bool)> {
        let (p, _) = self.spectral.measure(state, rng)?;
        Ok((p, p >= self.threshold))
    }

    /// `Pr[Live]` on `state`, computed exactly.
    pub fn probability(&self, state: &StateVector) -> Result<f64> {
        let d = self.spectral.outcome_distribution(state)?;
        Ok(d.support().iter().zip(d.masses()).filter(|(p, _)| **p >= self.threshold).map(|(_, m)| m).sum())
    }
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub live_value: f64,
    pub live: bool,
    pub report: ExtractionReport,
    pub good_ext: bool,
    pub bad_ext: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventTally {
    pub trials: usize,
    pub live: usize,
    pub good_ext: usize,
    pub bad_ext: usize,
    pub unmarked: usize,
    pub zero_fallback: usize,
}

impl EventTally {
    pub fn record(&mut self, t: &TrialOutcome) {
        self.trials += 1;
        self.live += t.live as usize;
        self.good_ext += t.good_ext as usize;
        self.bad_ext += t.bad_ext as usize;
        self.unmarked += matches!(t.report.decoded, Decoded::Unmarked) as usize;
        self.zero_fallback += matches!(t.report.decoded, Decoded::ZeroFallback { .. }) as usize;
    }

    pub fn freq(count: usize, trials: usize) -> f64 {
        if trials == 0 {
            0.0
        } else {
            count as f64 / trials as f64
        }
    }
}

/// Measurements prepared for one pirate, keys, and embedded message.
#[derive(Clone, Debug)]
pub struct EventClassifier {
    pirate: QuantumProgram,
    message: Bits,
    live: LiveTest,
    extractor: Extractor,
}

impl EventClassifier {
    pub fn new(
        pirate: QuantumProgram,
        prfk: &PrfKey,
        tag: &Tag,
        message: &Bits,
        params: ExtractParams,
        real_key: &[u8],
        sim_key: &[u8],
    ) -> Result<Self> {
        let live = LiveTest::new(prfk, &pirate, &params, real_key)?;
        let extractor = Extractor::new(tag, &pirate, params, sim_key)?;
        Ok(Self { pirate: pirate.clone(), message: message.clone(), live, extractor })
    }

    pub fn pirate(&self) -> &QuantumProgram {
        &self.pirate
    }

    pub fn live_test(&self) -> &LiveTest {
        &self.live
    }

    /// Live on one fresh copy, extraction on another.
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialOutcome> {
        let (live_value, live) = self.live.measure(self.pirate.state(), rng)?;
        let report = self.extractor.run(self.pirate.state(), rng)?;
        let mark = report.mark(self.extractor.params.k);
        let good_ext = mark.is_some();
        let bad_ext = mark.is_some_and(|m| m != self.message);
        Ok(TrialOutcome { live_value, live, report, good_ext, bad_ext })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn classify_events<R: Rng + ?Sized>(
    pirate: &QuantumProgram,
    prfk: &PrfKey,
    tag: &Tag,
    message: &Bits,
    params: ExtractParams,
    trials: usize,
    real_key: &[u8],
    sim_key: &[u8],
    rng: &mut R,
) -> Result<EventTally> {
    let c = EventClassifier::new(pirate.clone(), prfk, tag, message, params, real_key, sim_key)?;
    let mut tally = EventTally::default();
    for _ in 0..trials {
        tally.record(&c.trial(rng)?);
    }
    Ok(tally)
}
