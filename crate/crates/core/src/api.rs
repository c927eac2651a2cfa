//! Approximate projective implementation (API) of a mixed binary POVM.
//!
//! The estimator works on `H_R ⊗ H`, where `R` indexes the coin space of the
//! distribution. Starting from `|1_R⟩|ψ⟩` it alternates the controlled
//! projection `CProj¹ = Σ_r |r⟩⟨r| ⊗ Π_r` with `IsU = |1_R⟩⟨1_R| ⊗ I`
//! for `2T` measurements and reports the fraction of adjacent agreeing bits.
//!
//! Two engines share one contract:
//!
//! * [`api_exact`] simulates every measurement on the full `s·d` register.
//! * [`FastApi`] uses the Jordan structure of `(IsU, CProj¹)`: inside block
//!   `j` every measurement agrees with the previous bit independently with
//!   probability `p_j`, so the bit string is a mixture of Bernoulli runs. The
//!   `v_j` are `|1_R⟩ ⊗ φ_j` with `φ_j` the eigenvectors of `P_D`, and the
//!   amplitude of a run of `N` bits with `A` agreements in block `j` is
//!   `p_j^{A/2} (1-p_j)^{(N-A)/2}` up to a sign shared by all blocks. The
//!   collapsed state is therefore a deterministic function of `(A, N)`, which
//!   makes the fast engine exact in law for the estimate and the post state.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::quantum::{measure_with_projection, BinaryProjector, StateVector, DEFAULT_DIM_CAP};
use crate::spectral::{sample_index, MixedBinaryPOVM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Engine {
    Exact,
    Fast,
}

/// Which projector family the controlled projection accepts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `P = {(Π_r, I − Π_r)}`
    Forward,
    /// `P^rev = {(I − Π_r, Π_r)}`
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApiParams {
    pub eps: f64,
    pub delta: f64,
    /// `⌈ln(4/δ)/ε²⌉`
    pub t: usize,
    pub max_flush_rounds: usize,
    pub dim_cap: usize,
}

impl ApiParams {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter("eps must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter("delta must lie in (0, 1)"));
        }
        let t = libm::ceil(libm::log(4.0 / delta) / (eps * eps)) as usize;
        Ok(Self { eps, delta, t, max_flush_rounds: 64 * t, dim_cap: DEFAULT_DIM_CAP })
    }

    pub fn with_dim_cap(mut self, cap: usize) -> Self {
        self.dim_cap = cap;
        self
    }

    pub fn with_max_flush_rounds(mut self, rounds: usize) -> Self {
        self.max_flush_rounds = rounds;
        self
    }

    /// Grid resolution of the estimate, `2T`.
    pub fn resolution(&self) -> usize {
        2 * self.t
    }
}

/// Record of one API run. `bits` excludes the implicit leading `1`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ApiTranscript {
    #[cfg_attr(feature = "serde", serde(skip))]
    pub bits: Vec<bool>,
    /// Agreements among `(1, b_1, …, b_{2T})`.
    pub agreements: usize,
    pub estimate: f64,
    pub flush_rounds: usize,
    /// Agreements over the whole list, flush included.
    pub total_agreements: usize,
    pub total_bits: usize,
}

impl ApiTranscript {
    fn from_bits(bits: Vec<bool>, t: usize, flush_rounds: usize) -> Self {
        let agreements_in = |upto: usize| {
            core::iter::once(&true).chain(&bits[..upto]).zip(&bits[..upto]).filter(|(a, b)| a == b).count()
        };
        let agreements = agreements_in(2 * t);
        let total_agreements = agreements_in(bits.len());
        Self {
            estimate: agreements as f64 / (2 * t) as f64,
            agreements,
            flush_rounds,
            total_agreements,
            total_bits: bits.len(),
            bits,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApiOutcome {
    pub estimate: f64,
    pub post: StateVector,
    pub transcript: ApiTranscript,
    /// Index of the sampled Jordan block (fast engine only).
    pub subspace: Option<usize>,
}

/// The pair `(CProj¹, IsU)` on `H_R ⊗ H`, stored as its per-coin blocks.
/// Register layout: basis index `r·d + h`.
#[derive(Clone, Debug)]
pub struct ControlledProjection<'a> {
    blocks: &'a [BinaryProjector],
    dim: usize,
}

impl<'a> ControlledProjection<'a> {
    pub fn new(povm: &'a MixedBinaryPOVM) -> Self {
        Self { blocks: povm.projectors(), dim: povm.dim() }
    }

    pub fn coins(&self) -> usize {
        self.blocks.len()
    }

    pub fn register_dim(&self) -> usize {
        self.coins() * self.dim
    }

    /// `|1_R⟩ ⊗ ψ`
    pub fn lift(&self, psi: &StateVector) -> Vec<C64> {
        let w = C64::new(1.0 / libm::sqrt(self.coins() as f64), 0.0);
        let mut out = Vec::with_capacity(self.register_dim());
        for _ in 0..self.coins() {
            out.extend(psi.amplitudes().iter().map(|a| a * w));
        }
        out
    }

    /// `CProj¹ Φ`
    pub fn apply_cproj(&self, phi: &[C64]) -> Vec<C64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(phi.len());
        for (r, block) in self.blocks.iter().enumerate() {
            out.extend(block.accept().apply(&phi[r * d..(r + 1) * d]));
        }
        out
    }

    /// `(|1_R⟩⟨1_R| ⊗ I) Φ`: every block becomes the block average.
    pub fn apply_is_u(&self, phi: &[C64]) -> Vec<C64> {
        let d = self.dim;
        let mut avg = vec![ZERO; d];
        for chunk in phi.chunks(d) {
            for (a, c) in avg.iter_mut().zip(chunk) {
                *a += c;
            }
        }
        let w = 1.0 / self.coins() as f64;
        let avg: Vec<C64> = avg.into_iter().map(|a| a * w).collect();
        let mut out = Vec::with_capacity(phi.len());
        for _ in 0..self.coins() {
            out.extend_from_slice(&avg);
        }
        out
    }

    /// Dense `CProj¹`, for checking the structured path.
    pub fn cproj_matrix(&self) -> BinaryProjector {
        let d = self.dim;
        let mut m = CMatrix::zeros(self.register_dim());
        for (r, block) in self.blocks.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    m[(r * d + i, r * d + j)] = block.accept()[(i, j)];
                }
            }
        }
        BinaryProjector::new(m).expect("block-diagonal of projectors is a projector")
    }

    /// Dense `IsU ⊗ I`.
    pub fn is_u_matrix(&self) -> BinaryProjector {
        let s = self.coins();
        let uniform = CMatrix::from_fn(s, |_, _| C64::new(1.0 / s as f64, 0.0));
        BinaryProjector::new(uniform.kron(&CMatrix::identity(self.dim))).expect("rank-one uniform projector")
    }

    /// The `H` factor of a state accepted by `IsU`.
    fn unlift(&self, phi: &[C64]) -> Result<StateVector> {
        let d = self.dim;
        let mut acc = vec![ZERO; d];
        for chunk in phi.chunks(d) {
            for (a, c) in acc.iter_mut().zip(chunk) {
                *a += c;
            }
        }
        StateVector::normalized(acc)
    }
}

fn check_dims(povm: &MixedBinaryPOVM, state: &StateVector) -> Result<()> {
    if povm.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: povm.dim(), actual: state.dim() });
    }
    Ok(())
}

/// Literal register-level simulation of the estimator.
pub fn api_exact<R: Rng + ?Sized>(
    povm: &MixedBinaryPOVM,
    state: &StateVector,
    params: &ApiParams,
    direction: Direction,
    rng: &mut R,
) -> Result<ApiOutcome> {
    check_dims(povm, state)?;
    let cp = ControlledProjection::new(povm);
    if cp.register_dim() > params.dim_cap {
        return Err(Error::DimensionCap { dim: cp.register_dim(), cap: params.dim_cap });
    }
    let mut phi = cp.lift(state);
    let mut bits = Vec::with_capacity(2 * params.t + 2);

    let step = |phi: &mut Vec<C64>, bits: &mut Vec<bool>, rng: &mut R| -> Result<bool> {
        let accepted = cp.apply_cproj(phi);
        let m = measure_with_projection(phi, accepted, rng)?;
        bits.push(m.outcome ^ (direction == Direction::Reverse));
        *phi = m.post.into_amplitudes();
        let accepted = cp.apply_is_u(phi);
        let m = measure_with_projection(phi, accepted, rng)?;
        bits.push(m.outcome);
        *phi = m.post.into_amplitudes();
        Ok(m.outcome)
    };

    let mut last = true;
    for _ in 0..params.t {
        last = step(&mut phi, &mut bits, rng)?;
    }
    let mut flush_rounds = 0;
    while !last {
        if flush_rounds == params.max_flush_rounds {
            return Err(Error::FlushNonTermination { max_rounds: params.max_flush_rounds });
        }
        flush_rounds += 1;
        last = step(&mut phi, &mut bits, rng)?;
    }
    let transcript = ApiTranscript::from_bits(bits, params.t, flush_rounds);
    Ok(ApiOutcome { estimate: transcript.estimate, post: cp.unlift(&phi)?, transcript, subspace: None })
}

/// Jordan blocks of `(IsU, CProj¹)` through `range(IsU)`, prepared once per
/// distribution and program.
#[derive(Clone, Debug)]
pub struct FastApi {
    /// `p_j`, ascending.
    pub overlaps: Vec<f64>,
    /// `φ_j` with `v_j = |1_R⟩ ⊗ φ_j`.
    pub vectors: Vec<Vec<C64>>,
}

impl FastApi {
    /// `⟨1_R| CProj¹ |1_R⟩ = P_D`, so the `v_j` are lifted eigenvectors of `P_D`.
    pub fn prepare(povm: &MixedBinaryPOVM) -> Result<Self> {
        let e = linalg::hermitian_eigen(povm.accept_operator())?;
        let overlaps = e
            .values
            .into_iter()
            .map(|p| {
                if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                    return Err(Error::EigenvalueOutOfRange { value: p });
                }
                Ok(p.clamp(0.0, 1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { overlaps, vectors: e.vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    fn agree_prob(&self, j: usize, direction: Direction) -> f64 {
        match direction {
            Direction::Forward => self.overlaps[j],
            Direction::Reverse => 1.0 - self.overlaps[j],
        }
    }

    /// `α_j = ⟨φ_j|ψ⟩`
    pub fn amplitudes(&self, state: &StateVector) -> Vec<C64> {
        self.vectors.iter().map(|v| linalg::inner(v, state.amplitudes())).collect()
    }

    /// Collapsed `H` state after a run of `total_bits` measurements with
    /// `total_agreements` agreements.
    pub fn posterior(
        &self,
        state: &StateVector,
        total_agreements: usize,
        total_bits: usize,
        direction: Direction,
    ) -> Result<StateVector> {
        let alphas = self.amplitudes(state);
        let a = total_agreements as f64;
        let b = (total_bits - total_agreements) as f64;
        let log_weights: Vec<Option<f64>> = (0..self.dim())
            .map(|j| {
                if alphas[j].norm_sqr() == 0.0 {
                    return None;
                }
                let q = self.agree_prob(j, direction);
                let term = |count: f64, prob: f64| -> Option<f64> {
                    if count == 0.0 {
                        Some(0.0)
                    } else if prob <= 0.0 {
                        None
                    } else {
                        Some(0.5 * count * libm::log(prob))
                    }
                };
                Some(term(a, q)? + term(b, 1.0 - q)?)
            })
            .collect();
        let max = log_weights.iter().flatten().fold(f64::NEG_INFINITY, |m, &w| m.max(w));
        if max == f64::NEG_INFINITY {
            return Err(Error::Invariant("transcript has zero likelihood under every block"));
        }
        let mut out = vec![ZERO; state.dim()];
        for (j, w) in log_weights.iter().enumerate() {
            if let Some(w) = w {
                let c = alphas[j] * libm::exp(w - max);
                for (o, v) in out.iter_mut().zip(&self.vectors[j]) {
                    *o += v * c;
                }
            }
        }
        StateVector::normalized(out)
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        state: &StateVector,
        params: &ApiParams,
        direction: Direction,
        rng: &mut R,
    ) -> Result<ApiOutcome> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: state.dim() });
        }
        let weights: Vec<f64> = self.amplitudes(state).iter().map(|a| a.norm_sqr()).collect();
        let j = sample_index(&weights, rng);
        let q = self.agree_prob(j, direction);

        // bit value tracks the parity of disagreements, starting from b_0 = 1
        let mut bits = Vec::with_capacity(2 * params.t + 2);
        let mut bit = true;
        let mut flip = |bits: &mut Vec<bool>, rng: &mut R| {
            if rng.random::<f64>() >= q {
                bit = !bit;
            }
            bits.push(bit);
            bit
        };
        let mut last = true;
        for _ in 0..params.t {
            flip(&mut bits, rng);
            last = flip(&mut bits, rng);
        }
        let mut flush_rounds = 0;
        while !last {
            if flush_rounds == params.max_flush_rounds {
                return Err(Error::FlushNonTermination { max_rounds: params.max_flush_rounds });
            }
            flush_rounds += 1;
            flip(&mut bits, rng);
            last = flip(&mut bits, rng);
        }
        let transcript = ApiTranscript::from_bits(bits, params.t, flush_rounds);
        let post = self.posterior(state, transcript.total_agreements, transcript.total_bits, direction)?;
        Ok(ApiOutcome { estimate: transcript.estimate, post, transcript, subspace: Some(j) })
    }
}

pub fn api_fast<R: Rng + ?Sized>(
    povm: &MixedBinaryPOVM,
    state: &StateVector,
    params: &ApiParams,
    direction: Direction,
    rng: &mut R,
) -> Result<ApiOutcome> {
    check_dims(povm, state)?;
    FastApi::prepare(povm)?.run(state, params, direction, rng)
}

pub fn run_api<R: Rng + ?Sized>(
    engine: Engine,
    povm: &MixedBinaryPOVM,
    state: &StateVector,
    params: &ApiParams,
    direction: Direction,
    rng: &mut R,
) -> Result<ApiOutcome> {
    match engine {
        Engine::Exact => api_exact(povm, state, params, direction, rng),
        Engine::Fast => api_fast(povm, state, params, direction, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::output_projector;
    use crate::spectral::{jordan, JordanSubspace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn t_formula_matches_worked_value() {
        // ⌈ln(80)/0.01⌉ = ⌈438.20…⌉
        assert_eq!(ApiParams::new(0.1, 0.05).unwrap().t, 439);
        assert_eq!(ApiParams::new(0.05, 0.05).unwrap().t, 1753);
        assert_eq!(ApiParams::new(0.1, 0.05).unwrap().max_flush_rounds, 64 * 439);
        assert!(ApiParams::new(0.0, 0.5).is_err());
        assert!(ApiParams::new(0.5, 1.0).is_err());
    }

    fn always_accept(dim: usize, s: usize) -> MixedBinaryPOVM {
        MixedBinaryPOVM::new(vec![BinaryProjector::new(CMatrix::identity(dim)).unwrap(); s]).unwrap()
    }

    #[test]
    fn unit_block_gives_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let povm = always_accept(2, 4);
        let state = StateVector::new(vec![c(0.6), c(0.8)]).unwrap();
        let params = ApiParams::new(0.2, 0.1).unwrap();
        for engine in [Engine::Exact, Engine::Fast] {
            let out = run_api(engine, &povm, &state, &params, Direction::Forward, &mut rng).unwrap();
            assert_eq!(out.estimate, 1.0);
            assert_eq!(out.transcript.agreements, 2 * params.t);
            assert!(out.transcript.bits.iter().all(|&b| b));
            assert!(out.post.infidelity(&state) < 1e-12);
            let rev = run_api(engine, &povm, &state, &params, Direction::Reverse, &mut rng).unwrap();
            assert_eq!(rev.estimate, 0.0);
            assert!(*rev.transcript.bits.last().unwrap());
        }
    }

    #[test]
    fn exact_engine_respects_dimension_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let povm = always_accept(4, 4);
        let state = StateVector::basis(4, 0).unwrap();
        let params = ApiParams::new(0.5, 0.5).unwrap().with_dim_cap(8);
        let err = api_exact(&povm, &state, &params, Direction::Forward, &mut rng).unwrap_err();
        assert_eq!(err, Error::DimensionCap { dim: 16, cap: 8 });
    }

    #[test]
    fn flush_cap_is_an_error() {
        // p = 1/2 makes b_2T = 0 with probability 1/2; a zero cap must then fail
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut half = CMatrix::zeros(2);
        half[(0, 0)] = c(1.0);
        let povm = MixedBinaryPOVM::new(vec![
            BinaryProjector::new(half).unwrap(),
            BinaryProjector::new(CMatrix::zeros(2)).unwrap(),
        ])
        .unwrap();
        let state = StateVector::basis(2, 0).unwrap();
        let params = ApiParams::new(0.5, 0.5).unwrap().with_max_flush_rounds(0);
        let failures = (0..64)
            .filter(|_| {
                matches!(
                    api_fast(&povm, &state, &params, Direction::Forward, &mut rng),
                    Err(Error::FlushNonTermination { .. })
                )
            })
            .count();
        assert!(failures > 10 && failures < 54, "{failures}");
    }

    #[test]
    fn structured_operators_match_dense_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let povm = MixedBinaryPOVM::new(vec![
            BinaryProjector::new(output_projector(2, false)).unwrap(),
            BinaryProjector::new(CMatrix::outer(&[c(h), c(h)])).unwrap(),
            BinaryProjector::new(output_projector(2, true)).unwrap(),
        ])
        .unwrap();
        let cp = ControlledProjection::new(&povm);
        let phi: Vec<C64> = (0..6).map(|_| C64::new(rng.random(), rng.random())).collect();
        let dense = cp.cproj_matrix().accept().apply(&phi);
        let fast = cp.apply_cproj(&phi);
        assert!(dense.iter().zip(&fast).all(|(a, b)| (a - b).norm() < 1e-14));
        let dense = cp.is_u_matrix().accept().apply(&phi);
        let fast = cp.apply_is_u(&phi);
        assert!(dense.iter().zip(&fast).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn fast_blocks_match_generic_jordan() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let povm = MixedBinaryPOVM::new(vec![
            BinaryProjector::new(output_projector(2, false)).unwrap(),
            BinaryProjector::new(CMatrix::outer(&[c(h), C64::new(0.0, h)])).unwrap(),
        ])
        .unwrap();
        let cp = ControlledProjection::new(&povm);
        let j = jordan(&cp.is_u_matrix(), &cp.cproj_matrix()).unwrap();
        let mut generic: Vec<f64> = j.v_blocks().map(|b| b.p().unwrap()).collect();
        generic.sort_by(f64::total_cmp);
        let fast = FastApi::prepare(&povm).unwrap();
        assert_eq!(generic.len(), fast.overlaps.len());
        for (a, b) in generic.iter().zip(&fast.overlaps) {
            assert!((a - b).abs() < 1e-9);
        }
        // v_j is |1_R⟩ ⊗ φ_j
        for block in j.v_blocks() {
            let v = block.v().unwrap();
            let factor: Vec<C64> = v[..2].iter().map(|a| a * libm::sqrt(2.0)).collect();
            assert!(linalg::norm(&v[2..].iter().zip(&v[..2]).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-9);
            let p = block.p().unwrap();
            let back = povm.accept_operator().apply(&factor);
            assert!(back.iter().zip(&factor).all(|(a, b)| (a - b * p).norm() < 1e-8));
            if let JordanSubspace::Two { .. } = block {
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn exact_post_state_matches_fast_posterior() {
        // distinct overlaps in one register: the exact collapse is the
        // likelihood-weighted superposition fixed by (agreements, bits)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut projs = Vec::new();
        for r in 0..4 {
            let mut m = CMatrix::zeros(4);
            for i in 0..4 {
                if (r + i) % 4 < [3, 2, 1, 0][i] {
                    m[(i, i)] = c(1.0);
                }
            }
            projs.push(BinaryProjector::new(m).unwrap());
        }
        let povm = MixedBinaryPOVM::new(projs).unwrap();
        let fast = FastApi::prepare(&povm).unwrap();
        let state = StateVector::normalized(vec![c(0.5), C64::new(0.1, 0.5), c(-0.4), C64::new(0.0, 0.3)]).unwrap();
        let params = ApiParams::new(0.4, 0.5).unwrap();
        for direction in [Direction::Forward, Direction::Reverse] {
            for _ in 0..50 {
                let out = api_exact(&povm, &state, &params, direction, &mut rng).unwrap();
                let tr = &out.transcript;
                let predicted = fast.posterior(&state, tr.total_agreements, tr.total_bits, direction).unwrap();
                assert!(out.post.infidelity(&predicted) < 1e-9, "infidelity {}", out.post.infidelity(&predicted));
            }
        }
    }
}
