//! Projective implementation of binary POVMs, Jordan decomposition of a pair
//! of projectors, and shift distance between outcome distributions.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen, C64, ZERO};
use crate::quantum::{program_projector, BinaryProjector, QuantumProgram, StateVector, Triple};

/// Eigenvalues closer than this form one projective outcome.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-9;
/// Eigenvalues this far outside `[0, 1]` are clamped; further is an error.
pub const CLAMP_TOL: f64 = 1e-9;
pub const BERNOULLI_TOL: f64 = 1e-8;
/// Jordan overlaps within this of 0 or 1 are one-dimensional blocks.
pub const JORDAN_EDGE_TOL: f64 = 1e-9;

/// Uniform mixture of binary projectors over a finite coin space, with the
/// averaged accept operator `P_D = (1/s) Σ_r P_r` precomputed.
#[derive(Clone, Debug)]
pub struct MixedBinaryPOVM {
    projectors: Vec<BinaryProjector>,
    accept: CMatrix,
}

impl MixedBinaryPOVM {
    pub fn new(projectors: Vec<BinaryProjector>) -> Result<Self> {
        let first = projectors.first().ok_or(Error::InvalidParameter("empty coin space"))?;
        let dim = first.dim();
        let mut accept = CMatrix::zeros(dim);
        let w = 1.0 / projectors.len() as f64;
        for p in &projectors {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: p.dim() });
            }
            accept.add_assign_scaled(p.accept(), w);
        }
        Ok(Self { projectors, accept })
    }

    /// `P_{D(r)} = P_{γ_r, x_r, y_r}` for every coin `r`.
    pub fn from_triples<'a>(prog: &QuantumProgram, triples: impl IntoIterator<Item = &'a Triple>) -> Result<Self> {
        let projectors =
            triples.into_iter().map(|t| program_projector(prog, t.gamma, &t.x, &t.y)).collect::<Result<Vec<_>>>()?;
        Self::new(projectors)
    }

    /// The family `(I − P_r, P_r)`.
    pub fn reversed(&self) -> Self {
        let dim = self.dim();
        Self {
            projectors: self.projectors.iter().map(BinaryProjector::reject).collect(),
            accept: CMatrix::identity(dim).sub(&self.accept),
        }
    }

    pub fn dim(&self) -> usize {
        self.accept.dim()
    }

    pub fn coin_count(&self) -> usize {
        self.projectors.len()
    }

    pub fn projectors(&self) -> &[BinaryProjector] {
        &self.projectors
    }

    pub fn accept_operator(&self) -> &CMatrix {
        &self.accept
    }
}

/// One projective outcome: a clustered eigenvalue and an orthonormal basis
/// of its eigenspace.
#[derive(Clone, Debug)]
pub struct Eigenspace {
    pub value: f64,
    pub basis: Vec<Vec<C64>>,
}

impl Eigenspace {
    pub fn projector(&self, dim: usize) -> CMatrix {
        let mut m = CMatrix::zeros(dim);
        for v in &self.basis {
            m.add_assign_scaled(&CMatrix::outer(v), 1.0);
        }
        m
    }

    /// `Π ψ`, computed through the basis.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; psi.len()];
        for v in &self.basis {
            let c = linalg::inner(v, psi);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += vi * c;
            }
        }
        out
    }
}

/// The projective measurement onto eigenspaces of an accept operator.
#[derive(Clone, Debug)]
pub struct SpectralMeasurement {
    dim: usize,
    spaces: Vec<Eigenspace>,
}

impl SpectralMeasurement {
    pub fn of(povm: &MixedBinaryPOVM) -> Result<Self> {
        Self::of_operator(povm.accept_operator(), DEFAULT_CLUSTER_TOL)
    }

    pub fn of_operator(accept: &CMatrix, cluster_tol: f64) -> Result<Self> {
        let HermitianEigen { values, vectors } = linalg::hermitian_eigen(accept)?;
        let mut spaces: Vec<Eigenspace> = Vec::new();
        let mut members = 0usize;
        for (value, vector) in values.into_iter().zip(vectors) {
            let value = clamp_probability(value)?;
            match spaces.last_mut() {
                // running mean keeps the representative inside the cluster
                Some(last) if (value - last.value).abs() <= cluster_tol => {
                    members += 1;
                    last.value += (value - last.value) / members as f64;
                    last.basis.push(vector);
                }
                _ => {
                    members = 1;
                    spaces.push(Eigenspace { value, basis: vec![vector] });
                }
            }
        }
        Ok(Self { dim: accept.dim(), spaces })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenspaces(&self) -> &[Eigenspace] {
        &self.spaces
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spaces.iter().map(|s| s.value).collect()
    }

    /// Exact law of the eigenvalue outcome on `state`.
    pub fn outcome_distribution(&self, state: &StateVector) -> Result<OutcomeDistribution> {
        self.check_dim(state)?;
        let pairs = self.spaces.iter().map(|s| (s.value, linalg::norm_sqr(&s.project(state.amplitudes())))).collect();
        OutcomeDistribution::new(pairs)
    }

    /// Samples an eigenvalue with probability `‖Π_p ψ‖²` and collapses the state.
    pub fn measure<R: Rng + ?Sized>(&self, state: &StateVector, rng: &mut R) -> Result<(f64, StateVector)> {
        self.check_dim(state)?;
        let projections: Vec<Vec<C64>> = self.spaces.iter().map(|s| s.project(state.amplitudes())).collect();
        let masses: Vec<f64> = projections.iter().map(|p| linalg::norm_sqr(p)).collect();
        let idx = sample_index(&masses, rng);
        let post = StateVector::normalized(projections[idx].clone())?;
        Ok((self.spaces[idx].value, post))
    }

    fn check_dim(&self, state: &StateVector) -> Result<()> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: state.dim() });
        }
        Ok(())
    }
}

fn clamp_probability(value: f64) -> Result<f64> {
    if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&value) {
        return Err(Error::EigenvalueOutOfRange { value });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Draws an index with probability proportional to `weights`.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last_positive = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last_positive
}

/// `ProjImp(P_D)` on `state`: the sampled eigenvalue and the collapsed state.
pub fn projimp<R: Rng + ?Sized>(
    povm: &MixedBinaryPOVM,
    state: &StateVector,
    rng: &mut R,
) -> Result<(f64, StateVector)> {
    SpectralMeasurement::of(povm)?.measure(state, rng)
}

/// Checks that eigenvalue-then-Bernoulli reproduces the POVM on `state`:
/// `Σ_p p·‖Π_p ψ‖² = ⟨ψ|P_D|ψ⟩`. Returns the common value.
pub fn projimp_bernoulli_check(povm: &MixedBinaryPOVM, state: &StateVector) -> Result<f64> {
    let spectral = SpectralMeasurement::of(povm)?;
    let via_projimp = spectral.outcome_distribution(state)?.mean();
    let direct = povm.accept_operator().quadratic_form(state.amplitudes());
    if (via_projimp - direct).abs() > BERNOULLI_TOL {
        return Err(Error::ProjImpMismatch { projimp: via_projimp, direct });
    }
    Ok(direct)
}

// ---------------------------------------------------------------------------
// Jordan decomposition

/// One block of the Jordan decomposition of `(Π_v, Π_w)`.
#[derive(Clone, Debug)]
pub enum JordanSubspace {
    /// Both projectors are rank one here; `p = |⟨v|w⟩|²` with `⟨v|w⟩ = √p`.
    Two { p: f64, v: Vec<C64>, w: Vec<C64>, v_perp: Vec<C64>, w_perp: Vec<C64> },
    /// Each projector acts as identity or zero on `vector`.
    One { vector: Vec<C64>, in_v: bool, in_w: bool },
}

impl JordanSubspace {
    /// Overlap eigenvalue for blocks meeting `range(Π_v)`.
    pub fn p(&self) -> Option<f64> {
        match self {
            Self::Two { p, .. } => Some(*p),
            Self::One { in_v: true, in_w, .. } => Some(if *in_w { 1.0 } else { 0.0 }),
            Self::One { in_v: false, .. } => None,
        }
    }

    /// The `Π_v`-accepted vector of the block, if any.
    pub fn v(&self) -> Option<&[C64]> {
        match self {
            Self::Two { v, .. } => Some(v),
            Self::One { vector, in_v: true, .. } => Some(vector),
            Self::One { .. } => None,
        }
    }

    pub fn is_one_dim(&self) -> bool {
        matches!(self, Self::One { .. })
    }

    /// Orthonormal vectors spanning the block.
    pub fn span(&self) -> Vec<&[C64]> {
        match self {
            Self::Two { v, v_perp, .. } => vec![v.as_slice(), v_perp.as_slice()],
            Self::One { vector, .. } => vec![vector.as_slice()],
        }
    }
}

#[derive(Clone, Debug)]
pub struct JordanDecomposition {
    pub dim: usize,
    pub subspaces: Vec<JordanSubspace>,
}

impl JordanDecomposition {
    /// Blocks that meet `range(Π_v)`, in the order they were found.
    pub fn v_blocks(&self) -> impl Iterator<Item = &JordanSubspace> {
        self.subspaces.iter().filter(|s| s.v().is_some())
    }
}

/// Orthonormal basis of the range of a projector.
fn range_basis(p: &CMatrix) -> Result<Vec<Vec<C64>>> {
    let e = linalg::hermitian_eigen(p)?;
    Ok(e.values.into_iter().zip(e.vectors).filter(|(v, _)| *v > 0.5).map(|(_, vec)| vec).collect())
}

/// Jordan decomposition of two projectors of equal dimension.
///
/// `Π_v Π_w Π_v` is diagonalized on `range(Π_v)`; its eigenvectors are the
/// `v_j` with eigenvalue `p_j`. Whatever the blocks through `range(Π_v)` do not
/// cover is split by `Π_w` alone into one-dimensional blocks.
pub fn jordan(pi_v: &BinaryProjector, pi_w: &BinaryProjector) -> Result<JordanDecomposition> {
    if pi_v.dim() != pi_w.dim() {
        return Err(Error::DimensionMismatch { expected: pi_v.dim(), actual: pi_w.dim() });
    }
    let basis = range_basis(pi_v.accept())?;
    jordan_from_range(&basis, pi_w)
}

/// Jordan decomposition given an orthonormal basis of `range(Π_v)`.
pub fn jordan_from_range(v_basis: &[Vec<C64>], pi_w: &BinaryProjector) -> Result<JordanDecomposition> {
    let dim = pi_w.dim();
    let r = v_basis.len();
    let w_mat = pi_w.accept();
    let w_basis: Vec<Vec<C64>> = v_basis.iter().map(|b| w_mat.apply(b)).collect();
    let compressed = CMatrix::from_fn(r, |i, j| linalg::inner(&v_basis[i], &w_basis[j]));
    let e = linalg::hermitian_eigen(&compressed)?;

    let mut subspaces = Vec::new();
    for (mu, coeffs) in e.values.into_iter().zip(e.vectors) {
        let mut v = vec![ZERO; dim];
        for (c, b) in coeffs.iter().zip(v_basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += bi * c;
            }
        }
        let p = clamp_probability(mu)?;
        if p >= 1.0 - JORDAN_EDGE_TOL {
            subspaces.push(JordanSubspace::One { vector: v, in_v: true, in_w: true });
        } else if p <= JORDAN_EDGE_TOL {
            subspaces.push(JordanSubspace::One { vector: v, in_v: true, in_w: false });
        } else {
            let sp = libm::sqrt(p);
            let sq = libm::sqrt(1.0 - p);
            // Π_w v = √p w, and ⟨v|w⟩ = √p is real by construction
            let w = linalg::scaled(&w_mat.apply(&v), C64::new(1.0 / sp, 0.0));
            let v_perp: Vec<C64> = w.iter().zip(&v).map(|(wi, vi)| (wi - vi * sp) / sq).collect();
            let w_perp: Vec<C64> = v.iter().zip(&v_perp).map(|(vi, ui)| vi * sq - ui * sp).collect();
            subspaces.push(JordanSubspace::Two { p, v, w, v_perp, w_perp });
        }
    }

    // the complement is invariant under Π_w and annihilated by Π_v
    let mut covered = CMatrix::zeros(dim);
    for s in &subspaces {
        for u in s.span() {
            covered.add_assign_scaled(&CMatrix::outer(u), 1.0);
        }
    }
    let complement = CMatrix::identity(dim).sub(&covered);
    let c_basis = range_basis(&complement)?;
    if !c_basis.is_empty() {
        let c = c_basis.len();
        let images: Vec<Vec<C64>> = c_basis.iter().map(|b| w_mat.apply(b)).collect();
        let restricted = CMatrix::from_fn(c, |i, j| linalg::inner(&c_basis[i], &images[j]));
        let ce = linalg::hermitian_eigen(&restricted)?;
        for (mu, coeffs) in ce.values.into_iter().zip(ce.vectors) {
            let mut u = vec![ZERO; dim];
            for (cf, b) in coeffs.iter().zip(&c_basis) {
                for (ui, bi) in u.iter_mut().zip(b) {
                    *ui += bi * cf;
                }
            }
            subspaces.push(JordanSubspace::One { vector: u, in_v: false, in_w: mu > 0.5 });
        }
    }
    Ok(JordanDecomposition { dim, subspaces })
}

// ---------------------------------------------------------------------------
// Outcome distributions and shift distance

/// A finite distribution over `[0, 1]`, support sorted and duplicate-free.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutcomeDistribution {
    support: Vec<f64>,
    masses: Vec<f64>,
}

impl OutcomeDistribution {
    /// Builds from `(value, mass)` pairs, merging equal values. Masses must be
    /// nonnegative and sum to one within `1e-9`.
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.iter().any(|&(v, m)| m < -1e-12 || !v.is_finite() || !m.is_finite()) {
            return Err(Error::InvalidParameter("negative or non-finite mass"));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("masses must sum to one"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (v, m) in pairs {
            let m = m.max(0.0);
            match support.last() {
                Some(&last) if last == v => *masses.last_mut().unwrap() += m,
                _ => {
                    support.push(v);
                    masses.push(m);
                }
            }
        }
        Ok(Self { support, masses })
    }

    pub fn point(value: f64) -> Self {
        Self { support: vec![value], masses: vec![1.0] }
    }

    /// Empirical law where each sample is snapped to the grid `k / resolution`.
    pub fn from_samples_binned(samples: &[f64], resolution: usize) -> Result<Self> {
        if samples.is_empty() || resolution == 0 {
            return Err(Error::InvalidParameter("empty sample set or zero resolution"));
        }
        let w = 1.0 / samples.len() as f64;
        let scale = resolution as f64;
        let pairs = samples.iter().map(|&x| (libm::round(x * scale) / scale, w)).collect();
        Self::new(pairs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.masses).map(|(v, m)| v * m).sum()
    }

    /// `Pr[D ≤ x]`
    pub fn cdf(&self, x: f64) -> f64 {
        self.support.iter().zip(&self.masses).filter(|(v, _)| **v <= x + GRID_SLACK).map(|p| p.1).sum()
    }

    /// `Pr[D ≥ x]`
    pub fn survival(&self, x: f64) -> f64 {
        self.support.iter().zip(&self.masses).filter(|(v, _)| **v >= x - GRID_SLACK).map(|p| p.1).sum()
    }
}

/// Shifted comparison points `x ± ε` are matched to support points with this
/// slack so that grid values computed by different float paths coincide.
const GRID_SLACK: f64 = 1e-12;

/// Smallest `δ` such that, for all real `x`,
/// `Pr[D0 ≤ x] ≤ Pr[D1 ≤ x+ε] + δ`, `Pr[D0 ≥ x] ≤ Pr[D1 ≥ x−ε] + δ`, and the
/// same with `D0`, `D1` swapped.
///
/// Each left-hand side is a step function that only increases at its own
/// support points while the right-hand side is monotone in the favourable
/// direction, so the supremum is attained on the left distribution's support.
pub fn shift_distance(d0: &OutcomeDistribution, d1: &OutcomeDistribution, eps: f64) -> f64 {
    assert!(eps >= 0.0, "shift parameter must be nonnegative");
    let one_sided = |a: &OutcomeDistribution, b: &OutcomeDistribution| {
        a.support.iter().fold(0.0f64, |acc, &x| {
            let lower = a.cdf(x) - b.cdf(x + eps);
            let upper = a.survival(x) - b.survival(x - eps);
            acc.max(lower).max(upper)
        })
    };
    one_sided(d0, d1).max(one_sided(d1, d0)).max(0.0)
}
