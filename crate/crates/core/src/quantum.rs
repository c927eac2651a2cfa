//! Pure states, quantum programs with classical inputs, and binary projective
//! measurements.
//!
//! A program is a state plus a family of unitaries `U_{x,y}` indexed by a
//! classical domain point and range point. Its output register is always the
//! first qubit: basis indices `[0, d/2)` carry output `0`, `[d/2, d)` carry `1`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};

pub const NORM_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-9;
pub const PROJECTOR_TOL: f64 = 1e-9;
/// Projection norms below this are treated as an impossible branch.
pub const DEGENERATE_NORM: f64 = 1e-12;
pub const DEFAULT_DIM_CAP: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps amplitudes that are already unit-norm.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::InvalidDimension(amps.len()));
        }
        let norm = linalg::norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm = linalg::norm(&amps);
        if norm < DEGENERATE_NORM {
            return Err(Error::DegeneratePostState { norm });
        }
        Self::new(linalg::scaled(&amps, C64::new(1.0 / norm, 0.0)))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: index });
        }
        let mut amps = alloc::vec![ZERO; dim];
        amps[index] = C64::new(1.0, 0.0);
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn inner(&self, other: &Self) -> C64 {
        linalg::inner(&self.amps, &other.amps)
    }

    /// `1 - |⟨self|other⟩|²`; zero iff the states agree up to global phase.
    pub fn infidelity(&self, other: &Self) -> f64 {
        1.0 - self.inner(other).norm_sqr()
    }
}

/// A deterministic map from classical input `(x, y)` to a `dim × dim` unitary.
pub trait UnitaryOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn unitary(&self, x: &Bits, y: &Bits) -> CMatrix;
}

/// One classical sample `(γ, x, y)` fed to a program: the bit the measurement
/// tests for, plus the input pair the pirate actually sees.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Triple {
    pub gamma: bool,
    pub x: Bits,
    pub y: Bits,
}

impl Triple {
    pub fn new(gamma: bool, x: Bits, y: Bits) -> Self {
        Self { gamma, x, y }
    }

    /// `(1 ⊕ γ, x, y)`
    pub fn flipped(&self) -> Self {
        Self { gamma: !self.gamma, x: self.x.clone(), y: self.y.clone() }
    }
}

/// A state together with its classical-input unitary family.
#[derive(Clone, Debug)]
pub struct QuantumProgram {
    state: StateVector,
    oracle: Arc<dyn UnitaryOracle>,
}

impl QuantumProgram {
    pub fn new(state: StateVector, oracle: Arc<dyn UnitaryOracle>) -> Result<Self> {
        let dim = state.dim();
        if oracle.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: oracle.dim() });
        }
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self { state, oracle })
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn oracle(&self) -> &Arc<dyn UnitaryOracle> {
        &self.oracle
    }

    /// The same unitaries acting on a different state.
    pub fn with_state(&self, state: StateVector) -> Result<Self> {
        Self::new(state, Arc::clone(&self.oracle))
    }

    pub fn check_cap(&self, cap: usize) -> Result<()> {
        if self.dim() > cap {
            return Err(Error::DimensionCap { dim: self.dim(), cap });
        }
        Ok(())
    }
}

/// Accept projector `P` of a binary measurement `(P, I − P)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryProjector {
    accept: CMatrix,
}

impl BinaryProjector {
    pub fn new(accept: CMatrix) -> Result<Self> {
        let deviation = accept.projector_deviation();
        if deviation > PROJECTOR_TOL {
            return Err(Error::NotProjector { deviation });
        }
        Ok(Self { accept })
    }

    pub(crate) fn new_unchecked(accept: CMatrix) -> Self {
        Self { accept }
    }

    pub fn dim(&self) -> usize {
        self.accept.dim()
    }

    pub fn accept(&self) -> &CMatrix {
        &self.accept
    }

    pub fn into_matrix(self) -> CMatrix {
        self.accept
    }

    pub fn reject(&self) -> Self {
        Self { accept: CMatrix::identity(self.dim()).sub(&self.accept) }
    }
}

/// Projector onto first-qubit value `b` in dimension `dim`.
pub fn output_projector(dim: usize, b: bool) -> CMatrix {
    let half = dim / 2;
    let mut m = CMatrix::zeros(dim);
    let range = if b { half..dim } else { 0..half };
    for i in range {
        m[(i, i)] = C64::new(1.0, 0.0);
    }
    m
}

/// `P_{b,x,y} = U_{x,y}† Π_b U_{x,y}`, where `Π_b` fixes the output qubit to `b`.
pub fn program_projector(prog: &QuantumProgram, b: bool, x: &Bits, y: &Bits) -> Result<BinaryProjector> {
    let u = prog.oracle.unitary(x, y);
    if u.dim() != prog.dim() {
        return Err(Error::DimensionMismatch { expected: prog.dim(), actual: u.dim() });
    }
    // Π_b U keeps only the rows of U belonging to output b
    let dim = u.dim();
    let half = dim / 2;
    let rows = if b { half..dim } else { 0..half };
    let mut p = CMatrix::zeros(dim);
    for k in rows {
        let row = u.row(k);
        for i in 0..dim {
            let a = row[i].conj();
            if a == ZERO {
                continue;
            }
            for j in 0..dim {
                p[(i, j)] += a * row[j];
            }
        }
    }
    Ok(BinaryProjector::new_unchecked(p))
}

#[derive(Clone, Debug)]
pub struct BinaryOutcome {
    pub outcome: bool,
    pub post: StateVector,
    /// `⟨ψ|P|ψ⟩`, independent of the sampled branch.
    pub prob_one: f64,
}

/// Samples the binary measurement `(P, I − P)` given the accepted component
/// `P ψ` of the state. Shared by the dense path and by structured operators
/// that never materialize `P`.
pub fn measure_with_projection<R: Rng + ?Sized>(psi: &[C64], accepted: Vec<C64>, rng: &mut R) -> Result<BinaryOutcome> {
    let prob_one = linalg::norm_sqr(&accepted).clamp(0.0, 1.0);
    let outcome = rng.random::<f64>() < prob_one;
    let branch = if outcome { accepted } else { psi.iter().zip(&accepted).map(|(a, b)| a - b).collect() };
    let norm = linalg::norm(&branch);
    if norm < DEGENERATE_NORM {
        return Err(Error::DegeneratePostState { norm });
    }
    let post = StateVector::new(linalg::scaled(&branch, C64::new(1.0 / norm, 0.0)))?;
    Ok(BinaryOutcome { outcome, post, prob_one })
}

/// Outcome `1` with probability `⟨ψ|P|ψ⟩`; the post state is the normalized projection.
pub fn measure_binary<R: Rng + ?Sized>(state: &StateVector, m: &BinaryProjector, rng: &mut R) -> Result<BinaryOutcome> {
    if state.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), actual: state.dim() });
    }
    let accepted = m.accept.apply(state.amplitudes());
    measure_with_projection(state.amplitudes(), accepted, rng)
}
