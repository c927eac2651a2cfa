//! Concrete pirate programs for experiments.
//!
//! A pirate sees only the `(x, y)` part of a sample. The classical pirates
//! live on one qubit that starts in `|0⟩`: the unitary is `X` when the pirate
//! answers `1` and `I` otherwise, so the output qubit carries the answer.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::bits::Bits;
use crate::crypto::keyed_rand;
use crate::elwm::MarkedCircuit;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::quantum::{QuantumProgram, StateVector, UnitaryOracle};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum PirateSpec {
    Honest,
    Anti,
    /// Honest except on a keyed-hash-selected `eta` fraction of inputs.
    Noisy {
        eta: f64,
    },
    /// Ignores its input and outputs a fair coin.
    Coin,
    /// `cos θ |0⟩ψ_a + sin θ |1⟩ψ_b` with block-controlled unitaries.
    Superposed {
        theta: f64,
        a: Box<PirateSpec>,
        b: Box<PirateSpec>,
    },
}

impl PirateSpec {
    pub fn superposed(theta: f64, a: PirateSpec, b: PirateSpec) -> Self {
        Self::Superposed { theta, a: Box::new(a), b: Box::new(b) }
    }

    /// Short label for reports, e.g. `sp(0.7854,honest,coin)`.
    pub fn label(&self) -> alloc::string::String {
        use alloc::format;
        match self {
            Self::Honest => "honest".into(),
            Self::Anti => "anti".into(),
            Self::Noisy { eta } => format!("noisy({eta})"),
            Self::Coin => "coin".into(),
            Self::Superposed { theta, a, b } => format!("sp({theta:.4},{},{})", a.label(), b.label()),
        }
    }

    pub fn build(&self, circuit: &Arc<MarkedCircuit>, noise_key: &[u8]) -> Result<QuantumProgram> {
        match self {
            Self::Honest => honest_pirate(circuit.clone()),
            Self::Anti => anti_pirate(circuit.clone()),
            Self::Noisy { eta } => noisy_pirate(circuit.clone(), *eta, noise_key),
            Self::Coin => coin_pirate(),
            Self::Superposed { theta, a, b } => {
                superposed_pirate(*theta, &a.build(circuit, noise_key)?, &b.build(circuit, noise_key)?)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Answer {
    Honest,
    Anti,
    Noisy { eta: f64, key: Vec<u8> },
}

#[derive(Clone, Debug)]
struct ClassicalOracle {
    circuit: Arc<MarkedCircuit>,
    answer: Answer,
}

/// Returns whether the keyed hash selects `(x, y)` for a flipped answer.
pub fn noise_selects(key: &[u8], eta: f64, x: &Bits, y: &Bits) -> bool {
    let mut input = Vec::with_capacity(x.as_bytes().len() + y.as_bytes().len() + 16);
    input.extend_from_slice(&(x.len() as u64).to_be_bytes());
    input.extend_from_slice(x.as_bytes());
    input.extend_from_slice(&(y.len() as u64).to_be_bytes());
    input.extend_from_slice(y.as_bytes());
    let h = keyed_rand(key, &input, 8);
    let u = u64::from_be_bytes(h.try_into().expect("8 bytes")) as f64 / 18_446_744_073_709_551_616.0;
    u < eta
}

impl ClassicalOracle {
    fn answer(&self, x: &Bits, y: &Bits) -> bool {
        // a circuit fault counts as a mismatch; the pirate just answers 0
        let honest = self.circuit.eval(x).map(|c| &c == y).unwrap_or(false);
        match &self.answer {
            Answer::Honest => honest,
            Answer::Anti => !honest,
            Answer::Noisy { eta, key } => honest ^ noise_selects(key, *eta, x, y),
        }
    }
}

fn pauli_x() -> CMatrix {
    CMatrix::permutation(&[1, 0])
}

impl UnitaryOracle for ClassicalOracle {
    fn dim(&self) -> usize {
        2
    }

    fn unitary(&self, x: &Bits, y: &Bits) -> CMatrix {
        if self.answer(x, y) {
            pauli_x()
        } else {
            CMatrix::identity(2)
        }
    }
}

fn classical(circuit: Arc<MarkedCircuit>, answer: Answer) -> Result<QuantumProgram> {
    QuantumProgram::new(StateVector::basis(2, 0)?, Arc::new(ClassicalOracle { circuit, answer }))
}

/// Outputs 1 iff `C̃(x) = y`.
pub fn honest_pirate(circuit: Arc<MarkedCircuit>) -> Result<QuantumProgram> {
    classical(circuit, Answer::Honest)
}

pub fn anti_pirate(circuit: Arc<MarkedCircuit>) -> Result<QuantumProgram> {
    classical(circuit, Answer::Anti)
}

pub fn noisy_pirate(circuit: Arc<MarkedCircuit>, eta: f64, key: &[u8]) -> Result<QuantumProgram> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter("noise rate must lie in [0, 1]"));
    }
    classical(circuit, Answer::Noisy { eta, key: key.to_vec() })
}

#[derive(Clone, Copy, Debug)]
struct IdleOracle;

impl UnitaryOracle for IdleOracle {
    fn dim(&self) -> usize {
        2
    }

    fn unitary(&self, _: &Bits, _: &Bits) -> CMatrix {
        CMatrix::identity(2)
    }
}

/// `|+⟩` with trivial unitaries.
pub fn coin_pirate() -> Result<QuantumProgram> {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(alloc::vec![C64::new(h, 0.0), C64::new(h, 0.0)])?;
    QuantumProgram::new(plus, Arc::new(IdleOracle))
}

/// Two programs of equal dimension `d` in superposition. The composite space
/// is `output ⊗ branch ⊗ rest`, index `o·d + branch·(d/2) + rest`, so the
/// output qubit stays first.
#[derive(Debug)]
struct SuperposedOracle {
    a: Arc<dyn UnitaryOracle>,
    b: Arc<dyn UnitaryOracle>,
    d: usize,
}

impl SuperposedOracle {
    fn embed(d: usize, branch: usize, i: usize) -> usize {
        let half = d / 2;
        (i / half) * d + branch * half + i % half
    }
}

impl UnitaryOracle for SuperposedOracle {
    fn dim(&self) -> usize {
        2 * self.d
    }

    fn unitary(&self, x: &Bits, y: &Bits) -> CMatrix {
        let mut u = CMatrix::zeros(2 * self.d);
        for (branch, inner) in [&self.a, &self.b].into_iter().enumerate() {
            let v = inner.unitary(x, y);
            for i in 0..self.d {
                for j in 0..self.d {
                    u[(Self::embed(self.d, branch, i), Self::embed(self.d, branch, j))] = v[(i, j)];
                }
            }
        }
        u
    }
}

pub fn superposed_pirate(theta: f64, a: &QuantumProgram, b: &QuantumProgram) -> Result<QuantumProgram> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: b.dim() });
    }
    let (c, s) = (libm::cos(theta), libm::sin(theta));
    let mut amps = alloc::vec![C64::new(0.0, 0.0); 2 * d];
    for i in 0..d {
        amps[SuperposedOracle::embed(d, 0, i)] = a.state().amplitudes()[i] * c;
        amps[SuperposedOracle::embed(d, 1, i)] = b.state().amplitudes()[i] * s;
    }
    let oracle = SuperposedOracle { a: a.oracle().clone(), b: b.oracle().clone(), d };
    QuantumProgram::new(StateVector::normalized(amps)?, Arc::new(oracle))
}
