//! Oracles shared by the integration tests. Nothing here calls the
//! eigensolver or the estimators under test.
#![allow(dead_code)]

use std::sync::Arc;

use qwm_core::bits::Bits;
use qwm_core::linalg::{CMatrix, C64};
use qwm_core::quantum::{QuantumProgram, StateVector, Triple, UnitaryOracle};
use qwm_core::spectral::MixedBinaryPOVM;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<C64> {
    (0..d).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

pub fn random_state<R: Rng>(rng: &mut R, d: usize) -> StateVector {
    StateVector::normalized(random_vec(rng, d)).unwrap()
}

/// Gram–Schmidt on random columns.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v = random_vec(rng, d);
        for c in &cols {
            let dot: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= dot * ci;
            }
        }
        let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    CMatrix::from_fn(d, |i, j| cols[j][i])
}

/// `U_{x,y} = table[x]`.
#[derive(Debug)]
pub struct TableOracle {
    pub dim: usize,
    pub table: Vec<CMatrix>,
}

impl UnitaryOracle for TableOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn unitary(&self, x: &Bits, _y: &Bits) -> CMatrix {
        self.table[x.to_u64().unwrap() as usize % self.table.len()].clone()
    }
}

pub struct Instance {
    pub prog: QuantumProgram,
    pub triples: Vec<Triple>,
    pub povm: MixedBinaryPOVM,
}

/// A random program on `dim` with `s` coins, coin `r` feeding input `x = r`.
pub fn random_instance<R: Rng>(rng: &mut R, dim: usize, s: usize) -> Instance {
    let table = (0..s).map(|_| random_unitary(rng, dim)).collect();
    let state = random_state(rng, dim);
    let prog = QuantumProgram::new(state, Arc::new(TableOracle { dim, table })).unwrap();
    let triples: Vec<Triple> =
        (0..s).map(|r| Triple::new(rng.random(), Bits::from_u64(r as u64, 8), Bits::zeros(1))).collect();
    let povm = MixedBinaryPOVM::from_triples(&prog, &triples).unwrap();
    Instance { prog, triples, povm }
}

/// `‖Π_γ U ψ‖²`: the mass of `U ψ` on output-qubit value `γ`.
pub fn accept_probability(u: &CMatrix, gamma: bool, psi: &[C64]) -> f64 {
    let d = psi.len();
    let out = u.apply(psi);
    let half = d / 2;
    let range = if gamma { half..d } else { 0..half };
    out[range].iter().map(|a| a.norm_sqr()).sum()
}

/// `⟨ψ|P_D|ψ⟩` straight from the program's unitaries.
pub fn direct_acceptance(prog: &QuantumProgram, triples: &[Triple], psi: &StateVector) -> f64 {
    let s = triples.len() as f64;
    triples
        .iter()
        .map(|t| accept_probability(&prog.oracle().unitary(&t.x, &t.y), t.gamma, psi.amplitudes()))
        .sum::<f64>()
        / s
}

/// Diagonal of `P_D` in the computational basis and the largest
/// off-diagonal modulus, from the unitaries alone.
#[allow(clippy::needless_range_loop)]
pub fn diagonal_of_pd(prog: &QuantumProgram, triples: &[Triple]) -> (Vec<f64>, f64) {
    let d = prog.dim();
    let half = d / 2;
    let mut pd = vec![vec![C64::new(0.0, 0.0); d]; d];
    for t in triples {
        let u = prog.oracle().unitary(&t.x, &t.y);
        let range = if t.gamma { half..d } else { 0..half };
        for i in 0..d {
            for j in 0..d {
                let v: C64 = range.clone().map(|k| u.row(k)[i].conj() * u.row(k)[j]).sum();
                pd[i][j] += v / triples.len() as f64;
            }
        }
    }
    let off = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| pd[i][j].norm())
        .fold(0.0, f64::max);
    ((0..d).map(|i| pd[i][i].re).collect(), off)
}

/// `Σ_i w_i · Binom(n, p_i)` as a pmf over `0..=n`.
pub fn binomial_mixture(weights: &[f64], ps: &[f64], n: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    for (&w, &p) in weights.iter().zip(ps) {
        if w < 1e-15 {
            continue;
        }
        let b = Binomial::new(p.clamp(0.0, 1.0), n as u64).unwrap();
        for (k, slot) in pmf.iter_mut().enumerate() {
            *slot += w * b.pmf(k as u64);
        }
    }
    pmf
}

/// Pearson chi-square p-value for observed counts against `pmf`, pooling
/// adjacent cells until each expected count is at least 5.
pub fn chi_square_p(counts: &[usize], pmf: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(pmf) {
        e += p * n as f64;
        o += *c as f64;
        if e >= 5.0 {
            cells.push((o, e));
            e = 0.0;
            o = 0.0;
        }
    }
    match cells.last_mut() {
        Some(last) => {
            last.0 += o;
            last.1 += e;
        }
        None => cells.push((o, e)),
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    1.0 - ChiSquared::new((cells.len() - 1) as f64).unwrap().cdf(stat)
}

pub fn histogram(values: &[usize], n: usize) -> Vec<usize> {
    let mut h = vec![0; n + 1];
    for &v in values {
        h[v] += 1;
    }
    h
}

pub fn total_variation(a: &[usize], b: &[usize]) -> f64 {
    let na: usize = a.iter().sum();
    let nb: usize = b.iter().sum();
    0.5 * a.iter().zip(b).map(|(x, y)| (*x as f64 / na as f64 - *y as f64 / nb as f64).abs()).sum::<f64>()
}
