//! Extraction-less watermarking PRF built from puncturable encryption.
//!
//! * `Gen` samples a GGM key `F: {0,1}^n → {0,1}^m` and a PE keypair; the
//!   PRF key is `(F, dk)` and the public tag is `ek`.
//! * `Mark` builds the circuit `D[F, dk, msg]`: decrypt `x`; on a valid
//!   plaintext `s ‖ i ‖ γ` with `msg[i] ≠ γ` output `PRG(s)`, otherwise `F(x)`.
//! * `Sim` encrypts `s ‖ i ‖ γ` under the tag and pairs it with `PRG(s)`.
//!
//! The PE plaintext is `s (ℓ bits) ‖ index (⌈log₂ k⌉ bits, storing i−1) ‖ γ`,
//! and the PRF domain is the PE ciphertext space, `n = 12·ℓ_pt`. An index
//! field that decodes past `k` is handled like a failed decryption.
//!
//! Distributions use a finite coin space `{0, …, s−1}` with all coins derived
//! through [`keyed_rand`]. The tested bit (`b` or `γ`) of coin `r` is fixed to
//! `r mod 2`, so every even-sized coin space is exactly balanced.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::RngCore;

use crate::bits::Bits;
use crate::circuit::{Circuit, CircuitBuilder, Obfuscator, Op};
use crate::crypto::{keyed_rand, GgmKey, Prg};
use crate::error::{Error, Result};
use crate::pe::{self, DecryptionKey, EncryptionKey};
use crate::quantum::{QuantumProgram, Triple};
use crate::spectral::MixedBinaryPOVM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElwmParams {
    /// `k`, message bits carried by a mark.
    pub msg_bits: usize,
    /// `ℓ`, PRG seed bits.
    pub seed_bits: usize,
    /// `m`, PRF output bits.
    pub range_bits: usize,
}

impl ElwmParams {
    pub fn new(msg_bits: usize, seed_bits: usize, range_bits: usize) -> Result<Self> {
        if msg_bits == 0 {
            return Err(Error::InvalidParameter("message length must be positive"));
        }
        if seed_bits == 0 || range_bits <= seed_bits {
            return Err(Error::InvalidParameter("need 0 < seed_bits < range_bits for PRG(s)"));
        }
        Ok(Self { msg_bits, seed_bits, range_bits })
    }

    pub fn index_bits(&self) -> usize {
        (usize::BITS - (self.msg_bits - 1).leading_zeros()).max(1) as usize
    }

    /// `ℓ_pt = ℓ + ⌈log₂ k⌉ + 1`
    pub fn plaintext_bits(&self) -> usize {
        self.seed_bits + self.index_bits() + 1
    }

    /// `n = 12·ℓ_pt`
    pub fn domain_bits(&self) -> usize {
        pe::CT_FACTOR * self.plaintext_bits()
    }

    pub fn prg(&self) -> Prg {
        Prg::new(self.seed_bits, self.range_bits).expect("validated in new")
    }

    /// Bytes of Sim randomness: `γ` byte, `s`, PE encryption randomness.
    pub fn sim_coin_bytes(&self) -> usize {
        1 + self.seed_bits.div_ceil(8) + self.plaintext_bits().div_ceil(8)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.msg_bits {
            return Err(Error::IndexOutOfRange { index: i, max: self.msg_bits });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrfKey {
    pub params: ElwmParams,
    pub f: GgmKey,
    pub dk: DecryptionKey,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tag {
    pub params: ElwmParams,
    pub ek: EncryptionKey,
}

impl PrfKey {
    pub fn from_parts(params: ElwmParams, f: GgmKey, dk: DecryptionKey) -> Result<Self> {
        if f.domain_bits() != params.domain_bits() || f.out_bits() != params.range_bits {
            return Err(Error::Decode("PRF key shape does not match the parameters"));
        }
        if dk.plain_bits() != params.plaintext_bits() {
            return Err(Error::Decode("decryption key shape does not match the parameters"));
        }
        Ok(Self { params, f, dk })
    }

    pub fn eval(&self, x: &Bits) -> Result<Bits> {
        self.f.eval(x)
    }
}

impl Tag {
    pub fn from_parts(params: ElwmParams, ek: EncryptionKey) -> Result<Self> {
        if ek.plain_bits() != params.plaintext_bits() {
            return Err(Error::Decode("encryption key shape does not match the parameters"));
        }
        Ok(Self { params, ek })
    }
}

pub fn gen<R: RngCore + ?Sized>(params: ElwmParams, obf: &dyn Obfuscator, rng: &mut R) -> Result<(PrfKey, Tag)> {
    let f = GgmKey::generate(rng, params.domain_bits(), params.range_bits)?;
    let keys = pe::generate(params.plaintext_bits(), obf, rng)?;
    Ok((PrfKey { params, f, dk: keys.dk }, Tag { params, ek: keys.ek }))
}

/// A marked evaluation circuit. `embedded` keeps the message in debug
/// builds only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarkedCircuit {
    pub circuit: Circuit,
    pub embedded: Option<Bits>,
}

impl MarkedCircuit {
    pub fn from_circuit(circuit: Circuit) -> Self {
        Self { circuit, embedded: None }
    }

    pub fn eval(&self, x: &Bits) -> Result<Bits> {
        self.circuit.eval(x)?.ok_or(Error::Circuit("marked circuit returned bottom"))
    }

    pub fn domain_bits(&self) -> usize {
        self.circuit.input_bits()
    }

    pub fn range_bits(&self) -> usize {
        self.circuit.output_bits()
    }

    pub fn size(&self) -> usize {
        self.circuit.size()
    }
}

/// `D[F, dk, msg]`
pub fn marking_circuit(prfk: &PrfKey, msg: &Bits) -> Result<Circuit> {
    let p = prfk.params;
    if msg.len() != p.msg_bits {
        return Err(Error::LengthMismatch { expected: p.msg_bits, actual: msg.len() });
    }
    let (l, ib) = (p.seed_bits, p.index_bits());
    let mut b = CircuitBuilder::new(p.domain_bits(), p.range_bits);
    let [d, s, idx, gamma, bit, y, fx] = core::array::from_fn(|_| b.reg());
    let x = CircuitBuilder::INPUT;
    b.push(Op::Call { dst: d, src: x, circuit: Box::new(prfk.dk.circuit().clone()) });
    let invalid = b.push(Op::BranchBottom { src: d, target: 0 });
    b.push(Op::Slice { dst: s, src: d, start: 0, len: l });
    b.push(Op::Slice { dst: idx, src: d, start: l, len: ib });
    b.push(Op::Slice { dst: gamma, src: d, start: l + ib, len: 1 });
    b.push(Op::SelectBit { dst: bit, table: msg.clone(), index: idx });
    let out_of_range = b.push(Op::BranchBottom { src: bit, target: 0 });
    let same = b.push(Op::BranchEq { a: bit, b: gamma, target: 0 });
    b.push(Op::Prg { dst: y, src: s, prg: p.prg() });
    b.push(Op::Return { src: y });
    for at in [invalid, out_of_range, same] {
        b.patch_here(at);
    }
    b.push(Op::Ggm { dst: fx, src: x, key: prfk.f.clone() });
    b.push(Op::Return { src: fx });
    b.finish()
}

pub fn mark(prfk: &PrfKey, msg: &Bits, obf: &dyn Obfuscator) -> Result<MarkedCircuit> {
    let circuit = obf.obfuscate(marking_circuit(prfk, msg)?);
    let embedded = if cfg!(debug_assertions) { Some(msg.clone()) } else { None };
    Ok(MarkedCircuit { circuit, embedded })
}

/// PE plaintext `s ‖ (i−1) ‖ γ` for a 1-based index.
pub fn encode_plaintext(params: &ElwmParams, s: &Bits, i: usize, gamma: bool) -> Result<Bits> {
    params.check_index(i)?;
    if s.len() != params.seed_bits {
        return Err(Error::LengthMismatch { expected: params.seed_bits, actual: s.len() });
    }
    Ok(s.concat(&Bits::from_u64((i - 1) as u64, params.index_bits())).concat(&Bits::from_bools(&[gamma])))
}

/// `Sim(τ, i; coins)`. The top bit of `coins[0]` is `γ`.
pub fn sim(tag: &Tag, i: usize, coins: &[u8]) -> Result<Triple> {
    let p = tag.params;
    p.check_index(i)?;
    if coins.len() < p.sim_coin_bytes() {
        return Err(Error::LengthMismatch { expected: 8 * p.sim_coin_bytes(), actual: 8 * coins.len() });
    }
    let gamma = coins[0] >> 7 == 1;
    let sb = p.seed_bits.div_ceil(8);
    let s = Bits::from_bytes(p.seed_bits, &coins[1..1 + sb])?;
    let r = Bits::from_bytes(p.plaintext_bits(), &coins[1 + sb..])?;
    let x = tag.ek.encrypt_with(&encode_plaintext(&p, &s, i, gamma)?, &r)?;
    let y = p.prg().expand(&s)?;
    Ok(Triple::new(gamma, x, y))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DistributionKind {
    /// `b ← {0,1}`, `y_1 = Eval(x)`, `y_0` uniform; outputs `(b, x, y_b)`.
    RealD,
    /// `RealD` with the first bit complemented.
    RealDRev,
    /// `Sim(τ, i)` with coins `keyed_rand(K, i ‖ r)`.
    SimTau(usize),
    /// `γ ← {0,1}`; `y` uniform if `γ = msg[i]`, else `Eval(x)`.
    DRealAt(usize),
}

/// A distribution over `s` coins, materialized as its triple list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleDistribution {
    kind: DistributionKind,
    triples: Vec<Triple>,
}

const LABEL_REAL: &[u8] = b"real";
const LABEL_SIM: &[u8] = b"sim";

fn coin_input(label: &[u8], i: usize, r: usize) -> Vec<u8> {
    let mut v = Vec::with_capacity(label.len() + 16);
    v.extend_from_slice(label);
    v.extend_from_slice(&(i as u64).to_be_bytes());
    v.extend_from_slice(&(r as u64).to_be_bytes());
    v
}

/// Shared coins of the real distributions: `(x, y_0)`.
fn real_coins(params: &ElwmParams, key: &[u8], r: usize) -> Result<(Bits, Bits)> {
    let (n, m) = (params.domain_bits(), params.range_bits);
    let bytes = keyed_rand(key, &coin_input(LABEL_REAL, 0, r), n.div_ceil(8) + m.div_ceil(8));
    let x = Bits::from_bytes(n, &bytes)?;
    let y0 = Bits::from_bytes(m, &bytes[n.div_ceil(8)..])?;
    Ok((x, y0))
}

fn check_coins(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidParameter("coin space must be non-empty"));
    }
    Ok(())
}

impl TripleDistribution {
    pub fn real(prfk: &PrfKey, s: usize, key: &[u8]) -> Result<Self> {
        check_coins(s)?;
        let triples = (0..s)
            .map(|r| {
                let b = r % 2 == 1;
                let (x, y0) = real_coins(&prfk.params, key, r)?;
                let y = if b { prfk.eval(&x)? } else { y0 };
                Ok(Triple::new(b, x, y))
            })
            .collect::<Result<_>>()?;
        Ok(Self { kind: DistributionKind::RealD, triples })
    }

    pub fn real_rev(prfk: &PrfKey, s: usize, key: &[u8]) -> Result<Self> {
        let d = Self::real(prfk, s, key)?;
        Ok(Self { kind: DistributionKind::RealDRev, triples: d.triples.iter().map(Triple::flipped).collect() })
    }

    pub fn sim(tag: &Tag, i: usize, s: usize, key: &[u8]) -> Result<Self> {
        check_coins(s)?;
        tag.params.check_index(i)?;
        let need = tag.params.sim_coin_bytes();
        let triples = (0..s)
            .map(|r| {
                let mut coins = keyed_rand(key, &coin_input(LABEL_SIM, i, r), need);
                coins[0] = (coins[0] & 0x7f) | (((r % 2) as u8) << 7);
                sim(tag, i, &coins)
            })
            .collect::<Result<_>>()?;
        Ok(Self { kind: DistributionKind::SimTau(i), triples })
    }

    pub fn real_at(prfk: &PrfKey, msg: &Bits, i: usize, s: usize, key: &[u8]) -> Result<Self> {
        check_coins(s)?;
        prfk.params.check_index(i)?;
        if msg.len() != prfk.params.msg_bits {
            return Err(Error::LengthMismatch { expected: prfk.params.msg_bits, actual: msg.len() });
        }
        let target = msg.get(i - 1);
        let triples = (0..s)
            .map(|r| {
                // γ = b ⊕ msg[i] on the coins of D, so y is Eval(x) exactly when γ ≠ msg[i]
                let b = r % 2 == 1;
                let gamma = b ^ target;
                let (x, y0) = real_coins(&prfk.params, key, r)?;
                let y = if b { prfk.eval(&x)? } else { y0 };
                Ok(Triple::new(gamma, x, y))
            })
            .collect::<Result<_>>()?;
        Ok(Self { kind: DistributionKind::DRealAt(i), triples })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn coins(&self) -> usize {
        self.triples.len()
    }

    pub fn triple(&self, r: usize) -> &Triple {
        &self.triples[r]
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// The mixed binary POVM this distribution induces on `prog`.
    pub fn povm(&self, prog: &QuantumProgram) -> Result<MixedBinaryPOVM> {
        MixedBinaryPOVM::from_triples(prog, &self.triples)
    }
}

/// Everything a distribution may need, for building one by kind.
#[derive(Clone, Copy, Debug)]
pub struct DistributionContext<'a> {
    pub prfk: Option<&'a PrfKey>,
    pub tag: Option<&'a Tag>,
    pub msg: Option<&'a Bits>,
    pub coins: usize,
    pub key: &'a [u8],
}

pub fn build_distribution(kind: DistributionKind, ctx: &DistributionContext<'_>) -> Result<TripleDistribution> {
    let prfk = || ctx.prfk.ok_or(Error::InvalidParameter("distribution needs the PRF key"));
    match kind {
        DistributionKind::RealD => TripleDistribution::real(prfk()?, ctx.coins, ctx.key),
        DistributionKind::RealDRev => TripleDistribution::real_rev(prfk()?, ctx.coins, ctx.key),
        DistributionKind::SimTau(i) => {
            let tag = ctx.tag.ok_or(Error::InvalidParameter("distribution needs the tag"))?;
            TripleDistribution::sim(tag, i, ctx.coins, ctx.key)
        }
        DistributionKind::DRealAt(i) => {
            let msg = ctx.msg.ok_or(Error::InvalidParameter("distribution needs the message"))?;
            TripleDistribution::real_at(prfk()?, msg, i, ctx.coins, ctx.key)
        }
    }
}
