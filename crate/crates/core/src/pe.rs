//! Puncturable encryption with sparse, pseudorandom-looking ciphertexts.
//!
//! Ingredients for plaintext length `ℓ`: a PRG `ℓ → 2ℓ`, an injective
//! puncturable PRF `F: 3ℓ → 9ℓ` and a puncturable PRF `G: 9ℓ → ℓ`.
//! A ciphertext is `α ‖ β ‖ γ` with `α = PRG(s)`, `β = F(α‖m)` and
//! `γ = G(β) ⊕ m`, `12ℓ` bits in total. Decryption recomputes `m` from `γ`
//! and accepts only if `β` matches.
//!
//! The encryption key is the circuit `E[F,G]` passed through an
//! [`Obfuscator`]; the decryption key is the plain circuit `D[F,G]`.

use alloc::boxed::Box;

use rand::RngCore;

use crate::bits::Bits;
use crate::circuit::{Circuit, CircuitBuilder, Obfuscator, Op};
use crate::crypto::{GgmKey, InjectivePrfKey, Prg};
use crate::error::{Error, Result};

pub const CT_FACTOR: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncryptionKey(Circuit);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecryptionKey(Circuit);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PuncturedDecryptionKey {
    point: Bits,
    circuit: Circuit,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PeKeys {
    pub ek: EncryptionKey,
    pub dk: DecryptionKey,
}

impl EncryptionKey {
    pub fn from_circuit(c: Circuit) -> Result<Self> {
        let l = c.input_bits() / 2;
        if l == 0 || c.input_bits() != 2 * l || c.output_bits() != CT_FACTOR * l {
            return Err(Error::Decode("circuit does not have the (m, s) -> 12l shape"));
        }
        Ok(Self(c))
    }

    pub fn circuit(&self) -> &Circuit {
        &self.0
    }

    pub fn plain_bits(&self) -> usize {
        self.0.input_bits() / 2
    }

    pub fn ciphertext_bits(&self) -> usize {
        self.0.output_bits()
    }

    /// Deterministic encryption with explicit randomness `s`.
    pub fn encrypt_with(&self, m: &Bits, s: &Bits) -> Result<Bits> {
        let l = self.plain_bits();
        if m.len() != l {
            return Err(Error::LengthMismatch { expected: l, actual: m.len() });
        }
        if s.len() != l {
            return Err(Error::LengthMismatch { expected: l, actual: s.len() });
        }
        self.0.eval(&m.concat(s))?.ok_or(Error::Circuit("encryption circuit returned bottom"))
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &Bits, rng: &mut R) -> Result<Bits> {
        self.encrypt_with(m, &Bits::random(rng, self.plain_bits()))
    }
}

fn check_ct(c: &Bits, expected: usize) -> Result<()> {
    if c.len() != expected {
        return Err(Error::LengthMismatch { expected, actual: c.len() });
    }
    Ok(())
}

impl DecryptionKey {
    pub fn from_circuit(c: Circuit) -> Result<Self> {
        let l = c.output_bits();
        if l == 0 || c.input_bits() != CT_FACTOR * l {
            return Err(Error::Decode("circuit does not have the 12l -> l shape"));
        }
        Ok(Self(c))
    }

    pub fn circuit(&self) -> &Circuit {
        &self.0
    }

    pub fn plain_bits(&self) -> usize {
        self.0.output_bits()
    }

    pub fn ciphertext_bits(&self) -> usize {
        self.0.input_bits()
    }

    pub fn decrypt(&self, c: &Bits) -> Result<Option<Bits>> {
        check_ct(c, self.ciphertext_bits())?;
        self.0.eval(c)
    }

    /// `D_{≠c*}`: `⊥` on `c*`, otherwise `D`.
    pub fn puncture(&self, point: &Bits, obf: &dyn Obfuscator) -> Result<PuncturedDecryptionKey> {
        check_ct(point, self.ciphertext_bits())?;
        let mut b = CircuitBuilder::new(self.ciphertext_bits(), self.plain_bits());
        let (star, out) = (b.reg(), b.reg());
        b.push(Op::Const { dst: star, value: point.clone() });
        let hit = b.push(Op::BranchEq { a: CircuitBuilder::INPUT, b: star, target: 0 });
        b.push(Op::Call { dst: out, src: CircuitBuilder::INPUT, circuit: Box::new(self.0.clone()) });
        b.push(Op::Return { src: out });
        b.patch_here(hit);
        b.push(Op::ReturnBottom);
        Ok(PuncturedDecryptionKey { point: point.clone(), circuit: obf.obfuscate(b.finish()?) })
    }
}

impl PuncturedDecryptionKey {
    pub fn from_parts(point: Bits, circuit: Circuit) -> Result<Self> {
        check_ct(&point, circuit.input_bits())?;
        Ok(Self { point, circuit })
    }

    pub fn point(&self) -> &Bits {
        &self.point
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn decrypt(&self, c: &Bits) -> Result<Option<Bits>> {
        check_ct(c, self.circuit.input_bits())?;
        self.circuit.eval(c)
    }
}

/// `E[F,G]` on input `m ‖ s`.
pub fn encryption_circuit(f: &InjectivePrfKey, g: &GgmKey, l: usize) -> Result<Circuit> {
    let prg = Prg::new(l, 2 * l)?;
    let mut b = CircuitBuilder::new(2 * l, CT_FACTOR * l);
    let [m, s, alpha, am, beta, mask, gamma, ab, out] = core::array::from_fn(|_| b.reg());
    let input = CircuitBuilder::INPUT;
    b.push(Op::Slice { dst: m, src: input, start: 0, len: l });
    b.push(Op::Slice { dst: s, src: input, start: l, len: l });
    b.push(Op::Prg { dst: alpha, src: s, prg });
    b.push(Op::Concat { dst: am, a: alpha, b: m });
    b.push(Op::InjectivePrf { dst: beta, src: am, key: f.clone() });
    b.push(Op::Ggm { dst: mask, src: beta, key: g.clone() });
    b.push(Op::Xor { dst: gamma, a: mask, b: m });
    b.push(Op::Concat { dst: ab, a: alpha, b: beta });
    b.push(Op::Concat { dst: out, a: ab, b: gamma });
    b.push(Op::Return { src: out });
    b.finish()
}

/// `D[F,G]` on input `α ‖ β ‖ γ`.
pub fn decryption_circuit(f: &InjectivePrfKey, g: &GgmKey, l: usize) -> Result<Circuit> {
    let mut b = CircuitBuilder::new(CT_FACTOR * l, l);
    let [alpha, beta, gamma, mask, m, am, check] = core::array::from_fn(|_| b.reg());
    let input = CircuitBuilder::INPUT;
    b.push(Op::Slice { dst: alpha, src: input, start: 0, len: 2 * l });
    b.push(Op::Slice { dst: beta, src: input, start: 2 * l, len: 9 * l });
    b.push(Op::Slice { dst: gamma, src: input, start: 11 * l, len: l });
    b.push(Op::Ggm { dst: mask, src: beta, key: g.clone() });
    b.push(Op::Xor { dst: m, a: mask, b: gamma });
    b.push(Op::Concat { dst: am, a: alpha, b: m });
    b.push(Op::InjectivePrf { dst: check, src: am, key: f.clone() });
    let ok = b.push(Op::BranchEq { a: check, b: beta, target: 0 });
    b.push(Op::ReturnBottom);
    b.patch_here(ok);
    b.push(Op::Return { src: m });
    b.finish()
}

pub fn generate<R: RngCore + ?Sized>(l: usize, obf: &dyn Obfuscator, rng: &mut R) -> Result<PeKeys> {
    if l == 0 {
        return Err(Error::InvalidParameter("plaintext length must be positive"));
    }
    let f = InjectivePrfKey::generate(rng, 3 * l, 9 * l)?;
    let g = GgmKey::generate(rng, 9 * l, l)?;
    Ok(PeKeys {
        ek: EncryptionKey(obf.obfuscate(encryption_circuit(&f, &g, l)?)),
        dk: DecryptionKey(decryption_circuit(&f, &g, l)?),
    })
}
