//! Deterministic classical primitives.
//!
//! Everything here is built on SHA-256 used as a counter-mode stream with
//! length-prefixed, domain-separated inputs. Outputs are byte-identical
//! across platforms. Pseudorandomness is assumed from the hash and is not
//! something the test suite can check; tests cover determinism, lengths,
//! punctured correctness, injectivity and sparseness.

use alloc::vec::Vec;

use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::bits::Bits;
use crate::error::{Error, Result};

pub const SEED_BYTES: usize = 16;

const TAG_PRG: &[u8] = b"qwm/prg";
const TAG_GGM_NODE: &[u8] = b"qwm/ggm/node";
const TAG_GGM_LEAF: &[u8] = b"qwm/ggm/leaf";
const TAG_KEYED: &[u8] = b"qwm/keyed";

/// SHA-256 in counter mode over length-prefixed parts.
pub fn hash_stream(tag: &[u8], parts: &[&[u8]], out_bytes: usize) -> Vec<u8> {
    let mut prefix = Sha256::new();
    prefix.update((tag.len() as u32).to_be_bytes());
    prefix.update(tag);
    for p in parts {
        prefix.update((p.len() as u64).to_be_bytes());
        prefix.update(p);
    }
    let mut out = Vec::with_capacity(out_bytes + 32);
    let mut counter = 0u64;
    while out.len() < out_bytes {
        let mut h = prefix.clone();
        h.update(counter.to_be_bytes());
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(out_bytes);
    out
}

fn bits_header(b: &Bits) -> [u8; 8] {
    (b.len() as u64).to_be_bytes()
}

fn stream_bits(tag: &[u8], parts: &[&[u8]], out_bits: usize) -> Bits {
    let bytes = hash_stream(tag, parts, out_bits.div_ceil(8));
    Bits::from_bytes(out_bits, &bytes).expect("stream has the requested length")
}

/// Length-expanding generator `{0,1}^in_bits → {0,1}^out_bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prg {
    in_bits: usize,
    out_bits: usize,
}

impl Prg {
    pub fn new(in_bits: usize, out_bits: usize) -> Result<Self> {
        if in_bits == 0 || out_bits <= in_bits {
            return Err(Error::InvalidParameter("PRG needs 0 < in_bits < out_bits"));
        }
        Ok(Self { in_bits, out_bits })
    }

    pub fn in_bits(&self) -> usize {
        self.in_bits
    }

    pub fn out_bits(&self) -> usize {
        self.out_bits
    }

    pub fn expand(&self, seed: &Bits) -> Result<Bits> {
        if seed.len() != self.in_bits {
            return Err(Error::LengthMismatch { expected: self.in_bits, actual: seed.len() });
        }
        let out = (self.out_bits as u64).to_be_bytes();
        Ok(stream_bits(TAG_PRG, &[&bits_header(seed), seed.as_bytes(), &out], self.out_bits))
    }
}

type Seed = [u8; SEED_BYTES];

fn ggm_children(seed: &Seed) -> (Seed, Seed) {
    let mut h = Sha256::new();
    h.update(TAG_GGM_NODE);
    h.update(seed);
    let d = h.finalize();
    let mut l = [0u8; SEED_BYTES];
    let mut r = [0u8; SEED_BYTES];
    l.copy_from_slice(&d[..SEED_BYTES]);
    r.copy_from_slice(&d[SEED_BYTES..]);
    (l, r)
}

fn ggm_descend(mut seed: Seed, path: impl Iterator<Item = bool>) -> Seed {
    for bit in path {
        let (l, r) = ggm_children(&seed);
        seed = if bit { r } else { l };
    }
    seed
}

fn ggm_leaf(seed: &Seed, out_bits: usize) -> Bits {
    stream_bits(TAG_GGM_LEAF, &[seed, &(out_bits as u64).to_be_bytes()], out_bits)
}

/// GGM tree PRF `{0,1}^domain_bits → {0,1}^out_bits`. Input bit 0 chooses
/// the first branch under the root; `0` goes left.
#[derive(Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GgmKey {
    seed: Seed,
    domain_bits: usize,
    out_bits: usize,
}

impl core::fmt::Debug for GgmKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GgmKey")
            .field("domain_bits", &self.domain_bits)
            .field("out_bits", &self.out_bits)
            .finish_non_exhaustive()
    }
}

impl GgmKey {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R, domain_bits: usize, out_bits: usize) -> Result<Self> {
        let mut seed = [0u8; SEED_BYTES];
        rng.fill_bytes(&mut seed);
        Self::from_parts(seed, domain_bits, out_bits)
    }

    pub fn from_parts(seed: Seed, domain_bits: usize, out_bits: usize) -> Result<Self> {
        if domain_bits == 0 || out_bits == 0 {
            return Err(Error::InvalidParameter("GGM lengths must be positive"));
        }
        Ok(Self { seed, domain_bits, out_bits })
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn domain_bits(&self) -> usize {
        self.domain_bits
    }

    pub fn out_bits(&self) -> usize {
        self.out_bits
    }

    pub fn eval(&self, x: &Bits) -> Result<Bits> {
        if x.len() != self.domain_bits {
            return Err(Error::LengthMismatch { expected: self.domain_bits, actual: x.len() });
        }
        Ok(ggm_leaf(&ggm_descend(self.seed, x.iter()), self.out_bits))
    }

    /// Key punctured at the set `points`: seeds of the maximal subtrees that
    /// avoid every point of the set.
    pub fn puncture(&self, points: &[Bits]) -> Result<PuncturedGgmKey> {
        for p in points {
            if p.len() != self.domain_bits {
                return Err(Error::LengthMismatch { expected: self.domain_bits, actual: p.len() });
            }
        }
        let mut sorted = points.to_vec();
        sorted.sort();
        sorted.dedup();
        let mut records = Vec::new();
        self.copath(self.seed, Bits::zeros(0), &sorted, &mut records);
        records.sort_by(|a, b| (a.depth, &a.prefix).cmp(&(b.depth, &b.prefix)));
        Ok(PuncturedGgmKey { points: sorted, records, domain_bits: self.domain_bits, out_bits: self.out_bits })
    }

    fn copath(&self, seed: Seed, prefix: Bits, points: &[Bits], out: &mut Vec<CopathNode>) {
        let depth = prefix.len();
        let under: Vec<Bits> =
            points.iter().filter(|p| p.slice(0, depth).map(|s| s == prefix).unwrap_or(false)).cloned().collect();
        if under.is_empty() {
            out.push(CopathNode { depth, prefix, seed });
            return;
        }
        if depth == self.domain_bits {
            return;
        }
        let (l, r) = ggm_children(&seed);
        self.copath(l, prefix.concat(&Bits::from_bools(&[false])), &under, out);
        self.copath(r, prefix.concat(&Bits::from_bools(&[true])), &under, out);
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CopathNode {
    pub depth: usize,
    pub prefix: Bits,
    pub seed: Seed,
}

impl core::fmt::Debug for CopathNode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "CopathNode({})", self.prefix)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PuncturedGgmKey {
    points: Vec<Bits>,
    /// sorted by `(depth, prefix)`
    records: Vec<CopathNode>,
    domain_bits: usize,
    out_bits: usize,
}

impl PuncturedGgmKey {
    pub fn from_parts(
        points: Vec<Bits>,
        records: Vec<CopathNode>,
        domain_bits: usize,
        out_bits: usize,
    ) -> Result<Self> {
        if domain_bits == 0 || out_bits == 0 {
            return Err(Error::InvalidParameter("GGM lengths must be positive"));
        }
        for r in &records {
            if r.depth > domain_bits || r.prefix.len() != r.depth {
                return Err(Error::Decode("co-path record depth does not match its prefix"));
            }
        }
        if points.iter().any(|p| p.len() != domain_bits) {
            return Err(Error::Decode("punctured point has the wrong length"));
        }
        Ok(Self { points, records, domain_bits, out_bits })
    }

    pub fn points(&self) -> &[Bits] {
        &self.points
    }

    pub fn records(&self) -> &[CopathNode] {
        &self.records
    }

    pub fn domain_bits(&self) -> usize {
        self.domain_bits
    }

    pub fn out_bits(&self) -> usize {
        self.out_bits
    }

    /// `None` exactly on the punctured set.
    pub fn eval(&self, x: &Bits) -> Result<Option<Bits>> {
        if x.len() != self.domain_bits {
            return Err(Error::LengthMismatch { expected: self.domain_bits, actual: x.len() });
        }
        for r in &self.records {
            if x.slice(0, r.depth)? == r.prefix {
                let leaf = ggm_descend(r.seed, (r.depth..self.domain_bits).map(|i| x.get(i)));
                return Ok(Some(ggm_leaf(&leaf, self.out_bits)));
            }
        }
        Ok(None)
    }
}

/// `x ↦ A·x ⊕ b` over GF(2), with `A` stored as its columns.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineHash {
    columns: Vec<Bits>,
    offset: Bits,
}

impl AffineHash {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R, in_bits: usize, out_bits: usize) -> Self {
        let columns = (0..in_bits).map(|_| Bits::random(rng, out_bits)).collect();
        Self { columns, offset: Bits::random(rng, out_bits) }
    }

    pub fn from_parts(columns: Vec<Bits>, offset: Bits) -> Result<Self> {
        if columns.iter().any(|c| c.len() != offset.len()) {
            return Err(Error::Decode("hash columns disagree with the offset length"));
        }
        Ok(Self { columns, offset })
    }

    pub fn columns(&self) -> &[Bits] {
        &self.columns
    }

    pub fn offset(&self) -> &Bits {
        &self.offset
    }

    pub fn apply(&self, x: &Bits) -> Result<Bits> {
        if x.len() != self.columns.len() {
            return Err(Error::LengthMismatch { expected: self.columns.len(), actual: x.len() });
        }
        let mut acc = self.offset.clone();
        for (i, col) in self.columns.iter().enumerate() {
            if x.get(i) {
                acc = acc.xor(col)?;
            }
        }
        Ok(acc)
    }
}

/// Statistically injective puncturable PRF: `GGM(x) ⊕ A·x ⊕ b`. For a random
/// `(A, b)` the map is injective except with probability at most
/// `2^{2·in − out}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InjectivePrfKey {
    ggm: GgmKey,
    hash: AffineHash,
}

impl InjectivePrfKey {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R, in_bits: usize, out_bits: usize) -> Result<Self> {
        let ggm = GgmKey::generate(rng, in_bits, out_bits)?;
        Ok(Self { ggm, hash: AffineHash::generate(rng, in_bits, out_bits) })
    }

    pub fn from_parts(ggm: GgmKey, hash: AffineHash) -> Result<Self> {
        if hash.columns.len() != ggm.domain_bits || hash.offset.len() != ggm.out_bits {
            return Err(Error::Decode("hash shape does not match the GGM key"));
        }
        Ok(Self { ggm, hash })
    }

    pub fn ggm(&self) -> &GgmKey {
        &self.ggm
    }

    pub fn hash(&self) -> &AffineHash {
        &self.hash
    }

    pub fn in_bits(&self) -> usize {
        self.ggm.domain_bits
    }

    pub fn out_bits(&self) -> usize {
        self.ggm.out_bits
    }

    pub fn eval(&self, x: &Bits) -> Result<Bits> {
        self.ggm.eval(x)?.xor(&self.hash.apply(x)?)
    }

    pub fn puncture(&self, points: &[Bits]) -> Result<PuncturedInjectivePrfKey> {
        Ok(PuncturedInjectivePrfKey { ggm: self.ggm.puncture(points)?, hash: self.hash.clone() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PuncturedInjectivePrfKey {
    ggm: PuncturedGgmKey,
    hash: AffineHash,
}

impl PuncturedInjectivePrfKey {
    pub fn from_parts(ggm: PuncturedGgmKey, hash: AffineHash) -> Result<Self> {
        if hash.columns.len() != ggm.domain_bits || hash.offset.len() != ggm.out_bits {
            return Err(Error::Decode("hash shape does not match the GGM key"));
        }
        Ok(Self { ggm, hash })
    }

    pub fn ggm(&self) -> &PuncturedGgmKey {
        &self.ggm
    }

    pub fn hash(&self) -> &AffineHash {
        &self.hash
    }

    pub fn eval(&self, x: &Bits) -> Result<Option<Bits>> {
        match self.ggm.eval(x)? {
            Some(y) => Ok(Some(y.xor(&self.hash.apply(x)?)?)),
            None => Ok(None),
        }
    }
}

/// Secret-key encryption with sparse ciphertexts:
/// `(r, F_k(r) ⊕ 0^pad ‖ m)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SkeKey {
    prf: GgmKey,
    pad_bits: usize,
    msg_bits: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SkeCiphertext {
    pub nonce: Bits,
    pub body: Bits,
}

impl SkeCiphertext {
    pub fn to_bits(&self) -> Bits {
        self.nonce.concat(&self.body)
    }
}

impl SkeKey {
    pub fn generate<R: RngCore + ?Sized>(
        rng: &mut R,
        nonce_bits: usize,
        pad_bits: usize,
        msg_bits: usize,
    ) -> Result<Self> {
        let prf = GgmKey::generate(rng, nonce_bits, pad_bits + msg_bits)?;
        Ok(Self { prf, pad_bits, msg_bits })
    }

    pub fn nonce_bits(&self) -> usize {
        self.prf.domain_bits
    }

    pub fn pad_bits(&self) -> usize {
        self.pad_bits
    }

    pub fn msg_bits(&self) -> usize {
        self.msg_bits
    }

    pub fn ciphertext_bits(&self) -> usize {
        self.nonce_bits() + self.pad_bits + self.msg_bits
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &Bits, rng: &mut R) -> Result<SkeCiphertext> {
        if m.len() != self.msg_bits {
            return Err(Error::LengthMismatch { expected: self.msg_bits, actual: m.len() });
        }
        let nonce = Bits::random(rng, self.nonce_bits());
        let body = self.prf.eval(&nonce)?.xor(&Bits::zeros(self.pad_bits).concat(m))?;
        Ok(SkeCiphertext { nonce, body })
    }

    pub fn decrypt(&self, ct: &SkeCiphertext) -> Result<Option<Bits>> {
        if ct.body.len() != self.pad_bits + self.msg_bits {
            return Err(Error::LengthMismatch { expected: self.pad_bits + self.msg_bits, actual: ct.body.len() });
        }
        let plain = self.prf.eval(&ct.nonce)?.xor(&ct.body)?;
        if !plain.slice(0, self.pad_bits)?.is_zero() {
            return Ok(None);
        }
        Ok(Some(plain.slice(self.pad_bits, self.msg_bits)?))
    }

    pub fn decrypt_bits(&self, c: &Bits) -> Result<Option<Bits>> {
        if c.len() != self.ciphertext_bits() {
            return Err(Error::LengthMismatch { expected: self.ciphertext_bits(), actual: c.len() });
        }
        let n = self.nonce_bits();
        self.decrypt(&SkeCiphertext { nonce: c.slice(0, n)?, body: c.slice(n, c.len() - n)? })
    }
}

/// Keyed coin derivation `K, input ↦ out_bytes` bytes.
pub fn keyed_rand(key: &[u8], input: &[u8], out_bytes: usize) -> Vec<u8> {
    hash_stream(TAG_KEYED, &[key, input], out_bytes)
}

/// 32-byte seed for a per-index rng stream.
pub fn keyed_seed(key: &[u8], input: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    out.copy_from_slice(&keyed_rand(key, input, 32));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn all_points(bits: usize) -> impl Iterator<Item = Bits> {
        (0..1u64 << bits).map(move |v| Bits::from_u64(v, bits))
    }

    #[test]
    fn prg_lengths_and_determinism() {
        let prg = Prg::new(8, 16).unwrap();
        let s = Bits::from_u64(0xa5, 8);
        assert_eq!(prg.expand(&s).unwrap().len(), 16);
        assert_eq!(prg.expand(&s).unwrap(), prg.expand(&s).unwrap());
        assert!(prg.expand(&Bits::zeros(7)).is_err());
        assert!(Prg::new(8, 8).is_err());
    }

    #[test]
    fn golden_vectors() {
        // frozen outputs; any change to the byte layout breaks these
        let prg = Prg::new(8, 16).unwrap();
        assert_eq!(prg.expand(&Bits::from_u64(0xa5, 8)).unwrap().to_binary_string(), GOLDEN_PRG);
        let key = GgmKey::from_parts([7u8; SEED_BYTES], 4, 12).unwrap();
        assert_eq!(key.eval(&Bits::parse_binary("1011").unwrap()).unwrap().to_binary_string(), GOLDEN_GGM);
        assert_eq!(keyed_rand(b"key", b"input", 4), GOLDEN_KEYED);
    }

    const GOLDEN_PRG: &str = "0010001100111111";
    const GOLDEN_GGM: &str = "010101000100";
    const GOLDEN_KEYED: [u8; 4] = [184, 117, 66, 140];

    #[test]
    fn ggm_two_bit_puncture() {
        let key = GgmKey::generate(&mut rng(1), 2, 16).unwrap();
        let star = Bits::parse_binary("01").unwrap();
        let pk = key.puncture(core::slice::from_ref(&star)).unwrap();
        for x in all_points(2) {
            let got = pk.eval(&x).unwrap();
            if x == star {
                assert_eq!(got, None);
            } else {
                assert_eq!(got, Some(key.eval(&x).unwrap()));
            }
        }
        // co-path of 01 is {1, 00}
        let prefixes: Vec<_> = pk.records().iter().map(|r| r.prefix.to_binary_string()).collect();
        assert_eq!(prefixes, ["1", "00"]);
    }

    #[test]
    fn empty_puncture_is_full_key() {
        let key = GgmKey::generate(&mut rng(2), 5, 8).unwrap();
        let pk = key.puncture(&[]).unwrap();
        assert_eq!(pk.records().len(), 1);
        for x in all_points(5) {
            assert_eq!(pk.eval(&x).unwrap(), Some(key.eval(&x).unwrap()));
        }
    }

    #[test]
    fn punctured_key_holds_no_seed_on_punctured_paths() {
        let mut r = rng(3);
        let key = GgmKey::generate(&mut r, 6, 8).unwrap();
        let set: Vec<Bits> = (0..3).map(|_| Bits::random(&mut r, 6)).collect();
        let pk = key.puncture(&set).unwrap();
        for rec in pk.records() {
            for p in &set {
                assert_ne!(p.slice(0, rec.depth).unwrap(), rec.prefix);
            }
        }
    }

    #[test]
    fn injective_prf_shapes() {
        let key = InjectivePrfKey::generate(&mut rng(4), 9, 27).unwrap();
        let x = Bits::from_u64(77, 9);
        assert_eq!(key.eval(&x).unwrap().len(), 27);
        let pk = key.puncture(core::slice::from_ref(&x)).unwrap();
        assert_eq!(pk.eval(&x).unwrap(), None);
        let x2 = Bits::from_u64(78, 9);
        assert_eq!(pk.eval(&x2).unwrap(), Some(key.eval(&x2).unwrap()));
    }

    #[test]
    fn affine_hash_is_linear_plus_offset() {
        let h = AffineHash::generate(&mut rng(5), 6, 10);
        let a = Bits::from_u64(0b101100, 6);
        let b = Bits::from_u64(0b011010, 6);
        let zero = h.apply(&Bits::zeros(6)).unwrap();
        assert_eq!(&zero, h.offset());
        let lhs = h.apply(&a.xor(&b).unwrap()).unwrap();
        let rhs = h.apply(&a).unwrap().xor(&h.apply(&b).unwrap()).unwrap().xor(&zero).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn ske_round_trip_and_layout() {
        let mut r = rng(6);
        for _ in 0..100 {
            let key = SkeKey::generate(&mut r, 16, 16, 4).unwrap();
            for v in 0..16 {
                let m = Bits::from_u64(v, 4);
                let ct = key.encrypt(&m, &mut r).unwrap();
                assert_eq!(ct.to_bits().len(), 36);
                assert_eq!(key.decrypt(&ct).unwrap(), Some(m.clone()));
                assert_eq!(key.decrypt_bits(&ct.to_bits()).unwrap(), Some(m));
            }
        }
    }

    #[test]
    fn keyed_rand_separates_keys_and_inputs() {
        assert_eq!(keyed_rand(b"k", b"x", 40), keyed_rand(b"k", b"x", 40));
        assert_ne!(keyed_rand(b"k", b"x", 16), keyed_rand(b"k2", b"x", 16));
        assert_ne!(keyed_rand(b"k", b"x", 16), keyed_rand(b"k", b"y", 16));
        // length prefixes keep (ab, c) and (a, bc) apart
        assert_ne!(keyed_rand(b"ab", b"c", 16), keyed_rand(b"a", b"bc", 16));
        assert_eq!(keyed_rand(b"k", b"x", 40).len(), 40);
        assert_eq!(&keyed_rand(b"k", b"x", 40)[..16], &keyed_rand(b"k", b"x", 16)[..]);
    }
}
