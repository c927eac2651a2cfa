//! Binary file formats for keys, tags and circuits.
//!
//! Every file starts with the 4-byte magic `QWM1` followed by a one-byte
//! kind tag. Integers are big-endian `u32`. A bit string is written as its
//! bit length followed by `⌈len/8⌉` bytes, leftmost bit in the high bit of
//! the first byte; padding bits must be zero.
//!
//! | kind | body |
//! |------|------|
//! | `0x01` bits | `bits` |
//! | `0x02` GGM key | `seed[16] ‖ domain_bits ‖ out_bits` |
//! | `0x03` punctured GGM key | `domain_bits ‖ out_bits ‖ n ‖ points[n] ‖ r ‖ (depth ‖ prefix ‖ seed[16])[r]` |
//! | `0x04` injective PRF key | `ggm ‖ hash` |
//! | `0x05` circuit | `input_bits ‖ output_bits ‖ registers ‖ n ‖ op[n]` |
//! | `0x06` PRF key | `params ‖ ggm ‖ circuit(dk)` |
//! | `0x07` tag | `params ‖ circuit(ek)` |
//! | `0x08` marked circuit | `circuit` |
//!
//! `params` is `msg_bits ‖ seed_bits ‖ range_bits`; `hash` is
//! `cols ‖ column[cols] ‖ offset`. Co-path records are written in the
//! order the key stores them, sorted by `(depth, prefix)`.

use std::path::Path;

use qwm_core::bits::Bits;
use qwm_core::circuit::{Circuit, Op};
use qwm_core::crypto::{
    AffineHash, CopathNode, GgmKey, InjectivePrfKey, Prg, PuncturedGgmKey, PuncturedInjectivePrfKey, SEED_BYTES,
};
use qwm_core::elwm::{ElwmParams, MarkedCircuit, PrfKey, Tag};
use qwm_core::pe::{DecryptionKey, EncryptionKey};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"QWM1";

/// Upper bound on any length field, to reject garbage before allocating.
const MAX_LEN: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Bits = 0x01,
    GgmKey = 0x02,
    PuncturedGgmKey = 0x03,
    InjectivePrfKey = 0x04,
    Circuit = 0x05,
    PrfKey = 0x06,
    Tag = 0x07,
    MarkedCircuit = 0x08,
}

impl Kind {
    fn from_byte(b: u8) -> CliResult<Self> {
        Ok(match b {
            0x01 => Self::Bits,
            0x02 => Self::GgmKey,
            0x03 => Self::PuncturedGgmKey,
            0x04 => Self::InjectivePrfKey,
            0x05 => Self::Circuit,
            0x06 => Self::PrfKey,
            0x07 => Self::Tag,
            0x08 => Self::MarkedCircuit,
            _ => return Err(CliError::decode(format!("unknown file kind 0x{b:02x}"))),
        })
    }
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("length fits in u32");
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn raw(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn bits(&mut self, b: &Bits) {
        self.u32(b.len());
        self.raw(b.as_bytes());
    }

    pub fn ggm(&mut self, k: &GgmKey) {
        self.raw(k.seed());
        self.u32(k.domain_bits());
        self.u32(k.out_bits());
    }

    pub fn punctured_ggm(&mut self, k: &PuncturedGgmKey) {
        self.u32(k.domain_bits());
        self.u32(k.out_bits());
        self.u32(k.points().len());
        for p in k.points() {
            self.bits(p);
        }
        self.u32(k.records().len());
        for r in k.records() {
            self.u32(r.depth);
            self.bits(&r.prefix);
            self.raw(&r.seed);
        }
    }

    pub fn hash(&mut self, h: &AffineHash) {
        self.u32(h.columns().len());
        for c in h.columns() {
            self.bits(c);
        }
        self.bits(h.offset());
    }

    pub fn injective(&mut self, k: &InjectivePrfKey) {
        self.ggm(k.ggm());
        self.hash(k.hash());
    }

    pub fn params(&mut self, p: &ElwmParams) {
        self.u32(p.msg_bits);
        self.u32(p.seed_bits);
        self.u32(p.range_bits);
    }

    pub fn circuit(&mut self, c: &Circuit) {
        self.u32(c.input_bits());
        self.u32(c.output_bits());
        self.u32(c.registers());
        self.u32(c.ops().len());
        for op in c.ops() {
            self.op(op);
        }
    }

    fn op(&mut self, op: &Op) {
        match op {
            Op::Const { dst, value } => {
                self.u8(0x01);
                self.u32(*dst as usize);
                self.bits(value);
            }
            Op::Slice { dst, src, start, len } => {
                self.u8(0x02);
                self.u32(*dst as usize);
                self.u32(*src as usize);
                self.u32(*start);
                self.u32(*len);
            }
            Op::Concat { dst, a, b } => {
                self.u8(0x03);
                self.u32(*dst as usize);
                self.u32(*a as usize);
                self.u32(*b as usize);
            }
            Op::Xor { dst, a, b } => {
                self.u8(0x04);
                self.u32(*dst as usize);
                self.u32(*a as usize);
                self.u32(*b as usize);
            }
            Op::Prg { dst, src, prg } => {
                self.u8(0x05);
                self.u32(*dst as usize);
                self.u32(*src as usize);
                self.u32(prg.in_bits());
                self.u32(prg.out_bits());
            }
            Op::Ggm { dst, src, key } => {
                self.u8(0x06);
                self.u32(*dst as usize);
                self.u32(*src as usize);
                self.ggm(key);
            }
            Op::PuncturedGgm { dst, src, key } => {
                self.u8(0x07);
                self.u32(*dst as usize);
                self.u32(*src as usize);
                self.punctured_ggm(key);
            }
            Op::InjectivePrf { dst, src, key } => {
                self.u8(0x08);
                self.u32(*dst as usize);
                self.u32(*src as usize);
                self.injective(key);
            }
            Op::PuncturedInjectivePrf { dst, src, key } => {
                self.u8(0x09);
                self.u32(*dst as usize);
                self.u32(*src as usize);
                self.punctured_ggm(key.ggm());
                self.hash(key.hash());
            }
            Op::Call { dst, src, circuit } => {
                self.u8(0x0a);
                self.u32(*dst as usize);
                self.u32(*src as usize);
                self.circuit(circuit);
            }
            Op::SelectBit { dst, table, index } => {
                self.u8(0x0b);
                self.u32(*dst as usize);
                self.bits(table);
                self.u32(*index as usize);
            }
            Op::BranchEq { a, b, target } => {
                self.u8(0x0c);
                self.u32(*a as usize);
                self.u32(*b as usize);
                self.u32(*target);
            }
            Op::BranchBottom { src, target } => {
                self.u8(0x0d);
                self.u32(*src as usize);
                self.u32(*target);
            }
            Op::Jump { target } => {
                self.u8(0x0e);
                self.u32(*target);
            }
            Op::Return { src } => {
                self.u8(0x0f);
                self.u32(*src as usize);
            }
            Op::ReturnBottom => self.u8(0x10),
        }
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn finish(&self) -> CliResult<()> {
        if self.pos != self.buf.len() {
            return Err(CliError::decode(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(CliError::decode("unexpected end of file"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> CliResult<usize> {
        let b = self.take(4)?;
        let v = u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize;
        if v > MAX_LEN {
            return Err(CliError::decode(format!("length field {v} is too large")));
        }
        Ok(v)
    }

    fn reg(&mut self) -> CliResult<u16> {
        u16::try_from(self.u32()?).map_err(|_| CliError::decode("register index overflows u16"))
    }

    fn seed(&mut self) -> CliResult<[u8; SEED_BYTES]> {
        let mut s = [0u8; SEED_BYTES];
        s.copy_from_slice(self.take(SEED_BYTES)?);
        Ok(s)
    }

    pub fn bits(&mut self) -> CliResult<Bits> {
        let len = self.u32()?;
        let raw = self.take(len.div_ceil(8))?;
        let b = Bits::from_bytes(len, raw)?;
        if b.as_bytes() != raw {
            return Err(CliError::decode("nonzero padding bits"));
        }
        Ok(b)
    }

    pub fn ggm(&mut self) -> CliResult<GgmKey> {
        let seed = self.seed()?;
        let domain = self.u32()?;
        let out = self.u32()?;
        Ok(GgmKey::from_parts(seed, domain, out)?)
    }

    pub fn punctured_ggm(&mut self) -> CliResult<PuncturedGgmKey> {
        let domain = self.u32()?;
        let out = self.u32()?;
        let n = self.u32()?;
        let points = (0..n).map(|_| self.bits()).collect::<CliResult<Vec<_>>>()?;
        let r = self.u32()?;
        let records = (0..r)
            .map(|_| Ok(CopathNode { depth: self.u32()?, prefix: self.bits()?, seed: self.seed()? }))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(PuncturedGgmKey::from_parts(points, records, domain, out)?)
    }

    pub fn hash(&mut self) -> CliResult<AffineHash> {
        let n = self.u32()?;
        let cols = (0..n).map(|_| self.bits()).collect::<CliResult<Vec<_>>>()?;
        let offset = self.bits()?;
        Ok(AffineHash::from_parts(cols, offset)?)
    }

    pub fn injective(&mut self) -> CliResult<InjectivePrfKey> {
        let g = self.ggm()?;
        let h = self.hash()?;
        Ok(InjectivePrfKey::from_parts(g, h)?)
    }

    pub fn params(&mut self) -> CliResult<ElwmParams> {
        let m = self.u32()?;
        let s = self.u32()?;
        let r = self.u32()?;
        Ok(ElwmParams::new(m, s, r)?)
    }

    pub fn circuit(&mut self) -> CliResult<Circuit> {
        let input = self.u32()?;
        let output = self.u32()?;
        let regs = self.u32()?;
        let n = self.u32()?;
        let ops = (0..n).map(|_| self.op()).collect::<CliResult<Vec<_>>>()?;
        Ok(Circuit::new(input, output, regs, ops)?)
    }

    fn op(&mut self) -> CliResult<Op> {
        Ok(match self.u8()? {
            0x01 => Op::Const { dst: self.reg()?, value: self.bits()? },
            0x02 => Op::Slice { dst: self.reg()?, src: self.reg()?, start: self.u32()?, len: self.u32()? },
            0x03 => Op::Concat { dst: self.reg()?, a: self.reg()?, b: self.reg()? },
            0x04 => Op::Xor { dst: self.reg()?, a: self.reg()?, b: self.reg()? },
            0x05 => {
                let (dst, src) = (self.reg()?, self.reg()?);
                let (i, o) = (self.u32()?, self.u32()?);
                Op::Prg { dst, src, prg: Prg::new(i, o)? }
            }
            0x06 => Op::Ggm { dst: self.reg()?, src: self.reg()?, key: self.ggm()? },
            0x07 => Op::PuncturedGgm { dst: self.reg()?, src: self.reg()?, key: self.punctured_ggm()? },
            0x08 => Op::InjectivePrf { dst: self.reg()?, src: self.reg()?, key: self.injective()? },
            0x09 => {
                let (dst, src) = (self.reg()?, self.reg()?);
                let g = self.punctured_ggm()?;
                let h = self.hash()?;
                Op::PuncturedInjectivePrf { dst, src, key: PuncturedInjectivePrfKey::from_parts(g, h)? }
            }
            0x0a => Op::Call { dst: self.reg()?, src: self.reg()?, circuit: Box::new(self.circuit()?) },
            0x0b => Op::SelectBit { dst: self.reg()?, table: self.bits()?, index: self.reg()? },
            0x0c => Op::BranchEq { a: self.reg()?, b: self.reg()?, target: self.u32()? },
            0x0d => Op::BranchBottom { src: self.reg()?, target: self.u32()? },
            0x0e => Op::Jump { target: self.u32()? },
            0x0f => Op::Return { src: self.reg()? },
            0x10 => Op::ReturnBottom,
            t => return Err(CliError::decode(format!("unknown op tag 0x{t:02x}"))),
        })
    }
}

/// Something that has a file representation.
pub trait FileFormat: Sized {
    const KIND: Kind;
    fn write_body(&self, w: &mut Writer);
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(MAGIC);
        w.u8(Self::KIND as u8);
        self.write_body(&mut w);
        w.into_bytes()
    }

    fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(CliError::decode("bad magic"));
        }
        let kind = Kind::from_byte(r.u8()?)?;
        if kind != Self::KIND {
            return Err(CliError::decode(format!("expected a {:?} file, found {kind:?}", Self::KIND)));
        }
        let v = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(v)
    }

    fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl FileFormat for Bits {
    const KIND: Kind = Kind::Bits;
    fn write_body(&self, w: &mut Writer) {
        w.bits(self);
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        r.bits()
    }
}

impl FileFormat for GgmKey {
    const KIND: Kind = Kind::GgmKey;
    fn write_body(&self, w: &mut Writer) {
        w.ggm(self);
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        r.ggm()
    }
}

impl FileFormat for PuncturedGgmKey {
    const KIND: Kind = Kind::PuncturedGgmKey;
    fn write_body(&self, w: &mut Writer) {
        w.punctured_ggm(self);
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        r.punctured_ggm()
    }
}

impl FileFormat for InjectivePrfKey {
    const KIND: Kind = Kind::InjectivePrfKey;
    fn write_body(&self, w: &mut Writer) {
        w.injective(self);
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        r.injective()
    }
}

impl FileFormat for Circuit {
    const KIND: Kind = Kind::Circuit;
    fn write_body(&self, w: &mut Writer) {
        w.circuit(self);
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        r.circuit()
    }
}

impl FileFormat for PrfKey {
    const KIND: Kind = Kind::PrfKey;
    fn write_body(&self, w: &mut Writer) {
        w.params(&self.params);
        w.ggm(&self.f);
        w.circuit(self.dk.circuit());
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        let params = r.params()?;
        let f = r.ggm()?;
        let dk = DecryptionKey::from_circuit(r.circuit()?)?;
        Ok(PrfKey::from_parts(params, f, dk)?)
    }
}

impl FileFormat for Tag {
    const KIND: Kind = Kind::Tag;
    fn write_body(&self, w: &mut Writer) {
        w.params(&self.params);
        w.circuit(self.ek.circuit());
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        let params = r.params()?;
        let ek = EncryptionKey::from_circuit(r.circuit()?)?;
        Ok(Tag::from_parts(params, ek)?)
    }
}

impl FileFormat for MarkedCircuit {
    const KIND: Kind = Kind::MarkedCircuit;
    fn write_body(&self, w: &mut Writer) {
        w.circuit(&self.circuit);
    }
    fn read_body(r: &mut Reader<'_>) -> CliResult<Self> {
        Ok(MarkedCircuit::from_circuit(r.circuit()?))
    }
}
