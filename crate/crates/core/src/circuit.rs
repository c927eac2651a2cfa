//! Circuits as data: a small straight-line register machine over the crypto
//! primitives, plus the obfuscator interface.
//!
//! Register 0 holds the input. A register holds either a bit string or `⊥`;
//! every data op maps a `⊥` operand to `⊥`, so evaluation is total. Jumps go
//! forward only, so every circuit halts after at most `ops.len()` steps.
//!
//! The only obfuscator shipped is [`IdentityObfuscator`]. It preserves
//! functionality exactly and hides nothing: a marked circuit produced with
//! it can be read back in full, and none of the security properties that
//! rely on indistinguishability obfuscation hold.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::bits::Bits;
use crate::crypto::{GgmKey, InjectivePrfKey, Prg, PuncturedGgmKey, PuncturedInjectivePrfKey};
use crate::error::{Error, Result};

pub type Reg = u16;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Op {
    Const {
        dst: Reg,
        value: Bits,
    },
    Slice {
        dst: Reg,
        src: Reg,
        start: usize,
        len: usize,
    },
    Concat {
        dst: Reg,
        a: Reg,
        b: Reg,
    },
    Xor {
        dst: Reg,
        a: Reg,
        b: Reg,
    },
    Prg {
        dst: Reg,
        src: Reg,
        prg: Prg,
    },
    Ggm {
        dst: Reg,
        src: Reg,
        key: GgmKey,
    },
    PuncturedGgm {
        dst: Reg,
        src: Reg,
        key: PuncturedGgmKey,
    },
    InjectivePrf {
        dst: Reg,
        src: Reg,
        key: InjectivePrfKey,
    },
    PuncturedInjectivePrf {
        dst: Reg,
        src: Reg,
        key: PuncturedInjectivePrfKey,
    },
    Call {
        dst: Reg,
        src: Reg,
        circuit: Box<Circuit>,
    },
    /// `table[index]` as a one-bit string; `⊥` when `index` is out of range.
    SelectBit {
        dst: Reg,
        table: Bits,
        index: Reg,
    },
    /// Jump when both registers hold the same value (`⊥ = ⊥`).
    BranchEq {
        a: Reg,
        b: Reg,
        target: usize,
    },
    BranchBottom {
        src: Reg,
        target: usize,
    },
    Jump {
        target: usize,
    },
    Return {
        src: Reg,
    },
    ReturnBottom,
}

impl Op {
    fn registers(&self) -> Vec<Reg> {
        match self {
            Op::Const { dst, .. } => vec![*dst],
            Op::Slice { dst, src, .. }
            | Op::Prg { dst, src, .. }
            | Op::Ggm { dst, src, .. }
            | Op::PuncturedGgm { dst, src, .. }
            | Op::InjectivePrf { dst, src, .. }
            | Op::PuncturedInjectivePrf { dst, src, .. }
            | Op::Call { dst, src, .. } => vec![*dst, *src],
            Op::SelectBit { dst, index, .. } => vec![*dst, *index],
            Op::Concat { dst, a, b } | Op::Xor { dst, a, b } => vec![*dst, *a, *b],
            Op::BranchEq { a, b, .. } => vec![*a, *b],
            Op::BranchBottom { src, .. } | Op::Return { src } => vec![*src],
            Op::Jump { .. } | Op::ReturnBottom => vec![],
        }
    }

    fn target(&self) -> Option<usize> {
        match self {
            Op::BranchEq { target, .. } | Op::BranchBottom { target, .. } | Op::Jump { target } => Some(*target),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Circuit {
    input_bits: usize,
    output_bits: usize,
    registers: usize,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(input_bits: usize, output_bits: usize, registers: usize, ops: Vec<Op>) -> Result<Self> {
        if registers == 0 || registers > Reg::MAX as usize + 1 {
            return Err(Error::Circuit("register count out of range"));
        }
        for (pc, op) in ops.iter().enumerate() {
            if op.registers().iter().any(|&r| r as usize >= registers) {
                return Err(Error::Circuit("register index out of range"));
            }
            if let Some(t) = op.target() {
                if t <= pc || t >= ops.len() {
                    return Err(Error::Circuit("jump targets must point forward inside the program"));
                }
            }
        }
        match ops.last() {
            Some(Op::Return { .. } | Op::ReturnBottom | Op::Jump { .. }) => {}
            _ => return Err(Error::Circuit("program must end in a return")),
        }
        Ok(Self { input_bits, output_bits, registers, ops })
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn output_bits(&self) -> usize {
        self.output_bits
    }

    pub fn registers(&self) -> usize {
        self.registers
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Instruction count, sub-circuits included.
    pub fn size(&self) -> usize {
        self.ops
            .iter()
            .map(|op| match op {
                Op::Call { circuit, .. } => 1 + circuit.size(),
                _ => 1,
            })
            .sum()
    }

    /// `None` is `⊥`.
    pub fn eval(&self, input: &Bits) -> Result<Option<Bits>> {
        if input.len() != self.input_bits {
            return Err(Error::LengthMismatch { expected: self.input_bits, actual: input.len() });
        }
        let mut regs: Vec<Option<Bits>> = vec![None; self.registers];
        regs[0] = Some(input.clone());
        let mut pc = 0;
        loop {
            let op = self.ops.get(pc).ok_or(Error::Circuit("fell off the end of the program"))?;
            pc += 1;
            match op {
                Op::Const { dst, value } => regs[*dst as usize] = Some(value.clone()),
                Op::Slice { dst, src, start, len } => {
                    regs[*dst as usize] = match &regs[*src as usize] {
                        Some(v) => Some(v.slice(*start, *len)?),
                        None => None,
                    }
                }
                Op::Concat { dst, a, b } => {
                    regs[*dst as usize] = match (&regs[*a as usize], &regs[*b as usize]) {
                        (Some(x), Some(y)) => Some(x.concat(y)),
                        _ => None,
                    }
                }
                Op::Xor { dst, a, b } => {
                    regs[*dst as usize] = match (&regs[*a as usize], &regs[*b as usize]) {
                        (Some(x), Some(y)) => Some(x.xor(y)?),
                        _ => None,
                    }
                }
                Op::Prg { dst, src, prg } => {
                    regs[*dst as usize] = lift(&regs[*src as usize], |v| prg.expand(v).map(Some))?
                }
                Op::Ggm { dst, src, key } => {
                    regs[*dst as usize] = lift(&regs[*src as usize], |v| key.eval(v).map(Some))?
                }
                Op::PuncturedGgm { dst, src, key } => {
                    regs[*dst as usize] = lift(&regs[*src as usize], |v| key.eval(v))?
                }
                Op::InjectivePrf { dst, src, key } => {
                    regs[*dst as usize] = lift(&regs[*src as usize], |v| key.eval(v).map(Some))?
                }
                Op::PuncturedInjectivePrf { dst, src, key } => {
                    regs[*dst as usize] = lift(&regs[*src as usize], |v| key.eval(v))?
                }
                Op::Call { dst, src, circuit } => {
                    regs[*dst as usize] = lift(&regs[*src as usize], |v| circuit.eval(v))?
                }
                Op::SelectBit { dst, table, index } => {
                    regs[*dst as usize] = match &regs[*index as usize] {
                        Some(i) => match i.to_u64() {
                            Some(i) if (i as usize) < table.len() => Some(Bits::from_bools(&[table.get(i as usize)])),
                            _ => None,
                        },
                        None => None,
                    }
                }
                Op::BranchEq { a, b, target } => {
                    if regs[*a as usize] == regs[*b as usize] {
                        pc = *target;
                    }
                }
                Op::BranchBottom { src, target } => {
                    if regs[*src as usize].is_none() {
                        pc = *target;
                    }
                }
                Op::Jump { target } => pc = *target,
                Op::Return { src } => {
                    let out = regs[*src as usize].clone();
                    if let Some(v) = &out {
                        if v.len() != self.output_bits {
                            return Err(Error::LengthMismatch { expected: self.output_bits, actual: v.len() });
                        }
                    }
                    return Ok(out);
                }
                Op::ReturnBottom => return Ok(None),
            }
        }
    }
}

fn lift(v: &Option<Bits>, f: impl FnOnce(&Bits) -> Result<Option<Bits>>) -> Result<Option<Bits>> {
    match v {
        Some(v) => f(v),
        None => Ok(None),
    }
}

/// Register allocation and forward-label patching for hand-written circuits.
#[derive(Debug)]
pub struct CircuitBuilder {
    input_bits: usize,
    output_bits: usize,
    next_reg: usize,
    ops: Vec<Op>,
}

impl CircuitBuilder {
    pub const INPUT: Reg = 0;

    pub fn new(input_bits: usize, output_bits: usize) -> Self {
        Self { input_bits, output_bits, next_reg: 1, ops: Vec::new() }
    }

    pub fn reg(&mut self) -> Reg {
        let r = self.next_reg as Reg;
        self.next_reg += 1;
        r
    }

    /// Appends `op` and returns its position.
    pub fn push(&mut self, op: Op) -> usize {
        self.ops.push(op);
        self.ops.len() - 1
    }

    /// Position the next op will take.
    pub fn here(&self) -> usize {
        self.ops.len()
    }

    /// Points the jump at `at` to the next op.
    pub fn patch_here(&mut self, at: usize) {
        let here = self.here();
        match &mut self.ops[at] {
            Op::BranchEq { target, .. } | Op::BranchBottom { target, .. } | Op::Jump { target } => *target = here,
            _ => panic!("patching a non-jump op"),
        }
    }

    pub fn finish(self) -> Result<Circuit> {
        Circuit::new(self.input_bits, self.output_bits, self.next_reg, self.ops)
    }
}

/// Turns a circuit into an evaluable handle with identical input/output
/// behaviour.
pub trait Obfuscator: Send + Sync + core::fmt::Debug {
    fn name(&self) -> &'static str;
    fn obfuscate(&self, circuit: Circuit) -> Circuit;
}

/// Returns the circuit unchanged. Provides functionality only, no hiding.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityObfuscator;

impl Obfuscator for IdentityObfuscator {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn obfuscate(&self, circuit: Circuit) -> Circuit {
        circuit
    }
}
