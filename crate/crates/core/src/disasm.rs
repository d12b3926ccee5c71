//! Linear-sweep disassembly.
//!
//! Every byte of the input is consumed exactly once, either as an opcode or
//! as an inline PUSH operand. Bytes that do not name an opcode decode as
//! `INVALID`. A PUSH whose operand runs past the end of code is zero-padded
//! to its declared width (the EVM reads missing code bytes as zero) and marked
//! `truncated`.

use alloc::vec::Vec;
use core::fmt;

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::hex;
pub use crate::hex::parse_hex;
use crate::opcode::{self, OpcodeInfo, OpcodeTable};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: u8,
    operand: [u8; 32],
    /// Number of operand bytes actually present in the code.
    present: u8,
}

impl Instruction {
    pub fn new(offset: usize, opcode: u8, available: &[u8]) -> Self {
        let width = OpcodeTable::get(opcode).operand_width as usize;
        let present = width.min(available.len());
        let mut operand = [0u8; 32];
        operand[..present].copy_from_slice(&available[..present]);
        Instruction {
            offset,
            opcode,
            operand,
            present: present as u8,
        }
    }

    #[inline]
    pub fn info(&self) -> &'static OpcodeInfo {
        OpcodeTable::get(self.opcode)
    }

    #[inline]
    pub fn mnemonic(&self) -> &'static str {
        self.info().mnemonic
    }

    #[inline]
    pub fn operand_width(&self) -> usize {
        self.info().operand_width as usize
    }

    /// Operand bytes, zero-padded to the declared width.
    #[inline]
    pub fn operand(&self) -> &[u8] {
        &self.operand[..self.operand_width()]
    }

    /// True when the code ended before the full operand was read.
    #[inline]
    pub fn is_truncated(&self) -> bool {
        (self.present as usize) < self.operand_width()
    }

    /// Bytes this instruction occupies in the code (opcode plus present operand bytes).
    #[inline]
    pub fn encoded_len(&self) -> usize {
        1 + self.present as usize
    }

    /// Offset of the next instruction when the code continues.
    #[inline]
    pub fn next_offset(&self) -> usize {
        self.offset + 1 + self.operand_width()
    }

    #[inline]
    pub fn is_push(&self) -> bool {
        opcode::is_push(self.opcode)
    }

    #[inline]
    pub fn is_terminator(&self) -> bool {
        self.info().terminator
    }

    /// Value pushed by a PUSH instruction if it fits in 64 bits.
    pub fn push_value(&self) -> Option<u64> {
        if !self.is_push() {
            return None;
        }
        let operand = self.operand();
        let significant = operand
            .iter()
            .position(|&b| b != 0)
            .unwrap_or(operand.len());
        if operand.len() - significant > 8 {
            return None;
        }
        Some(operand.iter().fold(0u64, |acc, &b| acc << 8 | b as u64))
    }

    /// Low four bytes of a PUSH operand, i.e. the value modulo 2^32.
    pub fn push_low_u32(&self) -> Option<u32> {
        if !self.is_push() {
            return None;
        }
        let operand = self.operand();
        let tail = &operand[operand.len().saturating_sub(4)..];
        Some(tail.iter().fold(0u32, |acc, &b| acc << 8 | b as u32))
    }

    /// Appends the bytes this instruction was decoded from.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.opcode);
        out.extend_from_slice(&self.operand[..self.present as usize]);
    }
}

impl fmt::Debug for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:#x}", self.mnemonic(), self.offset)?;
        if self.operand_width() > 0 {
            write!(f, " 0x{}", hex::encode(self.operand()))?;
        }
        if self.is_truncated() {
            f.write_str(" (truncated)")?;
        }
        Ok(())
    }
}

/// `offset  mnemonic  operand_hex` listing line.
impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}  {}", self.offset, self.mnemonic())?;
        if self.operand_width() > 0 {
            write!(f, "  0x{}", hex::encode(self.operand()))?;
        }
        Ok(())
    }
}

impl Serialize for Instruction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let has_operand = self.operand_width() > 0;
        let len = 3 + has_operand as usize + self.is_truncated() as usize;
        let mut s = serializer.serialize_struct("Instruction", len)?;
        s.serialize_field("offset", &self.offset)?;
        s.serialize_field("opcode", &self.opcode)?;
        s.serialize_field("mnemonic", self.mnemonic())?;
        if has_operand {
            s.serialize_field("operand", &hex::encode_prefixed(self.operand()))?;
        } else {
            s.skip_field("operand")?;
        }
        if self.is_truncated() {
            s.serialize_field("truncated", &true)?;
        } else {
            s.skip_field("truncated")?;
        }
        s.end()
    }
}

/// Iterator form of [`disassemble`].
#[derive(Debug, Clone)]
pub struct Disassembler<'a> {
    code: &'a [u8],
    pos: usize,
}

impl<'a> Disassembler<'a> {
    pub fn new(code: &'a [u8]) -> Self {
        Disassembler { code, pos: 0 }
    }
}

impl Iterator for Disassembler<'_> {
    type Item = Instruction;

    fn next(&mut self) -> Option<Instruction> {
        let &opcode = self.code.get(self.pos)?;
        let insn = Instruction::new(self.pos, opcode, &self.code[self.pos + 1..]);
        self.pos += insn.encoded_len();
        Some(insn)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.code.len() - self.pos;
        (left.div_ceil(33), Some(left))
    }
}

pub fn disassemble(code: &[u8]) -> Vec<Instruction> {
    Disassembler::new(code).collect()
}

/// Splits off the CBOR metadata trailer solc appends to runtime code
/// (`a1..`/`a2..` map, big-endian length in the last two bytes). Returns
/// `(code, trailer)`; the trailer is empty when none is recognized.
pub fn strip_metadata(code: &[u8]) -> (&[u8], &[u8]) {
    let Some(len_bytes) = code.len().checked_sub(2).map(|at| &code[at..]) else {
        return (code, &[]);
    };
    let n = u16::from_be_bytes([len_bytes[0], len_bytes[1]]) as usize;
    let Some(start) = code.len().checked_sub(n + 2) else {
        return (code, &[]);
    };
    let body = &code[start..code.len() - 2];
    // small map whose first key is a short text string
    match body {
        [0xa1..=0xb7, 0x60..=0x77, ..] => code.split_at(start),
        _ => (code, &[]),
    }
}

/// Inverse of [`disassemble`]: concatenates opcode and present operand bytes.
pub fn reassemble(instructions: &[Instruction]) -> Vec<u8> {
    let mut out = Vec::with_capacity(instructions.len() * 2);
    for insn in instructions {
        insn.encode_into(&mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn metadata_trailer() {
        let trailer = parse_hex("a165627a7a72305820").unwrap();
        let mut code = vec![0x60, 0x01, 0x00];
        code.extend_from_slice(&trailer);
        code.extend_from_slice(&(trailer.len() as u16).to_be_bytes());
        let (body, meta) = strip_metadata(&code);
        assert_eq!(body, [0x60, 0x01, 0x00]);
        assert_eq!(meta.len(), trailer.len() + 2);
        assert_eq!(strip_metadata(&[0x00]), (&[0x00][..], &[][..]));
        // length that overruns the code
        assert_eq!(strip_metadata(&[0x00, 0x00, 0x10]).1, &[] as &[u8]);
        // not a CBOR map
        assert_eq!(strip_metadata(&[0x60, 0x01, 0x00, 0x02]).1, &[] as &[u8]);
    }
    use alloc::vec;
    use proptest::prelude::*;

    fn listing(code: &[u8]) -> Vec<(usize, &'static str, Vec<u8>, bool)> {
        disassemble(code)
            .iter()
            .map(|i| {
                (
                    i.offset,
                    i.mnemonic(),
                    i.operand().to_vec(),
                    i.is_truncated(),
                )
            })
            .collect()
    }

    #[test]
    fn single_stop() {
        assert_eq!(listing(&[0x00]), vec![(0, "STOP", vec![], false)]);
    }

    #[test]
    fn push_push_add() {
        let code = parse_hex("0x6001600201").unwrap();
        assert_eq!(
            listing(&code),
            vec![
                (0, "PUSH1", vec![0x01], false),
                (2, "PUSH1", vec![0x02], false),
                (4, "ADD", vec![], false),
            ]
        );
    }

    #[test]
    fn truncated_push_is_zero_padded() {
        let insns = disassemble(&parse_hex("0x61AA").unwrap());
        assert_eq!(insns.len(), 1);
        assert_eq!(insns[0].mnemonic(), "PUSH2");
        assert_eq!(insns[0].operand(), &[0xaa, 0x00]);
        assert!(insns[0].is_truncated());
        assert_eq!(insns[0].push_value(), Some(0xaa00));
        assert_eq!(reassemble(&insns), vec![0x61, 0xaa]);
    }

    #[test]
    fn push_with_no_operand_bytes() {
        let insns = disassemble(&[0x7f]);
        assert_eq!(insns[0].operand(), &[0u8; 32]);
        assert!(insns[0].is_truncated());
        assert_eq!(insns[0].encoded_len(), 1);
    }

    #[test]
    fn unknown_bytes_decode_as_invalid() {
        let insns = disassemble(&[0x0c, 0xef, 0xfe]);
        assert!(insns.iter().all(|i| i.mnemonic() == "INVALID"));
        assert_eq!(
            insns.iter().map(|i| i.opcode).collect::<Vec<_>>(),
            [0x0c, 0xef, 0xfe]
        );
    }

    #[test]
    fn empty_code() {
        assert!(disassemble(&[]).is_empty());
    }

    #[test]
    fn push_values() {
        let insns = disassemble(
            &parse_hex(
                "5f63a9059cbb7f0000000000000000000000000000000000000000000000000000000000000001",
            )
            .unwrap(),
        );
        assert_eq!(insns[0].push_value(), Some(0));
        assert_eq!(insns[1].push_value(), Some(0xa9059cbb));
        assert_eq!(insns[1].push_low_u32(), Some(0xa9059cbb));
        assert_eq!(insns[2].push_value(), Some(1));
        let wide = disassemble(&parse_hex("69ff000000000000000001").unwrap());
        assert_eq!(wide[0].push_value(), None);
        assert_eq!(wide[0].push_low_u32(), Some(1));
        assert_eq!(disassemble(&[0x01])[0].push_value(), None);
    }

    #[test]
    fn listing_format() {
        let insns = disassemble(&parse_hex("6001600201").unwrap());
        assert_eq!(insns[0].to_string(), "00000000  PUSH1  0x01");
        assert_eq!(insns[2].to_string(), "00000004  ADD");
    }

    proptest! {
        #[test]
        fn roundtrip_and_tiling(code in proptest::collection::vec(any::<u8>(), 0..4096)) {
            let insns = disassemble(&code);
            prop_assert_eq!(reassemble(&insns), code.clone());
            let mut expected = 0;
            for insn in &insns {
                prop_assert_eq!(insn.offset, expected);
                prop_assert_eq!(insn.operand().len(), insn.operand_width());
                expected = insn.offset + insn.encoded_len();
            }
            prop_assert_eq!(expected, code.len());
        }
    }
}
