//! The 256-entry EVM opcode table.
//!
//! Every byte value has an entry. Unassigned bytes decode as `INVALID`, which
//! is what the EVM does when it executes them. Fork availability is recorded
//! for reference only; decoding never consults it.

use serde::{Deserialize, Serialize};

/// Coarse grouping of opcodes by what they touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Stack,
    Memory,
    Storage,
    Arithmetic,
    Control,
    Environment,
    Log,
    System,
}

/// Hard fork that introduced an opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fork {
    Frontier,
    Homestead,
    Byzantium,
    Constantinople,
    Istanbul,
    London,
    Paris,
    Shanghai,
    Cancun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpcodeInfo {
    pub mnemonic: &'static str,
    /// Inline operand bytes following the opcode (PUSH1..PUSH32 only).
    pub operand_width: u8,
    /// Ends a basic block.
    pub terminator: bool,
    pub category: Category,
    pub stack_in: u8,
    pub stack_out: u8,
    /// `None` for unassigned bytes.
    pub since: Option<Fork>,
}

impl OpcodeInfo {
    pub const fn is_assigned(&self) -> bool {
        self.since.is_some()
    }
}

pub const STOP: u8 = 0x00;
pub const EQ: u8 = 0x14;
pub const CALLVALUE: u8 = 0x34;
pub const POP: u8 = 0x50;
pub const JUMP: u8 = 0x56;
pub const JUMPI: u8 = 0x57;
pub const JUMPDEST: u8 = 0x5b;
pub const PUSH0: u8 = 0x5f;
pub const PUSH1: u8 = 0x60;
pub const PUSH32: u8 = 0x7f;
pub const DUP1: u8 = 0x80;
pub const DUP16: u8 = 0x8f;
pub const SWAP1: u8 = 0x90;
pub const SWAP16: u8 = 0x9f;
pub const RETURN: u8 = 0xf3;
pub const REVERT: u8 = 0xfd;
pub const INVALID: u8 = 0xfe;
pub const SELFDESTRUCT: u8 = 0xff;

const UNASSIGNED: OpcodeInfo = OpcodeInfo {
    mnemonic: "INVALID",
    operand_width: 0,
    terminator: true,
    category: Category::Control,
    stack_in: 0,
    stack_out: 0,
    since: None,
};

const fn op(
    mnemonic: &'static str,
    category: Category,
    stack_in: u8,
    stack_out: u8,
    since: Fork,
) -> OpcodeInfo {
    OpcodeInfo {
        mnemonic,
        operand_width: 0,
        terminator: false,
        category,
        stack_in,
        stack_out,
        since: Some(since),
    }
}

const fn term(mnemonic: &'static str, stack_in: u8, since: Fork) -> OpcodeInfo {
    OpcodeInfo {
        terminator: true,
        ..op(mnemonic, Category::Control, stack_in, 0, since)
    }
}

const PUSH_NAMES: [&str; 33] = [
    "PUSH0", "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9",
    "PUSH10", "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18",
    "PUSH19", "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27",
    "PUSH28", "PUSH29", "PUSH30", "PUSH31", "PUSH32",
];
const DUP_NAMES: [&str; 16] = [
    "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10", "DUP11",
    "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
];
const SWAP_NAMES: [&str; 16] = [
    "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9", "SWAP10",
    "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16",
];
const LOG_NAMES: [&str; 5] = ["LOG0", "LOG1", "LOG2", "LOG3", "LOG4"];

const fn build() -> [OpcodeInfo; 256] {
    use Category::*;
    use Fork::*;

    let mut t = [UNASSIGNED; 256];

    t[0x00] = term("STOP", 0, Frontier);
    t[0x01] = op("ADD", Arithmetic, 2, 1, Frontier);
    t[0x02] = op("MUL", Arithmetic, 2, 1, Frontier);
    t[0x03] = op("SUB", Arithmetic, 2, 1, Frontier);
    t[0x04] = op("DIV", Arithmetic, 2, 1, Frontier);
    t[0x05] = op("SDIV", Arithmetic, 2, 1, Frontier);
    t[0x06] = op("MOD", Arithmetic, 2, 1, Frontier);
    t[0x07] = op("SMOD", Arithmetic, 2, 1, Frontier);
    t[0x08] = op("ADDMOD", Arithmetic, 3, 1, Frontier);
    t[0x09] = op("MULMOD", Arithmetic, 3, 1, Frontier);
    t[0x0a] = op("EXP", Arithmetic, 2, 1, Frontier);
    t[0x0b] = op("SIGNEXTEND", Arithmetic, 2, 1, Frontier);

    t[0x10] = op("LT", Arithmetic, 2, 1, Frontier);
    t[0x11] = op("GT", Arithmetic, 2, 1, Frontier);
    t[0x12] = op("SLT", Arithmetic, 2, 1, Frontier);
    t[0x13] = op("SGT", Arithmetic, 2, 1, Frontier);
    t[0x14] = op("EQ", Arithmetic, 2, 1, Frontier);
    t[0x15] = op("ISZERO", Arithmetic, 1, 1, Frontier);
    t[0x16] = op("AND", Arithmetic, 2, 1, Frontier);
    t[0x17] = op("OR", Arithmetic, 2, 1, Frontier);
    t[0x18] = op("XOR", Arithmetic, 2, 1, Frontier);
    t[0x19] = op("NOT", Arithmetic, 1, 1, Frontier);
    t[0x1a] = op("BYTE", Arithmetic, 2, 1, Frontier);
    t[0x1b] = op("SHL", Arithmetic, 2, 1, Constantinople);
    t[0x1c] = op("SHR", Arithmetic, 2, 1, Constantinople);
    t[0x1d] = op("SAR", Arithmetic, 2, 1, Constantinople);

    t[0x20] = op("KECCAK256", Arithmetic, 2, 1, Frontier);

    t[0x30] = op("ADDRESS", Environment, 0, 1, Frontier);
    t[0x31] = op("BALANCE", Environment, 1, 1, Frontier);
    t[0x32] = op("ORIGIN", Environment, 0, 1, Frontier);
    t[0x33] = op("CALLER", Environment, 0, 1, Frontier);
    t[0x34] = op("CALLVALUE", Environment, 0, 1, Frontier);
    t[0x35] = op("CALLDATALOAD", Environment, 1, 1, Frontier);
    t[0x36] = op("CALLDATASIZE", Environment, 0, 1, Frontier);
    t[0x37] = op("CALLDATACOPY", Environment, 3, 0, Frontier);
    t[0x38] = op("CODESIZE", Environment, 0, 1, Frontier);
    t[0x39] = op("CODECOPY", Environment, 3, 0, Frontier);
    t[0x3a] = op("GASPRICE", Environment, 0, 1, Frontier);
    t[0x3b] = op("EXTCODESIZE", Environment, 1, 1, Frontier);
    t[0x3c] = op("EXTCODECOPY", Environment, 4, 0, Frontier);
    t[0x3d] = op("RETURNDATASIZE", Environment, 0, 1, Byzantium);
    t[0x3e] = op("RETURNDATACOPY", Environment, 3, 0, Byzantium);
    t[0x3f] = op("EXTCODEHASH", Environment, 1, 1, Constantinople);

    t[0x40] = op("BLOCKHASH", Environment, 1, 1, Frontier);
    t[0x41] = op("COINBASE", Environment, 0, 1, Frontier);
    t[0x42] = op("TIMESTAMP", Environment, 0, 1, Frontier);
    t[0x43] = op("NUMBER", Environment, 0, 1, Frontier);
    t[0x44] = op("PREVRANDAO", Environment, 0, 1, Paris);
    t[0x45] = op("GASLIMIT", Environment, 0, 1, Frontier);
    t[0x46] = op("CHAINID", Environment, 0, 1, Istanbul);
    t[0x47] = op("SELFBALANCE", Environment, 0, 1, Istanbul);
    t[0x48] = op("BASEFEE", Environment, 0, 1, London);
    t[0x49] = op("BLOBHASH", Environment, 1, 1, Cancun);
    t[0x4a] = op("BLOBBASEFEE", Environment, 0, 1, Cancun);

    t[0x50] = op("POP", Stack, 1, 0, Frontier);
    t[0x51] = op("MLOAD", Memory, 1, 1, Frontier);
    t[0x52] = op("MSTORE", Memory, 2, 0, Frontier);
    t[0x53] = op("MSTORE8", Memory, 2, 0, Frontier);
    t[0x54] = op("SLOAD", Storage, 1, 1, Frontier);
    t[0x55] = op("SSTORE", Storage, 2, 0, Frontier);
    t[0x56] = term("JUMP", 1, Frontier);
    t[0x57] = term("JUMPI", 2, Frontier);
    t[0x58] = op("PC", Environment, 0, 1, Frontier);
    t[0x59] = op("MSIZE", Memory, 0, 1, Frontier);
    t[0x5a] = op("GAS", Environment, 0, 1, Frontier);
    t[0x5b] = op("JUMPDEST", Control, 0, 0, Frontier);
    t[0x5c] = op("TLOAD", Storage, 1, 1, Cancun);
    t[0x5d] = op("TSTORE", Storage, 2, 0, Cancun);
    t[0x5e] = op("MCOPY", Memory, 3, 0, Cancun);
    t[0x5f] = op("PUSH0", Stack, 0, 1, Shanghai);

    let mut n = 1;
    while n <= 32 {
        t[0x5f + n] = OpcodeInfo {
            operand_width: n as u8,
            ..op(PUSH_NAMES[n], Stack, 0, 1, Frontier)
        };
        n += 1;
    }
    let mut n = 0;
    while n < 16 {
        let depth = n as u8 + 1;
        t[0x80 + n] = op(DUP_NAMES[n], Stack, depth, depth + 1, Frontier);
        t[0x90 + n] = op(SWAP_NAMES[n], Stack, depth + 1, depth + 1, Frontier);
        n += 1;
    }
    let mut n = 0;
    while n < 5 {
        t[0xa0 + n] = op(LOG_NAMES[n], Log, n as u8 + 2, 0, Frontier);
        n += 1;
    }

    t[0xf0] = op("CREATE", System, 3, 1, Frontier);
    t[0xf1] = op("CALL", System, 7, 1, Frontier);
    t[0xf2] = op("CALLCODE", System, 7, 1, Frontier);
    t[0xf3] = term("RETURN", 2, Frontier);
    t[0xf4] = op("DELEGATECALL", System, 6, 1, Homestead);
    t[0xf5] = op("CREATE2", System, 4, 1, Constantinople);
    t[0xfa] = op("STATICCALL", System, 6, 1, Byzantium);
    t[0xfd] = term("REVERT", 2, Byzantium);
    t[0xfe] = term("INVALID", 0, Frontier);
    t[0xff] = OpcodeInfo {
        category: System,
        ..term("SELFDESTRUCT", 1, Frontier)
    };

    t
}

static TABLE: [OpcodeInfo; 256] = build();

/// Older or alternative spellings accepted when parsing mnemonics.
const ALIASES: [(&str, &str); 4] = [
    ("SHA3", "KECCAK256"),
    ("GETPC", "PC"),
    ("SUICIDE", "SELFDESTRUCT"),
    ("DIFFICULTY", "PREVRANDAO"),
];

/// Read-only view over the static opcode table.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpcodeTable;

impl OpcodeTable {
    #[inline]
    pub fn get(byte: u8) -> &'static OpcodeInfo {
        &TABLE[byte as usize]
    }

    pub fn entries() -> impl Iterator<Item = (u8, &'static OpcodeInfo)> {
        TABLE.iter().enumerate().map(|(i, info)| (i as u8, info))
    }

    /// Looks up an assigned opcode by mnemonic, case-insensitively, accepting
    /// the legacy aliases `SHA3`, `GETPC`, `SUICIDE` and `DIFFICULTY`.
    pub fn by_mnemonic(name: &str) -> Option<u8> {
        let name = ALIASES
            .iter()
            .find(|(alias, _)| alias.eq_ignore_ascii_case(name))
            .map_or(name, |(_, canonical)| canonical);
        TABLE
            .iter()
            .position(|info| info.is_assigned() && info.mnemonic.eq_ignore_ascii_case(name))
            .map(|i| i as u8)
    }

    /// Canonical spelling of a mnemonic, or `None` if it names no opcode.
    pub fn canonical_mnemonic(name: &str) -> Option<&'static str> {
        Self::by_mnemonic(name).map(|b| TABLE[b as usize].mnemonic)
    }
}

/// PUSH0..PUSH32, POP, DUP1..DUP16 and SWAP1..SWAP16.
#[inline]
pub fn is_stack_op(byte: u8) -> bool {
    matches!(byte, POP | PUSH0..=PUSH32 | DUP1..=DUP16 | SWAP1..=SWAP16)
}

#[inline]
pub fn is_push(byte: u8) -> bool {
    (PUSH0..=PUSH32).contains(&byte)
}

/// Same test as [`is_stack_op`] but on a mnemonic token.
pub fn is_stack_mnemonic(token: &str) -> bool {
    fn numbered(token: &str, prefix: &str, range: core::ops::RangeInclusive<u32>) -> bool {
        token
            .strip_prefix(prefix)
            .filter(|digits| *digits == "0" || !digits.starts_with('0'))
            .filter(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|digits| digits.parse::<u32>().ok())
            .is_some_and(|n| range.contains(&n))
    }
    token == "POP"
        || numbered(token, "PUSH", 0..=32)
        || numbered(token, "DUP", 1..=16)
        || numbered(token, "SWAP", 1..=16)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_covers_every_byte() {
        assert_eq!(OpcodeTable::entries().count(), 256);
        let assigned = OpcodeTable::entries()
            .filter(|(_, i)| i.is_assigned())
            .count();
        // Through Cancun, counting the designated INVALID (0xfe).
        assert_eq!(assigned, 149);
        assert_eq!(OpcodeTable::get(0x0c).mnemonic, "INVALID");
        assert!(!OpcodeTable::get(0x0c).is_assigned());
    }

    #[test]
    fn push_widths() {
        for (byte, info) in OpcodeTable::entries() {
            let expected = if (0x60..=0x7f).contains(&byte) {
                byte - 0x5f
            } else {
                0
            };
            assert_eq!(info.operand_width, expected, "{}", info.mnemonic);
        }
    }

    #[test]
    fn terminators_are_exactly_the_block_enders() {
        for (_, info) in OpcodeTable::entries() {
            let expected = matches!(
                info.mnemonic,
                "JUMP" | "JUMPI" | "STOP" | "RETURN" | "REVERT" | "SELFDESTRUCT" | "INVALID"
            );
            assert_eq!(info.terminator, expected, "{}", info.mnemonic);
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(OpcodeTable::by_mnemonic("SUICIDE"), Some(SELFDESTRUCT));
        assert_eq!(OpcodeTable::by_mnemonic("sha3"), Some(0x20));
        assert_eq!(OpcodeTable::by_mnemonic("jumpdest"), Some(JUMPDEST));
        assert_eq!(OpcodeTable::by_mnemonic("NOPE"), None);
        assert_eq!(
            OpcodeTable::canonical_mnemonic("DIFFICULTY"),
            Some("PREVRANDAO")
        );
    }

    #[test]
    fn stack_mnemonics() {
        for (byte, info) in OpcodeTable::entries().filter(|(_, i)| i.is_assigned()) {
            assert_eq!(
                is_stack_mnemonic(info.mnemonic),
                is_stack_op(byte),
                "{}",
                info.mnemonic
            );
        }
        assert!(!is_stack_mnemonic("PUSH33"));
        assert!(!is_stack_mnemonic("PUSH01"));
        assert!(!is_stack_mnemonic("DUP0"));
        assert!(!is_stack_mnemonic("SWAP"));
    }
}
