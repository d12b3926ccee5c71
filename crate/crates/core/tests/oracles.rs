//! Cross-checks against independent references: pyevmasm's opcode table,
//! py-evm's PUSH semantics (both frozen in fixtures/evm_reference.json) and
//! tiny-keccak for selectors.

use std::collections::BTreeMap;

use evmscope_core::disasm::disassemble;
use evmscope_core::hex::parse_hex;
use evmscope_core::opcode::{Fork, OpcodeTable};
use evmscope_core::signature::{selector_of, Selector, SignatureDb};
use serde::Deserialize;
use tiny_keccak::{Hasher, Keccak};

#[derive(Deserialize)]
struct RefOp {
    name: String,
    operand_size: u8,
    pops: u8,
    pushes: u8,
}

#[derive(Deserialize)]
struct Reference {
    table: BTreeMap<u8, RefOp>,
    unknown: Vec<u8>,
    samples: BTreeMap<String, Vec<(usize, String, Option<serde_json::Value>)>>,
    truncated_push: BTreeMap<String, String>,
}

fn reference() -> Reference {
    let text = include_str!("fixtures/evm_reference.json");
    serde_json::from_str(text).unwrap()
}

/// Known mistakes in the reference: CREATE2 pops endowment, offset, size
/// and salt, but pyevmasm lists three inputs.
const REFERENCE_ERRATA: &[(&str, u8, u8)] = &[("CREATE2", 4, 1)];

#[test]
fn opcode_table_matches_reference() {
    let r = reference();
    assert!(r.table.len() > 130);
    for (byte, op) in &r.table {
        let ours = OpcodeTable::get(*byte);
        assert_eq!(
            Some(ours.mnemonic),
            OpcodeTable::canonical_mnemonic(&op.name),
            "byte {byte:#04x}"
        );
        assert_eq!(ours.operand_width, op.operand_size, "{}", op.name);
        let expected = REFERENCE_ERRATA
            .iter()
            .find(|(name, ..)| *name == op.name)
            .map_or((op.pops, op.pushes), |&(_, i, o)| (i, o));
        assert_eq!((ours.stack_in, ours.stack_out), expected, "{}", op.name);
    }
}

#[test]
fn bytes_unknown_to_reference_are_later_forks_or_unassigned() {
    for byte in reference().unknown {
        let ours = OpcodeTable::get(byte);
        match ours.since {
            None => assert_eq!(ours.mnemonic, "INVALID"),
            Some(fork) => assert!(fork > Fork::Constantinople, "{} {fork:?}", ours.mnemonic),
        }
    }
}

#[test]
fn disassembly_matches_reference_samples() {
    for (hex, expected) in reference().samples {
        let ours = disassemble(&parse_hex(&hex).unwrap());
        if expected.is_empty() {
            continue;
        }
        assert_eq!(ours.len(), expected.len(), "{hex}");
        for (i, (pc, name, operand)) in ours.iter().zip(&expected).map(|(i, e)| (i, e.clone())) {
            assert_eq!(i.offset, pc);
            assert_eq!(Some(i.mnemonic()), OpcodeTable::canonical_mnemonic(&name));
            if let Some(v) = operand.and_then(|v| v.as_u64()) {
                assert_eq!(i.push_value(), Some(v));
            }
        }
    }
}

#[test]
fn truncated_push_matches_interpreter() {
    for (hex, pushed) in reference().truncated_push {
        let ours = &disassemble(&parse_hex(&hex).unwrap())[0];
        assert!(ours.is_truncated(), "{hex}");
        assert_eq!(ours.operand(), parse_hex(&pushed).unwrap(), "{hex}");
    }
}

fn keccak_selector(text: &str) -> [u8; 4] {
    let mut k = Keccak::v256();
    k.update(text.as_bytes());
    let mut out = [0u8; 32];
    k.finalize(&mut out);
    [out[0], out[1], out[2], out[3]]
}

const SIGNATURES: &[&str] = &[
    "transfer(address,uint256)",
    "balanceOf(address)",
    "approve(address,uint256)",
    "transferFrom(address,address,uint256)",
    "totalSupply()",
    "withdraw(address,uint256)",
    "multicall(bytes[])",
    "swap((address,uint256)[],bytes32)",
    "f(uint8[3],int256,bytes4)",
    "setApprovalForAll(address,bool)",
];

#[test]
fn selectors_match_keccak_oracle() {
    for sig in SIGNATURES {
        assert_eq!(selector_of(sig).unwrap().0, keccak_selector(sig), "{sig}");
    }
    assert_eq!(
        selector_of("transfer(address,uint256)").unwrap(),
        Selector::from_u32(0xa9059cbb)
    );
}

#[test]
fn database_rows_are_verified_against_oracle() {
    let rows: Vec<(Selector, &str)> = SIGNATURES
        .iter()
        .map(|s| (Selector(keccak_selector(s)), *s))
        .chain([(Selector::from_u32(0x12345678), "transfer(address,uint256)")])
        .collect();
    let (db, report) = SignatureDb::from_rows(rows);
    assert_eq!(report.accepted, SIGNATURES.len());
    assert_eq!(report.selector_mismatch, 1);
    for r in db.records() {
        assert_eq!(r.selector.0, keccak_selector(&r.text));
    }
}
