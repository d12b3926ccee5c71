//! Stack-operation stripping.
//!
//! Despite the name, nothing here builds phi nodes or numbers values. The
//! "SSA" opcode form used for detection features is the execution-ordered
//! opcode stream with PUSH, POP, DUP and SWAP removed; everything else,
//! `JUMPDEST` and `PC` included, is kept in order.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::opcode::is_stack_mnemonic;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsaSequence {
    pub tokens: Vec<String>,
    pub source_len: usize,
    pub removed: usize,
}

pub fn to_ssa<S: AsRef<str>>(tokens: &[S]) -> SsaSequence {
    let kept: Vec<String> = tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_stack_mnemonic(t))
        .map(ToString::to_string)
        .collect();
    SsaSequence {
        source_len: tokens.len(),
        removed: tokens.len() - kept.len(),
        tokens: kept,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcode::OpcodeTable;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn strips_pushes() {
        let out = to_ssa(&["PUSH1", "PUSH1", "ADD", "STOP"]);
        assert_eq!(out.tokens, ["ADD", "STOP"]);
        assert_eq!(out.removed, 2);
        assert_eq!(out.source_len, 4);
    }

    #[test]
    fn empty() {
        let out = to_ssa::<&str>(&[]);
        assert!(out.tokens.is_empty());
        assert_eq!(out.removed, 0);
    }

    #[test]
    fn keeps_control_tokens() {
        let out = to_ssa(&[
            "JUMPDEST", "PC", "DUP16", "SWAP1", "POP", "PUSH32", "PUSH0", "SLOAD",
        ]);
        assert_eq!(out.tokens, ["JUMPDEST", "PC", "SLOAD"]);
    }

    fn arb_mnemonic() -> impl Strategy<Value = String> {
        let names: Vec<String> = OpcodeTable::entries()
            .map(|(_, i)| i.mnemonic.to_string())
            .collect();
        proptest::sample::select(names)
    }

    proptest! {
        #[test]
        fn idempotent_and_conserving(tokens in proptest::collection::vec(arb_mnemonic(), 0..200)) {
            let once = to_ssa(&tokens);
            prop_assert_eq!(once.tokens.len() + once.removed, tokens.len());
            let twice = to_ssa(&once.tokens);
            prop_assert_eq!(&twice.tokens, &once.tokens);
            prop_assert_eq!(twice.removed, 0);
            prop_assert!(once.tokens.iter().all(|t| !is_stack_mnemonic(t)));
        }
    }

    #[test]
    fn subsequence_of_input() {
        let input = vec!["PUSH2", "CALLER", "DUP1", "SSTORE", "SWAP2", "RETURN"];
        let out = to_ssa(&input);
        let mut it = input.iter();
        assert!(out.tokens.iter().all(|t| it.any(|s| s == t)));
    }
}
