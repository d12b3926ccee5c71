//! Function attribute inference from opcode context.
//!
//! Rules, applied to the raw (non-stripped) opcode context of one function:
//!
//! | attribute | rule |
//! |-----------|------|
//! | `view`    | no SSTORE, LOG0..LOG4, CREATE, CREATE2, SELFDESTRUCT, CALL, CALLCODE, DELEGATECALL |
//! | `payable` | CALLVALUE occurs |
//! | `pure`    | only stack operations and STOP, RETURN, REVERT |
//!
//! STATICCALL is allowed in view functions. Reads (SLOAD, MLOAD, BALANCE...)
//! are not singled out: they fail `pure` only because they are not in the
//! allowed set. The CALLVALUE rule takes presence at face value, so the
//! callvalue guard compilers put in non-payable functions makes them look
//! payable; load a different [`AttributeRuleTable`] to change that.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::opcode::{is_stack_mnemonic, OpcodeTable};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSet {
    pub view: bool,
    pub payable: bool,
    pub pure: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleTableError {
    #[error("unknown mnemonic {0:?} in attribute rule table")]
    UnknownMnemonic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRuleTable {
    pub view_forbidden: BTreeSet<String>,
    pub payable_marker: BTreeSet<String>,
    pub pure_allowed_nonstack: BTreeSet<String>,
}

impl Default for AttributeRuleTable {
    fn default() -> Self {
        fn set(names: &[&str]) -> BTreeSet<String> {
            names.iter().map(|s| s.to_string()).collect()
        }
        AttributeRuleTable {
            view_forbidden: set(&[
                "SSTORE",
                "LOG0",
                "LOG1",
                "LOG2",
                "LOG3",
                "LOG4",
                "CREATE",
                "CREATE2",
                "SELFDESTRUCT",
                "CALL",
                "CALLCODE",
                "DELEGATECALL",
            ]),
            payable_marker: set(&["CALLVALUE"]),
            pure_allowed_nonstack: set(&["STOP", "RETURN", "REVERT"]),
        }
    }
}

fn canonical(token: &str) -> Option<&'static str> {
    if token.eq_ignore_ascii_case("REVERSE") {
        return Some("REVERT");
    }
    OpcodeTable::canonical_mnemonic(token)
}

impl AttributeRuleTable {
    /// Canonicalizes every mnemonic (`SUICIDE` -> `SELFDESTRUCT`, `REVERSE` ->
    /// `REVERT`, case-folded) and rejects names that are not opcodes.
    pub fn normalized(self) -> Result<Self, RuleTableError> {
        fn norm(set: BTreeSet<String>) -> Result<BTreeSet<String>, RuleTableError> {
            set.into_iter()
                .map(|t| {
                    canonical(&t)
                        .map(ToString::to_string)
                        .ok_or(RuleTableError::UnknownMnemonic(t))
                })
                .collect()
        }
        Ok(AttributeRuleTable {
            view_forbidden: norm(self.view_forbidden)?,
            payable_marker: norm(self.payable_marker)?,
            pure_allowed_nonstack: norm(self.pure_allowed_nonstack)?,
        })
    }

    pub fn summarize<S: AsRef<str>>(&self, context: &[S]) -> AttributeSet {
        let mut view = true;
        let mut payable = false;
        let mut pure = true;
        for token in context {
            let raw = token.as_ref();
            let name = canonical(raw).unwrap_or(raw);
            if self.view_forbidden.contains(name) {
                view = false;
            }
            if self.payable_marker.contains(name) {
                payable = true;
            }
            if !is_stack_mnemonic(name) && !self.pure_allowed_nonstack.contains(name) {
                pure = false;
            }
        }
        AttributeSet {
            view,
            payable,
            pure: pure && view,
        }
    }
}

/// [`AttributeRuleTable::summarize`] with the default rules.
pub fn summarize<S: AsRef<str>>(context: &[S]) -> AttributeSet {
    AttributeRuleTable::default().summarize(context)
}
