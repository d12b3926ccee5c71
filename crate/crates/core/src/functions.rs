//! Public-function recovery from the selector dispatcher.
//!
//! The walk starts at the entry block and follows the compiler-generated
//! dispatcher. A dispatcher block ending in `JUMPI` is a *selector test* when
//! its last two PUSH constants are the function id and the body address,
//! with an `EQ` between them:
//!
//! ```text
//! DUP1 PUSH4 0xa9059cbb EQ PUSH2 0x00b4 JUMPI
//!      ^^^^^ id            ^^^^^ address
//! ```
//!
//! Only PUSH instructions inside the block are tracked; DUP/SWAP in between
//! are ignored. A test records `id -> address` and the walk continues at the
//! test's fall-through (the next test). Other dispatcher `JUMPI`s (callvalue
//! and calldata-size guards, binary-search pivots) are followed both ways.
//! Blocks that touch anything beyond calldata, callvalue, stack and simple
//! arithmetic are function code and end the walk.
//!
//! When every test in a chain fails, control reaches the chain's terminal
//! block. If that lands (possibly through a `PUSH; JUMP` trampoline) on
//! anything other than a bare revert, the contract has a fallback and it is
//! recorded under [`Selector::FALLBACK`].

use alloc::collections::btree_map::Entry;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attrs::{AttributeRuleTable, AttributeSet};
use crate::cfg::{reachable_from, BasicBlock, CfgError, ControlFlowGraph, EdgeKind, Terminator};
use crate::opcode::{self, is_stack_op};
use crate::signature::{SignatureDb, SignatureRecord};
use crate::DEFAULT_CONTEXT_DEPTH;

pub use crate::signature::Selector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionInfo {
    pub selector: Selector,
    pub entry_block: usize,
    pub context: Vec<String>,
    pub attributes: AttributeSet,
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_signature: Option<SignatureRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecoveryWarning {
    /// A selector tested twice; the first body was kept.
    DuplicateSelector {
        selector: Selector,
        kept: usize,
        dropped: usize,
    },
    /// The body address is not the start of any block.
    MissingEntry { selector: Selector, target: u64 },
    /// The body does not begin with `JUMPDEST`.
    EntryNotJumpdest { selector: Selector, entry: usize },
    /// A dispatcher block ending in `JUMPI` too short to carry a selector test.
    ShortDispatchBlock { block: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Recovery {
    pub functions: BTreeMap<Selector, FunctionInfo>,
    pub warnings: Vec<RecoveryWarning>,
}

impl Recovery {
    /// Functions ordered by entry offset (ties by selector).
    pub fn by_entry(&self) -> Vec<&FunctionInfo> {
        let mut fns: Vec<&FunctionInfo> = self.functions.values().collect();
        fns.sort_by_key(|f| (f.entry_block, f.selector));
        fns
    }

    pub fn public_selectors(&self) -> BTreeSet<Selector> {
        self.functions
            .values()
            .filter(|f| !f.fallback)
            .map(|f| f.selector)
            .collect()
    }

    pub fn fallback(&self) -> Option<&FunctionInfo> {
        self.functions.values().find(|f| f.fallback)
    }

    /// Recomputes attributes under another rule table.
    pub fn apply_rules(&mut self, rules: &AttributeRuleTable) {
        for f in self.functions.values_mut() {
            f.attributes = rules.summarize(&f.context);
        }
    }

    /// Attaches a signature wherever the database has exactly one candidate.
    pub fn resolve_signatures(&mut self, db: &SignatureDb) {
        for f in self.functions.values_mut().filter(|f| !f.fallback) {
            f.resolved_signature = match db.lookup(f.selector) {
                [only] => Some(only.clone()),
                _ => None,
            };
        }
    }
}

/// Opcodes that may appear in a dispatcher block.
fn dispatch_opcode(byte: u8) -> bool {
    is_stack_op(byte)
        || matches!(
            byte,
            0x01..=0x04          // ADD MUL SUB DIV
                | 0x0a           // EXP
                | 0x10..=0x19    // comparisons, ISZERO, bitwise, NOT
                | 0x1b..=0x1d    // shifts
                | 0x34..=0x36    // CALLVALUE CALLDATALOAD CALLDATASIZE
                | 0x52           // MSTORE (free memory pointer)
                | opcode::JUMP
                | opcode::JUMPI
                | opcode::JUMPDEST
                | opcode::REVERT
        )
}

fn is_dispatcher_block(block: &BasicBlock) -> bool {
    block.instructions.iter().all(|i| dispatch_opcode(i.opcode))
}

/// `(id, address)` if the block is a selector test.
fn selector_test(block: &BasicBlock) -> Option<(Selector, u64)> {
    if block.terminator != Terminator::Jumpi {
        return None;
    }
    let pushes: Vec<usize> = block
        .instructions
        .iter()
        .enumerate()
        .filter(|(_, i)| i.is_push())
        .map(|(idx, _)| idx)
        .collect();
    let [.., pre, last] = pushes[..] else {
        return None;
    };
    let compares = block.instructions[pre + 1..last]
        .iter()
        .any(|i| i.opcode == opcode::EQ);
    if !compares {
        return None;
    }
    let id = block.instructions[pre].push_low_u32()?;
    let address = block.instructions[last].push_value()?;
    Some((Selector::from_u32(id), address))
}

fn is_bare_abort(cfg: &ControlFlowGraph, block: &BasicBlock) -> bool {
    let mut effective = block
        .instructions
        .iter()
        .filter(|i| !is_stack_op(i.opcode) && i.opcode != opcode::JUMPDEST);
    match (effective.next(), effective.next()) {
        (Some(only), None) => match only.opcode {
            opcode::REVERT | opcode::INVALID => true,
            _ if only.mnemonic() == "INVALID" => true,
            // `throw` in old compilers: a jump to a non-JUMPDEST.
            opcode::JUMP => cfg.edge_to(block.id, EdgeKind::Unconditional).is_none(),
            _ => false,
        },
        _ => false,
    }
}

/// Follows `PUSH; JUMP` trampolines and lone-`JUMPDEST` fall-throughs.
fn skip_trampolines(cfg: &ControlFlowGraph, start: usize) -> usize {
    let mut current = start;
    for _ in 0..8 {
        let Some(block) = cfg.blocks.get(&current) else {
            break;
        };
        let only_plumbing = block
            .instructions
            .iter()
            .all(|i| i.opcode == opcode::JUMPDEST || i.is_push() || i.opcode == opcode::JUMP);
        let next = match block.terminator {
            Terminator::Jump if only_plumbing => cfg.edge_to(current, EdgeKind::Unconditional),
            Terminator::Fallthrough if only_plumbing => cfg.edge_to(current, EdgeKind::Fallthrough),
            _ => None,
        };
        match next {
            Some(next) if next != current => current = next,
            _ => break,
        }
    }
    current
}

/// Concatenated mnemonics of the blocks visited by a depth-bounded DFS from
/// `entry`. PUSH operands are not part of the token stream.
pub fn function_context(
    cfg: &ControlFlowGraph,
    entry: usize,
    max_depth: usize,
) -> Result<Vec<String>, CfgError> {
    let order = reachable_from(cfg, entry, max_depth)?;
    Ok(order
        .iter()
        .flat_map(|id| cfg.blocks[id].mnemonics())
        .map(ToString::to_string)
        .collect())
}

/// [`recover_functions_at_depth`] with the default context depth of 1.
pub fn recover_functions(cfg: &ControlFlowGraph) -> Recovery {
    recover_functions_at_depth(cfg, DEFAULT_CONTEXT_DEPTH)
}

pub fn recover_functions_at_depth(cfg: &ControlFlowGraph, depth: usize) -> Recovery {
    let mut recovery = Recovery::default();
    let Some(&entry) = cfg.blocks.keys().next() else {
        return recovery;
    };
    let rules = AttributeRuleTable::default();

    let mut found: Vec<(Selector, usize)> = Vec::new();
    let mut terminals: BTreeSet<usize> = BTreeSet::new();
    let mut visited = BTreeSet::new();
    // (block, reached by falling through a selector test)
    let mut queue = VecDeque::from([(entry, false)]);

    while let Some((id, after_test)) = queue.pop_front() {
        let block = &cfg.blocks[&id];
        let dispatching = is_dispatcher_block(block);
        // A block may be reached both from a guard and as the end of a
        // test chain, so terminals are noted before the visited check.
        if after_test && !(dispatching && block.terminator == Terminator::Jumpi) {
            terminals.insert(id);
        }
        if !visited.insert(id) || !dispatching {
            continue;
        }
        if block.terminator != Terminator::Jumpi {
            if !after_test && block.terminator == Terminator::Fallthrough {
                if let Some(next) = cfg.edge_to(id, EdgeKind::Fallthrough) {
                    queue.push_back((next, false));
                }
            }
            continue;
        }
        if block.instructions.len() <= 2 {
            log::warn!("dispatcher block {id:#x} too short for a selector test");
            recovery
                .warnings
                .push(RecoveryWarning::ShortDispatchBlock { block: id });
        }
        match selector_test(block) {
            Some((selector, address)) => {
                let target = usize::try_from(address)
                    .ok()
                    .filter(|a| cfg.blocks.contains_key(a));
                match target {
                    Some(target) => found.push((selector, target)),
                    None => {
                        log::warn!(
                            "selector {selector} jumps to {address:#x}, which is not a block"
                        );
                        recovery.warnings.push(RecoveryWarning::MissingEntry {
                            selector,
                            target: address,
                        });
                    }
                }
                if let Some(next) = cfg.edge_to(id, EdgeKind::Fallthrough) {
                    queue.push_back((next, true));
                }
            }
            None => {
                if let Some(target) = cfg.edge_to(id, EdgeKind::Conditional) {
                    queue.push_back((target, false));
                }
                if let Some(next) = cfg.edge_to(id, EdgeKind::Fallthrough) {
                    queue.push_back((next, false));
                }
            }
        }
    }

    for (selector, target) in found {
        if let Some(existing) = recovery.functions.get(&selector) {
            log::warn!(
                "selector {selector} tested again (body {target:#x}); keeping {:#x}",
                existing.entry_block
            );
            recovery.warnings.push(RecoveryWarning::DuplicateSelector {
                selector,
                kept: existing.entry_block,
                dropped: target,
            });
            continue;
        }
        if !cfg.blocks[&target].starts_with_jumpdest() {
            log::warn!("selector {selector} body {target:#x} does not start with JUMPDEST");
            recovery.warnings.push(RecoveryWarning::EntryNotJumpdest {
                selector,
                entry: target,
            });
        }
        let context = function_context(cfg, target, depth).unwrap_or_default();
        recovery.functions.insert(
            selector,
            FunctionInfo {
                selector,
                entry_block: target,
                attributes: rules.summarize(&context),
                context,
                fallback: false,
                resolved_signature: None,
            },
        );
    }

    if !recovery.functions.is_empty() {
        let fallback_entry = terminals
            .iter()
            .map(|&t| skip_trampolines(cfg, t))
            .filter(|body| !is_bare_abort(cfg, &cfg.blocks[body]))
            .min();
        if let Some(entry_block) = fallback_entry {
            match recovery.functions.entry(Selector::FALLBACK) {
                Entry::Occupied(_) => {
                    log::warn!(
                        "selector 0xffffffff is a real function; fallback entry not recorded"
                    )
                }
                Entry::Vacant(slot) => {
                    let context = function_context(cfg, entry_block, depth).unwrap_or_default();
                    slot.insert(FunctionInfo {
                        selector: Selector::FALLBACK,
                        entry_block,
                        attributes: rules.summarize(&context),
                        context,
                        fallback: true,
                        resolved_signature: None,
                    });
                }
            }
        }
    }
    recovery
}
