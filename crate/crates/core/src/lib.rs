//! Bytecode-level analysis of EVM smart contracts.
//!
//! The crate is `no_std` (it needs `alloc`) and every analysis is a pure
//! function of its input:
//!
//! - [`disasm`] decodes raw bytecode into [`Instruction`]s.
//! - [`cfg`] splits the stream into basic blocks and resolves jump edges.
//! - [`functions`] walks the selector dispatcher to recover public functions.
//! - [`ssa`] strips stack-manipulation opcodes from a token stream.
//! - [`attrs`] infers `view`/`payable`/`pure` from a function's opcodes.
//! - [`signature`] computes selectors and maps signatures onto the parameter
//!   label space.
//! - [`features`] assembles dataset records and opcode-frequency statistics.
//!
//! File formats, networking and the command-line front end live in the
//! companion `evmscope` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attrs;
pub mod cfg;
pub mod disasm;
pub mod features;
pub mod functions;
pub mod hex;
pub mod opcode;
pub mod signature;
pub mod ssa;

pub use attrs::{summarize, AttributeRuleTable, AttributeSet};
pub use cfg::{
    build_cfg, reachable_from, resolve_edges, split_blocks, BasicBlock, ControlFlowGraph, Edge,
    EdgeKind, Terminator, UnresolvedJump,
};
pub use disasm::{disassemble, parse_hex, strip_metadata, Instruction};
pub use features::{FeatureRecord, FilteredAbi, RecordKind, VulnLabel};
pub use functions::{function_context, recover_functions, FunctionInfo, Recovery, Selector};
pub use opcode::{Category, Fork, OpcodeInfo, OpcodeTable};
pub use signature::{
    parse_signature, selector_of, LabelSpace, ParameterType, SignatureDb, SignatureRecord,
};
pub use ssa::{to_ssa, SsaSequence};

/// Depth of the DFS used to gather a function's opcode context when none is given.
pub const DEFAULT_CONTEXT_DEPTH: usize = 1;
