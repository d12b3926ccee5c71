//! Basic blocks and control-flow edges.
//!
//! Blocks start at offset 0, at every `JUMPDEST`, and after every terminator.
//! Jump targets are resolved by simulating the stack inside the jumping block
//! only: a target resolves when a PUSH constant reaches the jump's target
//! slot through PUSH/DUP/SWAP/POP (and the stack effects of everything else)
//! and lands on a block that begins with `JUMPDEST`. Anything else is listed
//! in [`ControlFlowGraph::unresolved`] rather than guessed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::disasm::{disassemble, Instruction};
use crate::opcode::{self, DUP1, DUP16, SWAP1, SWAP16};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminator {
    Jump,
    Jumpi,
    Stop,
    Return,
    Revert,
    Selfdestruct,
    Invalid,
    /// The block ends because the next instruction is a `JUMPDEST` (or code ends).
    Fallthrough,
}

impl Terminator {
    fn of(insn: &Instruction) -> Terminator {
        match insn.opcode {
            opcode::JUMP => Terminator::Jump,
            opcode::JUMPI => Terminator::Jumpi,
            opcode::STOP => Terminator::Stop,
            opcode::RETURN => Terminator::Return,
            opcode::REVERT => Terminator::Revert,
            opcode::SELFDESTRUCT => Terminator::Selfdestruct,
            _ if insn.is_terminator() => Terminator::Invalid,
            _ => Terminator::Fallthrough,
        }
    }

    /// Whether execution may continue at the next offset.
    pub fn falls_through(self) -> bool {
        matches!(self, Terminator::Jumpi | Terminator::Fallthrough)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    /// Offset of the first instruction; doubles as the block id.
    pub id: usize,
    pub instructions: Vec<Instruction>,
    pub terminator: Terminator,
}

impl BasicBlock {
    pub fn first(&self) -> &Instruction {
        &self.instructions[0]
    }

    pub fn last(&self) -> &Instruction {
        &self.instructions[self.instructions.len() - 1]
    }

    /// Offset of the last instruction.
    pub fn end_pc(&self) -> usize {
        self.last().offset
    }

    /// Offset just past the block.
    pub fn next_offset(&self) -> usize {
        self.last().next_offset()
    }

    pub fn starts_with_jumpdest(&self) -> bool {
        self.first().opcode == opcode::JUMPDEST
    }

    pub fn mnemonics(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.instructions.iter().map(Instruction::mnemonic)
    }

    /// Operands of the PUSH instructions in the block, in order.
    pub fn push_operands(&self) -> impl Iterator<Item = &Instruction> + '_ {
        self.instructions.iter().filter(|i| i.is_push())
    }
}

impl Serialize for BasicBlock {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("BasicBlock", 4)?;
        s.serialize_field("start", &self.id)?;
        s.serialize_field("end_pc", &self.end_pc())?;
        s.serialize_field("terminator", &self.terminator)?;
        s.serialize_field("instructions", &self.instructions)?;
        s.end()
    }
}

/// Ordering puts jump edges before fall-through edges, which is the DFS
/// visiting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Conditional,
    Unconditional,
    Fallthrough,
}

/// Field order matters: edges sort by source, then kind, then destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub kind: EdgeKind,
    pub dst: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UnresolvedReason {
    /// The target is not a constant within the block.
    Dynamic,
    /// A constant target that is not the start of a `JUMPDEST` block.
    InvalidDestination { target: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedJump {
    pub block: usize,
    pub pc: usize,
    #[serde(flatten)]
    pub reason: UnresolvedReason,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CfgError {
    #[error("no basic block starts at offset {0:#x}")]
    UnknownBlock(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlFlowGraph {
    pub blocks: BTreeMap<usize, BasicBlock>,
    pub edges: BTreeSet<Edge>,
    pub unresolved: Vec<UnresolvedJump>,
}

impl ControlFlowGraph {
    pub const ENTRY: usize = 0;

    pub fn block(&self, id: usize) -> Result<&BasicBlock, CfgError> {
        self.blocks.get(&id).ok_or(CfgError::UnknownBlock(id))
    }

    /// Outgoing edges of `src` in visiting order.
    pub fn successors(&self, src: usize) -> impl Iterator<Item = &Edge> + '_ {
        let lo = Edge {
            src,
            kind: EdgeKind::Conditional,
            dst: 0,
        };
        let hi = Edge {
            src,
            kind: EdgeKind::Fallthrough,
            dst: usize::MAX,
        };
        self.edges.range(lo..=hi)
    }

    pub fn edge_to(&self, src: usize, kind: EdgeKind) -> Option<usize> {
        self.successors(src).find(|e| e.kind == kind).map(|e| e.dst)
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.values().map(|b| b.instructions.len()).sum()
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> alloc::string::String {
        let mut out =
            alloc::string::String::from("digraph cfg {\n  node [shape=box fontname=monospace];\n");
        for block in self.blocks.values() {
            let _ = write!(out, "  b{} [label=\"", block.id);
            for insn in &block.instructions {
                let _ = write!(out, "{:#06x} {}", insn.offset, insn.mnemonic());
                if insn.operand_width() > 0 {
                    let _ = write!(out, " 0x{}", crate::hex::encode(insn.operand()));
                }
                out.push_str("\\l");
            }
            out.push_str("\"];\n");
        }
        for edge in &self.edges {
            let style = match edge.kind {
                EdgeKind::Conditional => "color=green label=\"T\"",
                EdgeKind::Unconditional => "color=blue",
                EdgeKind::Fallthrough => "style=dashed",
            };
            let _ = writeln!(out, "  b{} -> b{} [{}];", edge.src, edge.dst, style);
        }
        out.push_str("}\n");
        out
    }
}

impl Serialize for ControlFlowGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        struct Blocks<'a>(&'a BTreeMap<usize, BasicBlock>);
        impl Serialize for Blocks<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_seq(self.0.values())
            }
        }
        let mut s = serializer.serialize_struct("ControlFlowGraph", 4)?;
        s.serialize_field("entry", &Self::ENTRY)?;
        s.serialize_field("blocks", &Blocks(&self.blocks))?;
        s.serialize_field("edges", &self.edges)?;
        s.serialize_field("unresolved", &self.unresolved)?;
        s.end()
    }
}

pub fn split_blocks(instructions: &[Instruction]) -> BTreeMap<usize, BasicBlock> {
    let mut blocks = BTreeMap::new();
    let mut current: Vec<Instruction> = Vec::new();
    let mut flush = |current: &mut Vec<Instruction>| {
        if let Some(first) = current.first() {
            let id = first.offset;
            let terminator = Terminator::of(&current[current.len() - 1]);
            let instructions = core::mem::take(current);
            blocks.insert(
                id,
                BasicBlock {
                    id,
                    instructions,
                    terminator,
                },
            );
        }
    };
    for insn in instructions {
        if insn.opcode == opcode::JUMPDEST {
            flush(&mut current);
        }
        current.push(*insn);
        if insn.is_terminator() {
            flush(&mut current);
        }
    }
    flush(&mut current);
    blocks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Const(u64),
    Unknown,
}

/// Abstract stack for one block. Reads below what the block itself pushed
/// yield `Unknown`.
#[derive(Debug, Default)]
struct AbstractStack {
    slots: Vec<Slot>,
}

impl AbstractStack {
    fn pop(&mut self) -> Slot {
        self.slots.pop().unwrap_or(Slot::Unknown)
    }

    fn peek(&self, depth: usize) -> Slot {
        self.slots
            .len()
            .checked_sub(depth + 1)
            .map_or(Slot::Unknown, |i| self.slots[i])
    }

    fn step(&mut self, insn: &Instruction) {
        match insn.opcode {
            _ if insn.is_push() => {
                let slot = insn.push_value().map_or(Slot::Unknown, Slot::Const);
                self.slots.push(slot);
            }
            op @ DUP1..=DUP16 => {
                let n = (op - DUP1) as usize;
                let slot = self.peek(n);
                self.slots.push(slot);
            }
            op @ SWAP1..=SWAP16 => {
                let n = (op - SWAP1) as usize + 1;
                if self.slots.len() < n + 1 {
                    let missing = n + 1 - self.slots.len();
                    self.slots
                        .splice(0..0, core::iter::repeat_n(Slot::Unknown, missing));
                }
                let top = self.slots.len() - 1;
                self.slots.swap(top, top - n);
            }
            _ => {
                let info = insn.info();
                for _ in 0..info.stack_in {
                    self.pop();
                }
                for _ in 0..info.stack_out {
                    self.slots.push(Slot::Unknown);
                }
            }
        }
    }
}

/// Constant on top of the stack right before the block's final instruction.
fn jump_target(block: &BasicBlock) -> Option<u64> {
    let mut stack = AbstractStack::default();
    for insn in &block.instructions[..block.instructions.len() - 1] {
        stack.step(insn);
    }
    match stack.peek(0) {
        Slot::Const(v) => Some(v),
        Slot::Unknown => None,
    }
}

pub fn resolve_edges(blocks: BTreeMap<usize, BasicBlock>) -> ControlFlowGraph {
    let mut edges = BTreeSet::new();
    let mut unresolved = Vec::new();
    for block in blocks.values() {
        let kind = match block.terminator {
            Terminator::Jump => Some(EdgeKind::Unconditional),
            Terminator::Jumpi => Some(EdgeKind::Conditional),
            _ => None,
        };
        if let Some(kind) = kind {
            let target = jump_target(block);
            let landing = target
                .and_then(|t| usize::try_from(t).ok())
                .filter(|t| blocks.get(t).is_some_and(BasicBlock::starts_with_jumpdest));
            match (target, landing) {
                (_, Some(dst)) => {
                    edges.insert(Edge {
                        src: block.id,
                        kind,
                        dst,
                    });
                }
                (Some(target), None) => unresolved.push(UnresolvedJump {
                    block: block.id,
                    pc: block.end_pc(),
                    reason: UnresolvedReason::InvalidDestination { target },
                }),
                (None, None) => unresolved.push(UnresolvedJump {
                    block: block.id,
                    pc: block.end_pc(),
                    reason: UnresolvedReason::Dynamic,
                }),
            }
        }
        if block.terminator.falls_through() {
            let next = block.next_offset();
            if blocks.contains_key(&next) {
                edges.insert(Edge {
                    src: block.id,
                    kind: EdgeKind::Fallthrough,
                    dst: next,
                });
            }
        }
    }
    ControlFlowGraph {
        blocks,
        edges,
        unresolved,
    }
}

/// Disassembles, splits and resolves in one go.
pub fn build_cfg(code: &[u8]) -> ControlFlowGraph {
    resolve_edges(split_blocks(&disassemble(code)))
}

/// Depth-bounded DFS preorder from `start`. Each block appears once; blocks
/// more than `max_depth` edges away from `start` along the DFS path are not
/// explored.
pub fn reachable_from(
    cfg: &ControlFlowGraph,
    start: usize,
    max_depth: usize,
) -> Result<Vec<usize>, CfgError> {
    cfg.block(start)?;
    let mut order = vec![start];
    let mut visited = BTreeSet::from([start]);
    // (block, depth, successors)
    let mut stack = vec![(0usize, cfg.successors(start))];
    while let Some((depth, successors)) = stack.last_mut() {
        let depth = *depth;
        if depth >= max_depth {
            stack.pop();
            continue;
        }
        match successors.next() {
            Some(edge) => {
                if visited.insert(edge.dst) {
                    order.push(edge.dst);
                    stack.push((depth + 1, cfg.successors(edge.dst)));
                }
            }
            None => {
                stack.pop();
            }
        }
    }
    Ok(order)
}

/// All blocks: those reachable from the entry in DFS order, then the rest by offset.
pub fn execution_order(cfg: &ControlFlowGraph) -> Vec<usize> {
    if cfg.blocks.is_empty() {
        return Vec::new();
    }
    let entry = *cfg.blocks.keys().next().unwrap();
    let mut order = reachable_from(cfg, entry, usize::MAX).unwrap_or_default();
    let seen: BTreeSet<usize> = order.iter().copied().collect();
    order.extend(cfg.blocks.keys().filter(|id| !seen.contains(id)));
    order
}
