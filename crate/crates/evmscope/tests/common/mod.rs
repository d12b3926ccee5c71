//! Compiled-contract fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use evmscope_core::cfg::ControlFlowGraph;
use evmscope_core::features::AbiItem;
use evmscope_core::hex::parse_hex;
use evmscope_core::signature::Selector;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Oracle {
    pub selectors: Vec<String>,
    pub has_fallback: bool,
    pub blocks: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
pub struct Fixture {
    pub id: String,
    pub source: String,
    pub compiler: String,
    pub optimize: bool,
    #[serde(rename = "runtime")]
    pub runtime_hex: String,
    pub abi: Vec<AbiItem>,
    pub oracle: Oracle,
}

impl Fixture {
    pub fn code(&self) -> Vec<u8> {
        parse_hex(&self.runtime_hex).expect("fixture hex")
    }

    pub fn oracle_selectors(&self) -> BTreeSet<Selector> {
        self.oracle
            .selectors
            .iter()
            .map(|s| s.parse().expect("oracle selector"))
            .collect()
    }
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixtures() -> Vec<Fixture> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture_dir().join("compiled"))
        .expect("compiled fixtures")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap())
        .collect()
}

/// Edges are compared only where the reference tool explored the source
/// block (it reports outgoing edges there). Returns (ours also found by the
/// tool, ours compared).
pub fn edge_agreement(cfg: &ControlFlowGraph, oracle: &Oracle) -> (usize, usize) {
    let theirs: BTreeSet<(usize, usize)> = oracle.edges.iter().map(|e| (e[0], e[1])).collect();
    let explored: BTreeSet<usize> = theirs.iter().map(|e| e.0).collect();
    let ours: Vec<(usize, usize)> = cfg
        .edges
        .iter()
        .map(|e| (e.src, e.dst))
        .filter(|(s, _)| explored.contains(s))
        .collect();
    let matched = ours.iter().filter(|e| theirs.contains(e)).count();
    (matched, ours.len())
}

/// Partition, JUMPDEST landing and fall-through adjacency.
pub fn check_cfg_invariants(code: &[u8], cfg: &ControlFlowGraph) -> Result<(), String> {
    use evmscope_core::cfg::EdgeKind;
    use evmscope_core::disasm::disassemble;
    use evmscope_core::opcode::JUMPDEST;

    let insns = disassemble(code);
    let flat: Vec<usize> = cfg
        .blocks
        .values()
        .flat_map(|b| b.instructions.iter().map(|i| i.offset))
        .collect();
    let expected: Vec<usize> = insns.iter().map(|i| i.offset).collect();
    if flat != expected {
        return Err("blocks do not partition the instruction stream".into());
    }
    for (id, b) in &cfg.blocks {
        if b.instructions.is_empty() || b.first().offset != *id {
            return Err(format!("block {id:#x} id/first mismatch"));
        }
    }
    for e in &cfg.edges {
        let dst = cfg
            .blocks
            .get(&e.dst)
            .ok_or_else(|| format!("edge to missing block {:#x}", e.dst))?;
        match e.kind {
            EdgeKind::Conditional | EdgeKind::Unconditional => {
                if dst.first().opcode != JUMPDEST {
                    return Err(format!(
                        "jump edge {:#x}->{:#x} misses JUMPDEST",
                        e.src, e.dst
                    ));
                }
            }
            EdgeKind::Fallthrough => {
                if cfg.blocks[&e.src].next_offset() != e.dst {
                    return Err(format!(
                        "fall-through {:#x}->{:#x} not adjacent",
                        e.src, e.dst
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Canonical text of every ABI function of every fixture.
pub fn abi_signatures(fixtures: &[Fixture]) -> BTreeSet<String> {
    fixtures
        .iter()
        .flat_map(|f| f.abi.iter())
        .filter(|i| i.kind == "function")
        .map(|i| i.signature())
        .collect()
}
