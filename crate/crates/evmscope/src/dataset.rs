//! Dataset assembly: parallel record building, JSONL output, vocabulary
//! files, seeded splits and the manifest tying them together.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use evmscope_core::features::{
    detection_record, signature_records, Contract, DetectionOptions, FeatureRecord, FilteredAbi,
    FunctionSource, SignaturePrediction, SignatureStats, Vocabulary,
};
use evmscope_core::signature::{LabelSpace, SignatureDb};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::files::ContractEntry;

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

/// Signature records for every contract, ordered by (contract id, entry).
pub fn build_signature_dataset(
    contracts: &[Contract],
    db: &SignatureDb,
    space: &LabelSpace,
    depth: usize,
    jobs: usize,
) -> (Vec<FeatureRecord>, SignatureStats) {
    let per_contract: Vec<_> = pool(jobs).install(|| {
        contracts
            .par_iter()
            .map(|c| signature_records(c, db, space, depth))
            .collect()
    });
    let mut stats = SignatureStats::default();
    let mut records = Vec::new();
    for (r, s) in per_contract {
        records.extend(r);
        stats += s;
    }
    records.sort_by(|a, b| (&a.contract_id, a.entry).cmp(&(&b.contract_id, b.entry)));
    (records, stats)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub records: usize,
    pub abi_sourced: usize,
    pub missing_function_features: usize,
    pub truncated: usize,
    /// Contracts without a vulnerability label set, or with an invalid one.
    pub skipped: usize,
}

/// Detection records for every labeled contract, ordered by contract id.
/// Function features come from `abis[id]` when present and from the
/// recovered functions plus `predictions` otherwise.
pub fn build_detection_dataset(
    entries: &[(ContractEntry, Contract)],
    abis: &BTreeMap<String, FilteredAbi>,
    predictions: &[SignaturePrediction],
    space: &LabelSpace,
    opts: &DetectionOptions,
    jobs: usize,
) -> (Vec<FeatureRecord>, DetectionStats) {
    let built: Vec<Option<(FeatureRecord, bool)>> = pool(jobs).install(|| {
        entries
            .par_iter()
            .map(|(entry, contract)| {
                let Some(labels) = &entry.labels else {
                    log::warn!("{}: no vulnerability labels; skipped", entry.id);
                    return None;
                };
                let abi = abis.get(&entry.id);
                let source = match abi {
                    Some(abi) => FunctionSource::Abi(abi),
                    None => FunctionSource::Inferred(predictions),
                };
                match detection_record(contract, source, labels, space, opts) {
                    Ok(record) => Some((record, abi.is_some())),
                    Err(e) => {
                        log::warn!("{}: {e}; skipped", entry.id);
                        None
                    }
                }
            })
            .collect()
    });
    let mut stats = DetectionStats::default();
    let mut records = Vec::new();
    for item in built {
        match item {
            Some((record, from_abi)) => {
                stats.records += 1;
                stats.abi_sourced += from_abi as usize;
                stats.missing_function_features += record.missing_function_features as usize;
                stats.truncated += record.context_truncated as usize;
                records.push(record);
            }
            None => stats.skipped += 1,
        }
    }
    records.sort_by(|a, b| a.contract_id.cmp(&b.contract_id));
    (records, stats)
}

/// One compact JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, records: &[T]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// One token per line; the line number (from 0) is the index.
pub fn vocab_text(vocab: &Vocabulary) -> String {
    let mut s = String::new();
    for t in &vocab.tokens {
        s.push_str(t);
        s.push('\n');
    }
    s
}

pub fn parse_vocab(text: &str) -> Vocabulary {
    Vocabulary {
        tokens: text.lines().map(str::to_string).collect(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Seeded partition of the distinct ids. Every part but the last gets
/// `floor(ratio * n)` ids; the last takes the remainder. Ids inside a part
/// are sorted.
pub fn split_ids(
    ids: &[String],
    parts: &[(&str, f64)],
    seed: u64,
) -> BTreeMap<String, Vec<String>> {
    let mut pool: Vec<String> = ids.to_vec();
    pool.sort();
    pool.dedup();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = pool.len();
    let mut out = BTreeMap::new();
    let mut rest = pool.as_slice();
    for (i, (name, ratio)) in parts.iter().enumerate() {
        let take = if i + 1 == parts.len() {
            rest.len()
        } else {
            ((ratio * n as f64).floor() as usize).min(rest.len())
        };
        let (head, tail) = rest.split_at(take);
        let mut head = head.to_vec();
        head.sort();
        out.insert(name.to_string(), head);
        rest = tail;
    }
    out
}

pub const SPLIT_60_20_20: &[(&str, f64)] = &[("train", 0.6), ("val", 0.2), ("test", 0.2)];
pub const SPLIT_60_40: &[(&str, f64)] = &[("train", 0.6), ("test", 0.4)];

pub fn standard_splits(
    ids: &[String],
    seed: u64,
) -> BTreeMap<String, BTreeMap<String, Vec<String>>> {
    BTreeMap::from([
        ("60/20/20".to_string(), split_ids(ids, SPLIT_60_20_20, seed)),
        ("60/40".to_string(), split_ids(ids, SPLIT_60_40, seed)),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub depth: usize,
    pub max_context: usize,
    pub label_space_version: String,
    pub files: BTreeMap<String, FileEntry>,
    pub vocab: BTreeMap<String, FileEntry>,
    pub splits: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature_stats: Option<SignatureStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_stats: Option<DetectionStats>,
}

pub struct DatasetOutput {
    pub signature: Option<(Vec<FeatureRecord>, SignatureStats)>,
    pub detection: Option<(Vec<FeatureRecord>, DetectionStats)>,
    pub contract_ids: Vec<String>,
    pub seed: u64,
    pub depth: usize,
    pub max_context: usize,
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8], count: usize) -> io::Result<FileEntry> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, bytes)?;
    Ok(FileEntry {
        path: rel.to_string(),
        sha256: sha256_hex(bytes),
        count,
    })
}

/// Writes `signature.jsonl`, `detection.jsonl`, `vocab/*.txt` and
/// `manifest.json` under `dir`.
pub fn write_dataset(
    dir: &Path,
    output: &DatasetOutput,
    space: &LabelSpace,
) -> io::Result<Manifest> {
    let mut files = BTreeMap::new();
    for (name, part) in [
        ("signature", output.signature.as_ref().map(|(r, _)| r)),
        ("detection", output.detection.as_ref().map(|(r, _)| r)),
    ] {
        if let Some(records) = part {
            let mut buf = Vec::new();
            write_jsonl(&mut buf, records)?;
            let entry = write_file(dir, &format!("{name}.jsonl"), &buf, records.len())?;
            files.insert(name.to_string(), entry);
        }
    }
    let mut vocab = BTreeMap::new();
    for (name, v) in [
        ("opcodes", Vocabulary::opcodes()),
        ("params", Vocabulary::params(space)),
        ("vulnerabilities", Vocabulary::vulnerabilities()),
    ] {
        let text = vocab_text(&v);
        let entry = write_file(dir, &format!("vocab/{name}.txt"), text.as_bytes(), v.len())?;
        vocab.insert(name.to_string(), entry);
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: output.seed,
        depth: output.depth,
        max_context: output.max_context,
        label_space_version: space.version.clone(),
        files,
        vocab,
        splits: standard_splits(&output.contract_ids, output.seed),
        signature_stats: output.signature.as_ref().map(|(_, s)| *s),
        detection_stats: output.detection.as_ref().map(|(_, s)| *s),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(manifest)
}
