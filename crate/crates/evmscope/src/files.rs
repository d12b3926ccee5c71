//! On-disk formats: signature database, label space, attribute rules,
//! contract lists and prediction files.

use std::collections::BTreeSet;
use std::path::Path;

use evmscope_core::attrs::AttributeRuleTable;
use evmscope_core::features::{AbiItem, Contract, SignaturePrediction, VulnLabel};
use evmscope_core::hex::parse_hex;
use evmscope_core::signature::{DbLoadReport, LabelSpace, Selector, SignatureDb};
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

fn read(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, message: impl ToString) -> FileError {
    FileError::Parse {
        path: path.display().to_string(),
        line,
        message: message.to_string(),
    }
}

fn json_file<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    serde_json::from_str(&read(path)?).map_err(|e| parse_err(path, e.line(), e))
}

/// One JSON value per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, FileError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(path, i + 1, e)))
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FileError> {
    parse_jsonl(&read(path)?, path)
}

/// Signature database: one row per line, `selector<TAB>signature` or a bare
/// signature whose selector is computed. Blank lines and `#` comments are
/// skipped. Rows whose selector disagrees with their text are rejected and
/// counted, as are rows with an unparseable selector.
pub fn parse_signature_db(text: &str) -> (SignatureDb, DbLoadReport) {
    let mut bad_selectors = 0;
    let mut rows = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((sel, sig)) => match sel.trim().parse::<Selector>() {
                Ok(sel) => rows.push((Some(sel), sig.trim())),
                Err(_) => bad_selectors += 1,
            },
            None => rows.push((None, line)),
        }
    }
    let rows = rows.into_iter().filter_map(|(sel, sig)| {
        sel.or_else(|| evmscope_core::selector_of(sig).ok())
            .or_else(|| {
                bad_selectors += 1;
                None
            })
            .map(|s| (s, sig))
    });
    let (db, mut report) = SignatureDb::from_rows(rows.collect::<Vec<_>>());
    report.malformed += bad_selectors;
    (db, report)
}

pub fn load_signature_db(path: &Path) -> Result<(SignatureDb, DbLoadReport), FileError> {
    Ok(parse_signature_db(&read(path)?))
}

/// Label space JSON: `{"version": .., "labels": [..], "aliases": {..}}`.
pub fn load_label_space(path: &Path) -> Result<LabelSpace, FileError> {
    let space: LabelSpace = json_file(path)?;
    space.validate().map_err(|e| parse_err(path, 0, e))?;
    Ok(space)
}

/// Attribute rule table JSON, normalized.
pub fn load_rules(path: &Path) -> Result<AttributeRuleTable, FileError> {
    let rules: AttributeRuleTable = json_file(path)?;
    rules.normalized().map_err(|e| parse_err(path, 0, e))
}

/// One line of a contract list.
#[derive(Debug, Clone, Deserialize)]
pub struct ContractEntry {
    pub id: String,
    /// Runtime bytecode as hex.
    pub code: String,
    #[serde(default)]
    pub labels: Option<BTreeSet<VulnLabel>>,
    /// Standard contract-ABI JSON, when known.
    #[serde(default)]
    pub abi: Option<Vec<AbiItem>>,
}

impl ContractEntry {
    pub fn contract(&self) -> Result<Contract, String> {
        let code = parse_hex(self.code.trim()).map_err(|e| format!("{}: code: {e}", self.id))?;
        Ok(Contract {
            id: self.id.clone(),
            code,
        })
    }
}

/// Contract list (JSONL of [`ContractEntry`]) with every code field decoded
/// and ids checked for uniqueness.
pub fn load_contracts(path: &Path) -> Result<Vec<(ContractEntry, Contract)>, FileError> {
    let text = read(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ContractEntry =
            serde_json::from_str(line).map_err(|e| parse_err(path, i + 1, e))?;
        if !seen.insert(entry.id.clone()) {
            return Err(parse_err(
                path,
                i + 1,
                format!("duplicate id {:?}", entry.id),
            ));
        }
        let contract = entry.contract().map_err(|e| parse_err(path, i + 1, e))?;
        out.push((entry, contract));
    }
    Ok(out)
}

pub fn load_signature_predictions(path: &Path) -> Result<Vec<SignaturePrediction>, FileError> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_rows() {
        let text = "# header\n\
                    0xa9059cbb\ttransfer(address,uint256)\n\
                    70a08231\tbalanceOf(address)\n\
                    totalSupply()\n\
                    0xdeadbeef\ttransfer(address,uint256)\n\
                    0xzz\tfoo()\n\
                    \n";
        let (db, report) = parse_signature_db(text);
        assert_eq!(db.len(), 3);
        assert_eq!(report.accepted, 3);
        assert_eq!(report.selector_mismatch, 1);
        assert_eq!(report.malformed, 1);
    }
}
