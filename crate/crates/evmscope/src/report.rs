//! Human-readable vulnerability report from detector predictions.
//!
//! The detector runs elsewhere and leaves one JSON object per contract:
//! `{"contract_id": .., "labels": [..], "scores": ..}` where `scores` is
//! either an object keyed by label or an array aligned with the six
//! vulnerability classes in vocabulary order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use evmscope_core::features::{validate_labels, VulnLabel};
use evmscope_core::functions::Recovery;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scores {
    ByLabel(BTreeMap<String, f64>),
    Aligned(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPrediction {
    pub contract_id: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub scores: Option<Scores>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractReport {
    pub contract_id: String,
    pub labels: Vec<VulnLabel>,
    pub scores: BTreeMap<VulnLabel, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ContractReport {
    pub fn vulnerable(&self) -> bool {
        self.labels.iter().any(|l| *l != VulnLabel::NoVulnerability)
    }
}

fn scores_of(p: &DetectionPrediction, warnings: &mut Vec<String>) -> BTreeMap<VulnLabel, f64> {
    match &p.scores {
        None => BTreeMap::new(),
        Some(Scores::ByLabel(map)) => map
            .iter()
            .filter_map(|(k, v)| match k.parse() {
                Ok(l) => Some((l, *v)),
                Err(_) => {
                    warnings.push(format!("score for unknown label {k:?} ignored"));
                    None
                }
            })
            .collect(),
        Some(Scores::Aligned(values)) => {
            if values.len() != VulnLabel::ALL.len() {
                warnings.push(format!(
                    "{} scores for {} classes; extra or missing values ignored",
                    values.len(),
                    VulnLabel::ALL.len()
                ));
            }
            VulnLabel::ALL
                .into_iter()
                .zip(values.iter().copied())
                .collect()
        }
    }
}

/// Joins predictions with recovered functions (keyed by contract id).
pub fn build_report(
    predictions: &[DetectionPrediction],
    recovered: &BTreeMap<String, Recovery>,
) -> Vec<ContractReport> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in predictions {
        let mut warnings = Vec::new();
        if !seen.insert(p.contract_id.clone()) {
            warnings.push("contract appears more than once in the predictions".to_string());
        }
        let mut labels = BTreeSet::new();
        for l in &p.labels {
            match l.parse::<VulnLabel>() {
                Ok(l) => {
                    labels.insert(l);
                }
                Err(e) => warnings.push(e.to_string()),
            }
        }
        if let Err(e) = validate_labels(&labels) {
            warnings.push(e.to_string());
        }
        let scores = scores_of(p, &mut warnings);
        let functions = recovered.get(&p.contract_id).map(|r| {
            r.by_entry()
                .iter()
                .map(|f| {
                    if f.fallback {
                        "fallback".to_string()
                    } else {
                        f.selector.to_string()
                    }
                })
                .collect()
        });
        out.push(ContractReport {
            contract_id: p.contract_id.clone(),
            labels: labels.into_iter().collect(),
            scores,
            functions,
            warnings,
        });
    }
    out
}

pub fn render_text(reports: &[ContractReport]) -> String {
    let mut s = String::new();
    let flagged = reports.iter().filter(|r| r.vulnerable()).count();
    let _ = writeln!(
        s,
        "{} contract(s), {} flagged as vulnerable\n",
        reports.len(),
        flagged
    );
    for r in reports {
        let verdict = if r.vulnerable() {
            "VULNERABLE"
        } else if r.labels.is_empty() {
            "no verdict"
        } else {
            "no vulnerability found"
        };
        let _ = writeln!(s, "{}: {verdict}", r.contract_id);
        for l in &r.labels {
            match r.scores.get(l) {
                Some(score) => {
                    let _ = writeln!(s, "  - {:<32} {score:.3}", l.as_str());
                }
                None => {
                    let _ = writeln!(s, "  - {}", l.as_str());
                }
            }
        }
        let others: Vec<String> = r
            .scores
            .iter()
            .filter(|(l, _)| !r.labels.contains(l))
            .map(|(l, v)| format!("{l} {v:.3}"))
            .collect();
        if !others.is_empty() {
            let _ = writeln!(s, "  below threshold: {}", others.join(", "));
        }
        if let Some(fns) = &r.functions {
            let _ = writeln!(s, "  functions ({}): {}", fns.len(), fns.join(" "));
        }
        for w in &r.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(id: &str, labels: &[&str], scores: Option<Scores>) -> DetectionPrediction {
        DetectionPrediction {
            contract_id: id.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            scores,
        }
    }

    #[test]
    fn aligned_scores() {
        let p = pred(
            "a",
            &["reentrancy"],
            Some(Scores::Aligned(vec![0.9, 0.1, 0.0, 0.0, 0.0, 0.05])),
        );
        let r = &build_report(&[p], &BTreeMap::new())[0];
        assert_eq!(r.scores[&VulnLabel::Reentrancy], 0.9);
        assert!(r.vulnerable());
        assert!(r.warnings.is_empty());
        let text = render_text(std::slice::from_ref(r));
        assert!(text.contains("a: VULNERABLE"));
        assert!(text.contains("reentrancy"));
    }

    #[test]
    fn invalid_sets_are_warned() {
        let r = build_report(
            &[
                pred("a", &["no_vulnerability", "arithmetic"], None),
                pred("b", &["overflow"], None),
            ],
            &BTreeMap::new(),
        );
        assert_eq!(r[0].warnings.len(), 1);
        assert_eq!(r[1].warnings.len(), 2, "{:?}", r[1].warnings);
    }
}
