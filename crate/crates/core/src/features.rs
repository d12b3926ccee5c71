//! Dataset records for the learning side, filtered ABIs and opcode-frequency
//! statistics.
//!
//! Everything here works on one contract at a time and returns records in a
//! fixed order, so callers may fan contracts out across threads and
//! concatenate results in input order to get byte-identical output.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attrs::{AttributeRuleTable, AttributeSet};
use crate::cfg::{build_cfg, execution_order, ControlFlowGraph};
use crate::disasm::strip_metadata;
use crate::functions::{recover_functions_at_depth, Recovery};
use crate::signature::{
    selector_of, LabelSpace, Selector, SignatureDb, SignatureError, SignatureRecord, END_LABEL,
};
use crate::ssa::to_ssa;

/// Default cap on detection context length, in tokens.
pub const DEFAULT_MAX_CONTEXT: usize = 16_384;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub id: String,
    pub code: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Signature,
    Detection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnLabel {
    Reentrancy,
    Arithmetic,
    UncheckedLowLevelCalls,
    TransactionOrderingDependency,
    TimeManipulation,
    NoVulnerability,
}

impl VulnLabel {
    pub const ALL: [VulnLabel; 6] = [
        VulnLabel::Reentrancy,
        VulnLabel::Arithmetic,
        VulnLabel::UncheckedLowLevelCalls,
        VulnLabel::TransactionOrderingDependency,
        VulnLabel::TimeManipulation,
        VulnLabel::NoVulnerability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnLabel::Reentrancy => "reentrancy",
            VulnLabel::Arithmetic => "arithmetic",
            VulnLabel::UncheckedLowLevelCalls => "unchecked_low_level_calls",
            VulnLabel::TransactionOrderingDependency => "transaction_ordering_dependency",
            VulnLabel::TimeManipulation => "time_manipulation",
            VulnLabel::NoVulnerability => "no_vulnerability",
        }
    }
}

impl fmt::Display for VulnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelSetError {
    #[error("unknown vulnerability label {0:?}")]
    Unknown(String),
    #[error("empty vulnerability label set")]
    Empty,
    #[error("no_vulnerability combined with other labels")]
    NotExclusive,
}

impl FromStr for VulnLabel {
    type Err = LabelSetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VulnLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| LabelSetError::Unknown(s.to_string()))
    }
}

/// Checks the two label-set rules: non-empty, and `no_vulnerability` alone.
pub fn validate_labels(labels: &BTreeSet<VulnLabel>) -> Result<(), LabelSetError> {
    if labels.is_empty() {
        return Err(LabelSetError::Empty);
    }
    if labels.contains(&VulnLabel::NoVulnerability) && labels.len() > 1 {
        return Err(LabelSetError::NotExclusive);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMutability {
    Pure,
    View,
    Nonpayable,
    Payable,
}

impl StateMutability {
    pub fn attributes(self) -> AttributeSet {
        match self {
            StateMutability::Pure => AttributeSet {
                view: true,
                payable: false,
                pure: true,
            },
            StateMutability::View => AttributeSet {
                view: true,
                payable: false,
                pure: false,
            },
            StateMutability::Nonpayable => AttributeSet::default(),
            StateMutability::Payable => AttributeSet {
                view: false,
                payable: true,
                pure: false,
            },
        }
    }
}

/// One parameter of a standard contract-ABI JSON entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbiParam {
    #[serde(default)]
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<AbiParam>,
}

impl AbiParam {
    /// Canonical type, with `tuple` expanded from its components.
    pub fn canonical_type(&self) -> String {
        match self.ty.strip_prefix("tuple") {
            Some(suffix) => {
                let inner: Vec<String> = self
                    .components
                    .iter()
                    .map(AbiParam::canonical_type)
                    .collect();
                alloc::format!("({}){}", inner.join(","), suffix)
            }
            None => self.ty.clone(),
        }
    }
}

/// One entry of a standard contract-ABI JSON array. Older compilers emit
/// `constant`/`payable` instead of `stateMutability`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbiItem {
    #[serde(rename = "type", default = "function_type")]
    pub kind: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<AbiParam>,
    #[serde(rename = "stateMutability", default)]
    pub state_mutability: Option<StateMutability>,
    #[serde(default)]
    pub constant: Option<bool>,
    #[serde(default)]
    pub payable: Option<bool>,
}

fn function_type() -> String {
    "function".to_string()
}

impl AbiItem {
    pub fn mutability(&self) -> StateMutability {
        if let Some(m) = self.state_mutability {
            return m;
        }
        match (self.constant, self.payable) {
            (Some(true), _) => StateMutability::View,
            (_, Some(true)) => StateMutability::Payable,
            _ => StateMutability::Nonpayable,
        }
    }

    pub fn signature(&self) -> String {
        let types: Vec<String> = self.inputs.iter().map(AbiParam::canonical_type).collect();
        alloc::format!("{}({})", self.name, types.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredFunction {
    /// Computed from the full signature before the name was dropped.
    pub selector: Selector,
    pub inputs: Vec<String>,
    #[serde(rename = "stateMutability")]
    pub state_mutability: StateMutability,
}

/// ABI functions with every name removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredAbi {
    pub functions: Vec<FilteredFunction>,
    #[serde(default)]
    pub has_fallback: bool,
    #[serde(default)]
    pub has_receive: bool,
}

impl FilteredAbi {
    /// Keeps `function` entries (sorted by selector) and drops names.
    pub fn from_items(items: &[AbiItem]) -> Result<Self, SignatureError> {
        let mut functions = Vec::new();
        let mut has_fallback = false;
        let mut has_receive = false;
        for item in items {
            match item.kind.as_str() {
                "function" => {
                    functions.push(FilteredFunction {
                        selector: selector_of(&item.signature())?,
                        inputs: item.inputs.iter().map(AbiParam::canonical_type).collect(),
                        state_mutability: item.mutability(),
                    });
                }
                "fallback" => has_fallback = true,
                "receive" => has_receive = true,
                _ => {}
            }
        }
        functions.sort_by_key(|f| f.selector);
        functions.dedup_by_key(|f| f.selector);
        Ok(FilteredAbi {
            functions,
            has_fallback,
            has_receive,
        })
    }

    pub fn selectors(&self) -> BTreeSet<Selector> {
        self.functions.iter().map(|f| f.selector).collect()
    }
}

/// Per-function side features. Parameter labels outside the label space are
/// replaced by [`UNK`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionFeature {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Selector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<usize>,
    pub params: Vec<String>,
    pub view: bool,
    pub payable: bool,
    pub pure: bool,
}

impl FunctionFeature {
    fn new(
        selector: Selector,
        entry: Option<usize>,
        params: Vec<String>,
        attrs: AttributeSet,
    ) -> Self {
        FunctionFeature {
            selector: Some(selector),
            entry,
            params,
            view: attrs.view,
            payable: attrs.payable,
            pure: attrs.pure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub contract_id: String,
    pub kind: RecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Selector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<usize>,
    pub context_tokens: Vec<String>,
    pub function_features: Vec<FunctionFeature>,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub context_truncated: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub missing_function_features: bool,
}

fn is_false(b: &bool) -> bool {
    !b
}

impl FeatureRecord {
    /// The label-set rules for detection records; the label-space rule for
    /// signature records.
    pub fn validate(&self, space: &LabelSpace) -> Result<(), FeatureError> {
        match self.kind {
            RecordKind::Signature => {
                let (end, params) = self.labels.split_last().ok_or(FeatureError::MissingEnd)?;
                if end != END_LABEL {
                    return Err(FeatureError::MissingEnd);
                }
                match params.iter().find(|l| !space.contains(l)) {
                    Some(l) => Err(FeatureError::OutOfLabelSpace(l.clone())),
                    None => Ok(()),
                }
            }
            RecordKind::Detection => {
                let set = self
                    .labels
                    .iter()
                    .map(|l| l.parse())
                    .collect::<Result<BTreeSet<VulnLabel>, _>>()?;
                validate_labels(&set)?;
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("signature labels must end with {END_LABEL}")]
    MissingEnd,
    #[error("parameter label {0:?} outside the label space")]
    OutOfLabelSpace(String),
    #[error(transparent)]
    Labels(#[from] LabelSetError),
}

/// Counts of functions that did not become signature records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureStats {
    pub contracts: usize,
    pub functions: usize,
    pub records: usize,
    /// No database entry for the selector.
    pub unresolved: usize,
    /// Colliding database entries with different parameter lists.
    pub ambiguous: usize,
    /// Resolved, but some parameter type is outside the label space.
    pub out_of_space: usize,
}

impl core::ops::AddAssign for SignatureStats {
    fn add_assign(&mut self, o: Self) {
        self.contracts += o.contracts;
        self.functions += o.functions;
        self.records += o.records;
        self.unresolved += o.unresolved;
        self.ambiguous += o.ambiguous;
        self.out_of_space += o.out_of_space;
    }
}

/// One signature record per recovered public function whose selector resolves
/// to a single parameter list in `db`, ordered by entry offset.
pub fn signature_records(
    contract: &Contract,
    db: &SignatureDb,
    space: &LabelSpace,
    depth: usize,
) -> (Vec<FeatureRecord>, SignatureStats) {
    let cfg = build_cfg(&contract.code);
    let recovery = recover_functions_at_depth(&cfg, depth);
    signature_records_from(&contract.id, &recovery, db, space)
}

pub fn signature_records_from(
    contract_id: &str,
    recovery: &Recovery,
    db: &SignatureDb,
    space: &LabelSpace,
) -> (Vec<FeatureRecord>, SignatureStats) {
    let mut stats = SignatureStats {
        contracts: 1,
        ..SignatureStats::default()
    };
    let mut records = Vec::new();
    for f in recovery.by_entry().into_iter().filter(|f| !f.fallback) {
        stats.functions += 1;
        let hits = db.lookup(f.selector);
        let Some(first) = hits.first() else {
            stats.unresolved += 1;
            continue;
        };
        let labels: Vec<String> = first.labels().map(ToString::to_string).collect();
        if hits[1..]
            .iter()
            .any(|r| !r.labels().eq(labels.iter().map(String::as_str)))
        {
            stats.ambiguous += 1;
            continue;
        }
        if labels.iter().any(|l| !space.contains(l)) {
            stats.out_of_space += 1;
            continue;
        }
        let mut labels = labels;
        labels.push(END_LABEL.to_string());
        stats.records += 1;
        records.push(FeatureRecord {
            contract_id: contract_id.to_string(),
            kind: RecordKind::Signature,
            selector: Some(f.selector),
            entry: Some(f.entry_block),
            context_tokens: f.context.clone(),
            function_features: Vec::new(),
            labels,
            context_truncated: false,
            missing_function_features: false,
        });
    }
    (records, stats)
}

/// Parameter labels predicted for one function by the inference model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignaturePrediction {
    pub contract_id: String,
    pub selector: Selector,
    pub labels: Vec<String>,
}

/// Where detection records take their function features from.
#[derive(Debug, Clone, Copy)]
pub enum FunctionSource<'a> {
    Abi(&'a FilteredAbi),
    /// Recovered functions, with parameters from these predictions (if any)
    /// and attributes from the rule table.
    Inferred(&'a [SignaturePrediction]),
}

#[derive(Debug, Clone)]
pub struct DetectionOptions {
    pub max_context: usize,
    pub depth: usize,
    pub rules: AttributeRuleTable,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        DetectionOptions {
            max_context: DEFAULT_MAX_CONTEXT,
            depth: crate::DEFAULT_CONTEXT_DEPTH,
            rules: AttributeRuleTable::default(),
        }
    }
}

/// SSA tokens of the whole contract in execution order, tail-truncated.
/// Callers building from solc output should drop the metadata trailer first
/// (see [`strip_metadata`]); its bytes decode as junk opcodes.
pub fn detection_context(cfg: &ControlFlowGraph, max_context: usize) -> (Vec<String>, bool) {
    let raw: Vec<&str> = execution_order(cfg)
        .iter()
        .flat_map(|id| cfg.blocks[id].mnemonics())
        .collect();
    let mut tokens = to_ssa(&raw).tokens;
    let truncated = tokens.len() > max_context;
    tokens.truncate(max_context);
    (tokens, truncated)
}

fn clamp_labels<'a>(labels: impl Iterator<Item = &'a str>, space: &LabelSpace) -> Vec<String> {
    labels
        .map(|l| if space.contains(l) { l } else { UNK })
        .map(ToString::to_string)
        .collect()
}

fn flat_labels(inputs: &[String]) -> Vec<String> {
    let probe = alloc::format!("f({})", inputs.join(","));
    match SignatureRecord::from_canonical(&probe) {
        Ok(record) => record.labels().map(ToString::to_string).collect(),
        Err(_) => alloc::vec![UNK.to_string(); inputs.len()],
    }
}

pub fn detection_record(
    contract: &Contract,
    source: FunctionSource<'_>,
    labels: &BTreeSet<VulnLabel>,
    space: &LabelSpace,
    opts: &DetectionOptions,
) -> Result<FeatureRecord, LabelSetError> {
    validate_labels(labels)?;
    let cfg = build_cfg(strip_metadata(&contract.code).0);
    let (context_tokens, context_truncated) = detection_context(&cfg, opts.max_context);
    let mut recovery = recover_functions_at_depth(&cfg, opts.depth);
    recovery.apply_rules(&opts.rules);

    let function_features = match source {
        FunctionSource::Abi(abi) => {
            let entry_of = |s: Selector| recovery.functions.get(&s).map(|f| f.entry_block);
            let mut fns: Vec<FunctionFeature> = abi
                .functions
                .iter()
                .map(|f| {
                    let params = flat_labels(&f.inputs);
                    FunctionFeature::new(
                        f.selector,
                        entry_of(f.selector),
                        clamp_labels(params.iter().map(String::as_str), space),
                        f.state_mutability.attributes(),
                    )
                })
                .collect();
            // recovered functions first by entry, then the rest by selector
            fns.sort_by_key(|f| (f.entry.is_none(), f.entry, f.selector));
            fns
        }
        FunctionSource::Inferred(predictions) => {
            let predicted: BTreeMap<Selector, &SignaturePrediction> = predictions
                .iter()
                .filter(|p| p.contract_id == contract.id)
                .map(|p| (p.selector, p))
                .collect();
            recovery
                .by_entry()
                .into_iter()
                .filter(|f| !f.fallback)
                .map(|f| {
                    let params = predicted.get(&f.selector).map_or(Vec::new(), |p| {
                        clamp_labels(
                            p.labels
                                .iter()
                                .map(String::as_str)
                                .filter(|l| *l != END_LABEL),
                            space,
                        )
                    });
                    FunctionFeature::new(f.selector, Some(f.entry_block), params, f.attributes)
                })
                .collect()
        }
    };

    let missing_function_features = function_features.is_empty();
    if missing_function_features {
        log::warn!("{}: no ABI functions and none recovered", contract.id);
    }
    Ok(FeatureRecord {
        contract_id: contract.id.clone(),
        kind: RecordKind::Detection,
        selector: None,
        entry: None,
        context_tokens,
        function_features,
        labels: labels.iter().map(|l| l.as_str().to_string()).collect(),
        context_truncated,
        missing_function_features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyOptions {
    pub filter_generic: bool,
    /// Mnemonics present in more than this fraction of all contracts are
    /// generic.
    pub threshold: f64,
}

impl Default for FrequencyOptions {
    fn default() -> Self {
        FrequencyOptions {
            filter_generic: false,
            threshold: 0.99,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub contracts: BTreeMap<String, usize>,
    pub rates: BTreeMap<String, BTreeMap<String, f64>>,
    /// Mnemonics removed by the generic filter.
    pub generic: BTreeSet<String>,
}

impl FrequencyReport {
    /// Per class, mnemonics whose rate is within `tolerance` of 1.
    pub fn near_unit(&self, tolerance: f64) -> BTreeMap<&str, Vec<&str>> {
        self.rates
            .iter()
            .map(|(class, rates)| {
                let near = rates
                    .iter()
                    .filter(|(_, r)| (**r - 1.0).abs() <= tolerance)
                    .map(|(m, _)| m.as_str())
                    .collect();
                (class.as_str(), near)
            })
            .collect()
    }
}

/// Per class: occurrences of each mnemonic over the class's detection records,
/// divided by the number of those records. A record counts once for every
/// label it carries.
pub fn opcode_frequency(records: &[FeatureRecord], opts: FrequencyOptions) -> FrequencyReport {
    let detection: Vec<&FeatureRecord> = records
        .iter()
        .filter(|r| r.kind == RecordKind::Detection)
        .collect();
    let mut report = FrequencyReport::default();
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut presence: BTreeMap<&str, usize> = BTreeMap::new();
    for record in &detection {
        for token in record.context_tokens.iter().collect::<BTreeSet<_>>() {
            *presence.entry(token).or_default() += 1;
        }
        for class in &record.labels {
            *report.contracts.entry(class.clone()).or_default() += 1;
            let per = counts.entry(class).or_default();
            for token in &record.context_tokens {
                *per.entry(token).or_default() += 1;
            }
        }
    }
    if opts.filter_generic && !detection.is_empty() {
        let total = detection.len() as f64;
        report.generic = presence
            .iter()
            .filter(|(_, &n)| n as f64 / total > opts.threshold)
            .map(|(m, _)| m.to_string())
            .collect();
    }
    for (class, per) in counts {
        let n = report.contracts[class] as f64;
        let rates = per
            .into_iter()
            .filter(|(m, _)| !report.generic.contains(*m))
            .map(|(m, c)| (m.to_string(), c as f64 / n))
            .collect();
        report.rates.insert(class.to_string(), rates);
    }
    report
}

/// Token -> index table. Index is position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub tokens: Vec<String>,
}

impl Vocabulary {
    /// `<pad>` = 0, `<unk>` = 1, then `tokens` in the given order, deduplicated.
    pub fn with_specials<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::plain(
            [PAD, UNK]
                .into_iter()
                .map(String::from)
                .chain(tokens.into_iter().map(|s| s.as_ref().to_string())),
        )
    }

    pub fn plain<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let tokens = tokens
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .filter(|s| seen.insert(s.clone()))
            .collect();
        Vocabulary { tokens }
    }

    /// Every mnemonic of the opcode table, in byte order.
    pub fn opcodes() -> Self {
        Self::with_specials(crate::opcode::OpcodeTable::entries().map(|(_, i)| i.mnemonic))
    }

    /// Label space, then the end token.
    pub fn params(space: &LabelSpace) -> Self {
        Self::with_specials(space.labels.iter().map(String::as_str).chain([END_LABEL]))
    }

    pub fn vulnerabilities() -> Self {
        Self::plain(VulnLabel::ALL.iter().map(|l| l.as_str()))
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn det(id: &str, labels: &[&str], tokens: &[&str]) -> FeatureRecord {
        FeatureRecord {
            contract_id: id.into(),
            kind: RecordKind::Detection,
            selector: None,
            entry: None,
            context_tokens: tokens.iter().map(|s| s.to_string()).collect(),
            function_features: vec![],
            labels: labels.iter().map(|s| s.to_string()).collect(),
            context_truncated: false,
            missing_function_features: false,
        }
    }

    #[test]
    fn frequency_single_contract() {
        let r = opcode_frequency(
            &[det("a", &["reentrancy"], &["ADD", "ADD", "STOP"])],
            Default::default(),
        );
        let rates = &r.rates["reentrancy"];
        assert_eq!(rates["ADD"], 2.0);
        assert_eq!(rates["STOP"], 1.0);
    }

    #[test]
    fn frequency_half() {
        let r = opcode_frequency(
            &[
                det("a", &["arithmetic"], &["SUB"]),
                det("b", &["arithmetic"], &["ADD"]),
            ],
            Default::default(),
        );
        assert_eq!(r.rates["arithmetic"]["SUB"], 0.5);
        assert_eq!(r.contracts["arithmetic"], 2);
    }

    #[test]
    fn generic_filter() {
        let records = [
            det("a", &["reentrancy"], &["CALLDATALOAD", "CALL"]),
            det("b", &["arithmetic"], &["CALLDATALOAD", "ADD"]),
        ];
        let r = opcode_frequency(
            &records,
            FrequencyOptions {
                filter_generic: true,
                ..Default::default()
            },
        );
        assert!(r.generic.contains("CALLDATALOAD"));
        assert!(!r.rates["reentrancy"].contains_key("CALLDATALOAD"));
        assert_eq!(r.rates["reentrancy"]["CALL"], 1.0);
        assert_eq!(r.near_unit(1e-9)["arithmetic"], ["ADD"]);
    }

    #[test]
    fn empty_input() {
        let r = opcode_frequency(
            &[],
            FrequencyOptions {
                filter_generic: true,
                threshold: 0.99,
            },
        );
        assert!(r.rates.is_empty());
    }

    #[test]
    fn label_rules() {
        use VulnLabel::*;
        assert!(validate_labels(&[Arithmetic, TimeManipulation].into()).is_ok());
        assert_eq!(validate_labels(&BTreeSet::new()), Err(LabelSetError::Empty));
        assert_eq!(
            validate_labels(&[NoVulnerability, Reentrancy].into()),
            Err(LabelSetError::NotExclusive)
        );
        for l in VulnLabel::ALL {
            assert_eq!(l.as_str().parse::<VulnLabel>().unwrap(), l);
        }
        assert!("overflow".parse::<VulnLabel>().is_err());
    }

    #[test]
    fn filtered_abi_drops_names() {
        let items: Vec<AbiItem> = vec![
            AbiItem {
                kind: "function".into(),
                name: "transfer".into(),
                inputs: vec![
                    AbiParam {
                        name: "to".into(),
                        ty: "address".into(),
                        components: vec![],
                    },
                    AbiParam {
                        name: "v".into(),
                        ty: "uint256".into(),
                        components: vec![],
                    },
                ],
                state_mutability: Some(StateMutability::Nonpayable),
                constant: None,
                payable: None,
            },
            AbiItem {
                kind: "fallback".into(),
                name: String::new(),
                inputs: vec![],
                state_mutability: Some(StateMutability::Payable),
                constant: None,
                payable: None,
            },
        ];
        let abi = FilteredAbi::from_items(&items).unwrap();
        assert_eq!(abi.functions.len(), 1);
        assert!(abi.has_fallback);
        assert_eq!(abi.functions[0].selector, Selector::from_u32(0xa9059cbb));
        assert_eq!(abi.functions[0].inputs, ["address", "uint256"]);
    }

    #[test]
    fn tuple_param_canonical() {
        let p = AbiParam {
            name: "o".into(),
            ty: "tuple[]".into(),
            components: vec![
                AbiParam {
                    name: "a".into(),
                    ty: "address".into(),
                    components: vec![],
                },
                AbiParam {
                    name: "b".into(),
                    ty: "uint8[2]".into(),
                    components: vec![],
                },
            ],
        };
        assert_eq!(p.canonical_type(), "(address,uint8[2])[]");
    }

    #[test]
    fn legacy_mutability() {
        let mut item = AbiItem {
            kind: "function".into(),
            name: "f".into(),
            inputs: vec![],
            state_mutability: None,
            constant: Some(true),
            payable: Some(false),
        };
        assert_eq!(item.mutability(), StateMutability::View);
        item.constant = Some(false);
        item.payable = Some(true);
        assert_eq!(item.mutability(), StateMutability::Payable);
    }

    #[test]
    fn vocab_layout() {
        let v = Vocabulary::params(&LabelSpace::default());
        assert_eq!(v.tokens[..2], [PAD, UNK]);
        assert_eq!(v.len(), 2 + LabelSpace::SIZE + 1);
        assert_eq!(v.tokens.last().unwrap(), END_LABEL);
        assert_eq!(
            Vocabulary::vulnerabilities().index_of("no_vulnerability"),
            Some(5)
        );
        let ops = Vocabulary::opcodes();
        assert_eq!(ops.index_of("STOP"), Some(2));
        assert!(ops.index_of("INVALID").is_some());
    }

    #[test]
    fn detection_context_is_ssa_and_capped() {
        let cfg = build_cfg(&crate::hex::parse_hex("6001600201600055").unwrap());
        assert_eq!(detection_context(&cfg, 10).0, ["ADD", "SSTORE"]);
        assert_eq!(detection_context(&cfg, 1), (vec!["ADD".to_string()], true));
    }

    #[test]
    fn record_validation() {
        let space = LabelSpace::default();
        let mut r = det("a", &["arithmetic", "time_manipulation"], &[]);
        assert!(r.validate(&space).is_ok());
        r.labels.push("no_vulnerability".into());
        assert!(r.validate(&space).is_err());
        r.kind = RecordKind::Signature;
        r.labels = vec!["address".into(), "uint256".into(), END_LABEL.into()];
        assert!(r.validate(&space).is_ok());
        r.labels = vec!["tuple".into(), END_LABEL.into()];
        assert_eq!(
            r.validate(&space),
            Err(FeatureError::OutOfLabelSpace("tuple".into()))
        );
    }
}
