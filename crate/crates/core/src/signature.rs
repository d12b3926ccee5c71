//! Function signatures, selectors and the parameter label space.
//!
//! A selector is the first four bytes of Keccak-256 over the canonical
//! signature text, e.g. `transfer(address,uint256)` -> `0xa9059cbb`.
//! Parameter types are mapped onto a closed set of 17 labels; see
//! [`LabelSpace`].

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};

/// Label appended to every parameter sequence to mark its end.
pub const END_LABEL: &str = "<end>";

/// Four-byte function id.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Selector(pub [u8; 4]);

impl Selector {
    /// Pseudo-selector under which the dispatcher's fallback entry is recorded.
    pub const FALLBACK: Selector = Selector([0xff; 4]);

    pub const fn from_u32(v: u32) -> Self {
        Selector(v.to_be_bytes())
    }

    pub const fn as_u32(self) -> u32 {
        u32::from_be_bytes(self.0)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:08x}", self.as_u32())
    }
}

impl fmt::Debug for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid selector {0:?}: expected 8 hex digits")]
pub struct SelectorParseError(pub String);

impl FromStr for Selector {
    type Err = SelectorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SelectorParseError(s.to_string());
        let digits = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .unwrap_or(s);
        if digits.len() != 8 {
            return Err(err());
        }
        let bytes = crate::hex::parse_hex(digits).map_err(|_| err())?;
        Ok(Selector([bytes[0], bytes[1], bytes[2], bytes[3]]))
    }
}

impl Serialize for Selector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("empty function name in {0:?}")]
    EmptyName(String),
    #[error("invalid function name {0:?}")]
    InvalidName(String),
    #[error("unbalanced parentheses in {0:?}")]
    Unbalanced(String),
    #[error("signature {text:?} is not canonical; expected {canonical:?}")]
    NonCanonical { text: String, canonical: String },
    #[error("unknown type {0:?}")]
    UnknownType(String),
    #[error("type {0:?} is outside the parameter label space")]
    OutOfLabelSpace(String),
}

/// An ABI type as it appears in a signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AbiType {
    Address,
    Bool,
    String,
    Bytes,
    Function,
    FixedBytes(u8),
    Uint(u16),
    Int(u16),
    Fixed {
        signed: bool,
        bits: u16,
        decimals: u8,
    },
    Array(Box<AbiType>, Option<usize>),
    Tuple(Vec<AbiType>),
}

impl fmt::Display for AbiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbiType::Address => f.write_str("address"),
            AbiType::Bool => f.write_str("bool"),
            AbiType::String => f.write_str("string"),
            AbiType::Bytes => f.write_str("bytes"),
            AbiType::Function => f.write_str("function"),
            AbiType::FixedBytes(n) => write!(f, "bytes{n}"),
            AbiType::Uint(n) => write!(f, "uint{n}"),
            AbiType::Int(n) => write!(f, "int{n}"),
            AbiType::Fixed {
                signed,
                bits,
                decimals,
            } => {
                write!(
                    f,
                    "{}fixed{bits}x{decimals}",
                    if *signed { "" } else { "u" }
                )
            }
            AbiType::Array(inner, None) => write!(f, "{inner}[]"),
            AbiType::Array(inner, Some(n)) => write!(f, "{inner}[{n}]"),
            AbiType::Tuple(items) => {
                f.write_str("(")?;
                write_list(f, items)?;
                f.write_str(")")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[AbiType]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

fn parse_elementary(name: &str) -> Option<AbiType> {
    fn bits(digits: &str) -> Option<u16> {
        let n: u16 = digits.parse().ok()?;
        (!digits.starts_with('0') && n.is_multiple_of(8) && (8..=256).contains(&n)).then_some(n)
    }
    Some(match name {
        "address" => AbiType::Address,
        "bool" => AbiType::Bool,
        "string" => AbiType::String,
        "bytes" => AbiType::Bytes,
        "function" => AbiType::Function,
        _ => {
            if let Some(d) = name.strip_prefix("bytes") {
                let n: u8 = d.parse().ok()?;
                if d.starts_with('0') || !(1..=32).contains(&n) {
                    return None;
                }
                AbiType::FixedBytes(n)
            } else if let Some(d) = name.strip_prefix("uint") {
                AbiType::Uint(bits(d)?)
            } else if let Some(d) = name.strip_prefix("int") {
                AbiType::Int(bits(d)?)
            } else if let Some((signed, rest)) = name
                .strip_prefix("ufixed")
                .map(|r| (false, r))
                .or_else(|| name.strip_prefix("fixed").map(|r| (true, r)))
            {
                let (m, n) = rest.split_once('x')?;
                let decimals: u8 = n.parse().ok()?;
                if n.starts_with('0') && n != "0" || decimals > 80 {
                    return None;
                }
                AbiType::Fixed {
                    signed,
                    bits: bits(m)?,
                    decimals,
                }
            } else {
                return None;
            }
        }
    })
}

/// Aliases that are legal Solidity but not canonical ABI type names.
const BUILTIN_ALIASES: [(&str, &str); 5] = [
    ("uint", "uint256"),
    ("int", "int256"),
    ("byte", "bytes1"),
    ("fixed", "fixed128x18"),
    ("ufixed", "ufixed128x18"),
];

struct TypeParser<'a, 'm> {
    src: &'a str,
    pos: usize,
    aliases: Option<&'m BTreeMap<String, String>>,
    aliased: bool,
}

impl<'a> TypeParser<'a, '_> {
    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Comma-separated list up to (not including) the closing paren.
    fn list(&mut self) -> Result<Vec<AbiType>, SignatureError> {
        let mut items = Vec::new();
        if self.peek() == Some(b')') {
            return Ok(items);
        }
        loop {
            items.push(self.ty()?);
            if !self.eat(b',') {
                return Ok(items);
            }
        }
    }

    fn ty(&mut self) -> Result<AbiType, SignatureError> {
        let start = self.pos;
        let mut ty = if self.eat(b'(') {
            let items = self.list()?;
            if !self.eat(b')') {
                return Err(SignatureError::Unbalanced(self.src.to_string()));
            }
            AbiType::Tuple(items)
        } else {
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            let resolved = self.resolve_alias(name);
            parse_elementary(&resolved).ok_or_else(|| {
                let end = self.src[self.pos..]
                    .find([',', ')'])
                    .map_or(self.src.len(), |i| self.pos + i);
                SignatureError::UnknownType(self.src[start..end.max(start)].to_string())
            })?
        };
        while self.eat(b'[') {
            let digits_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let digits = &self.src[digits_start..self.pos];
            if !self.eat(b']') {
                return Err(SignatureError::UnknownType(
                    self.src[start..self.pos].to_string(),
                ));
            }
            let len = if digits.is_empty() {
                None
            } else {
                match digits.parse::<usize>() {
                    Ok(n) if n > 0 && !digits.starts_with('0') => Some(n),
                    _ => {
                        return Err(SignatureError::UnknownType(
                            self.src[start..self.pos].to_string(),
                        ))
                    }
                }
            };
            ty = AbiType::Array(Box::new(ty), len);
        }
        Ok(ty)
    }

    fn resolve_alias(&mut self, name: &str) -> String {
        let custom = self.aliases.and_then(|m| m.get(name)).map(String::as_str);
        let builtin = BUILTIN_ALIASES
            .iter()
            .find(|(a, _)| *a == name)
            .map(|(_, c)| *c);
        match custom.or(builtin) {
            Some(canonical) => {
                self.aliased = true;
                canonical.to_string()
            }
            None => name.to_string(),
        }
    }
}

/// Name and parameter types of a signature, after alias resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSignature {
    pub name: String,
    pub inputs: Vec<AbiType>,
}

impl ParsedSignature {
    pub fn canonical(&self) -> String {
        struct List<'a>(&'a [AbiType]);
        impl fmt::Display for List<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write_list(f, self.0)
            }
        }
        alloc::format!("{}({})", self.name, List(&self.inputs))
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Strict structural parse of `name(type,...)`, with alias resolution.
/// Whitespace is not accepted here.
fn parse_structure(
    text: &str,
    aliases: Option<&BTreeMap<String, String>>,
) -> Result<(ParsedSignature, bool), SignatureError> {
    let open = text
        .find('(')
        .ok_or_else(|| SignatureError::Unbalanced(text.to_string()))?;
    let name = &text[..open];
    if name.is_empty() {
        return Err(SignatureError::EmptyName(text.to_string()));
    }
    if !is_identifier(name) {
        return Err(SignatureError::InvalidName(name.to_string()));
    }
    let mut depth = 0i32;
    for c in text[open..].chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(SignatureError::Unbalanced(text.to_string()));
        }
    }
    if depth != 0 || !text.ends_with(')') {
        return Err(SignatureError::Unbalanced(text.to_string()));
    }
    let mut parser = TypeParser {
        src: text,
        pos: open + 1,
        aliases,
        aliased: false,
    };
    let inputs = parser.list()?;
    if !parser.eat(b')') || parser.pos != text.len() {
        let rest = &text[parser.pos..text.len() - 1];
        let token = rest.split([',', ')']).next().unwrap_or(rest);
        return Err(SignatureError::UnknownType(token.to_string()));
    }
    let aliased = parser.aliased;
    Ok((
        ParsedSignature {
            name: name.to_string(),
            inputs,
        },
        aliased,
    ))
}

/// Keccak-256 of `data`.
pub fn keccak256(data: &[u8]) -> [u8; 32] {
    Keccak256::digest(data).into()
}

/// Selector of a canonical signature. Non-canonical input (whitespace,
/// parameter names, `uint` instead of `uint256`) is rejected rather than
/// hashed to a wrong selector.
pub fn selector_of(signature_text: &str) -> Result<Selector, SignatureError> {
    if signature_text.chars().any(char::is_whitespace) {
        let canonical = normalize(signature_text, None)
            .map(|p| p.canonical())
            .unwrap_or_default();
        return Err(SignatureError::NonCanonical {
            text: signature_text.to_string(),
            canonical,
        });
    }
    let (parsed, aliased) = parse_structure(signature_text, None)?;
    if aliased {
        return Err(SignatureError::NonCanonical {
            text: signature_text.to_string(),
            canonical: parsed.canonical(),
        });
    }
    Ok(selector_of_unchecked(signature_text))
}

fn selector_of_unchecked(text: &str) -> Selector {
    let digest = keccak256(text.as_bytes());
    Selector([digest[0], digest[1], digest[2], digest[3]])
}

/// Tolerant parse: whitespace, parameter names and data locations (anything
/// after a parameter's first word) are dropped and aliases are resolved.
fn normalize(
    text: &str,
    aliases: Option<&BTreeMap<String, String>>,
) -> Result<ParsedSignature, SignatureError> {
    let text = text.trim();
    let mut compact = String::with_capacity(text.len());
    // Keep only the first word of each parameter: its type.
    let mut word_index = 0;
    let mut prev_space = false;
    let mut in_params = false;
    for c in text.chars() {
        if c.is_whitespace() {
            prev_space = true;
            continue;
        }
        if matches!(c, '(' | ')' | ',' | '[' | ']') {
            if c == '(' || c == ',' {
                word_index = 0;
            }
            if c == '(' {
                in_params = true;
            }
            compact.push(c);
            prev_space = false;
            continue;
        }
        if prev_space && in_params && !compact.ends_with(['(', ',']) {
            word_index += 1;
        }
        prev_space = false;
        if word_index == 0 {
            compact.push(c);
        }
    }
    parse_structure(&compact, aliases).map(|(p, _)| p)
}

/// Array shape of a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Dynamic,
    Fixed(usize),
}

/// One parameter of a signature, labeled by its canonical type string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParameterType {
    pub label: String,
    /// Bit width for (u)int, byte width for bytesN, of the element type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArrayKind>,
}

impl ParameterType {
    fn from_abi(ty: &AbiType) -> Self {
        let (element, array) = match ty {
            AbiType::Array(inner, len) => (
                inner.as_ref(),
                Some(len.map_or(ArrayKind::Dynamic, ArrayKind::Fixed)),
            ),
            other => (other, None),
        };
        let width = match element {
            AbiType::Uint(n) | AbiType::Int(n) => Some(*n),
            AbiType::FixedBytes(n) => Some(*n as u16),
            _ => None,
        };
        ParameterType {
            label: ty.to_string(),
            width,
            array,
        }
    }

    pub fn is_array(&self) -> bool {
        self.array.is_some()
    }
}

/// Top-level tuples are spliced into the surrounding list; everything else is
/// one parameter.
fn flatten(inputs: &[AbiType], out: &mut Vec<ParameterType>) {
    for ty in inputs {
        match ty {
            AbiType::Tuple(items) => flatten(items, out),
            other => out.push(ParameterType::from_abi(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub selector: Selector,
    pub text: String,
    pub params: Vec<ParameterType>,
}

impl SignatureRecord {
    /// Record for canonical `text` without restricting parameter labels.
    pub fn from_canonical(text: &str) -> Result<Self, SignatureError> {
        let selector = selector_of(text)?;
        let (parsed, _) = parse_structure(text, None)?;
        let mut params = Vec::new();
        flatten(&parsed.inputs, &mut params);
        Ok(SignatureRecord {
            selector,
            text: text.to_string(),
            params,
        })
    }

    pub fn to_text(&self) -> &str {
        &self.text
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.params.iter().map(|p| p.label.as_str())
    }

    /// First parameter whose label the space does not contain.
    pub fn first_outside<'a>(&'a self, space: &LabelSpace) -> Option<&'a str> {
        self.labels().find(|l| !space.contains(l))
    }
}

/// Parses near-canonical signature text into a record whose parameters all
/// belong to `space`.
pub fn parse_signature(text: &str, space: &LabelSpace) -> Result<SignatureRecord, SignatureError> {
    let parsed = normalize(text, Some(&space.aliases))?;
    let canonical = parsed.canonical();
    let mut params = Vec::new();
    flatten(&parsed.inputs, &mut params);
    if let Some(outside) = params.iter().find(|p| !space.contains(&p.label)) {
        return Err(SignatureError::OutOfLabelSpace(outside.label.clone()));
    }
    Ok(SignatureRecord {
        selector: selector_of_unchecked(&canonical),
        text: canonical,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelSpaceError {
    #[error("label space must contain exactly {expected} labels, found {found}")]
    WrongSize { expected: usize, found: usize },
    #[error("duplicate label {0:?}")]
    Duplicate(String),
    #[error("label {0:?} is not a canonical ABI type")]
    NotCanonical(String),
}

/// Closed set of parameter labels plus the alias map applied before labeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub version: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl LabelSpace {
    pub const SIZE: usize = 17;

    /// Checks size, uniqueness and that every label is a canonical type.
    pub fn validate(&self) -> Result<(), LabelSpaceError> {
        if self.labels.len() != Self::SIZE {
            return Err(LabelSpaceError::WrongSize {
                expected: Self::SIZE,
                found: self.labels.len(),
            });
        }
        for (i, label) in self.labels.iter().enumerate() {
            if self.labels[..i].contains(label) {
                return Err(LabelSpaceError::Duplicate(label.clone()));
            }
            let probe = alloc::format!("f({label})");
            match parse_structure(&probe, None) {
                Ok((parsed, false))
                    if parsed.inputs.len() == 1 && parsed.inputs[0].to_string() == *label => {}
                _ => return Err(LabelSpaceError::NotCanonical(label.clone())),
            }
        }
        Ok(())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl Default for LabelSpace {
    fn default() -> Self {
        let labels = [
            "address",
            "uint256",
            "bool",
            "string",
            "bytes",
            "bytes32",
            "uint8",
            "uint16",
            "uint32",
            "uint64",
            "uint128",
            "int256",
            "bytes4",
            "address[]",
            "uint256[]",
            "bytes32[]",
            "bytes[]",
        ];
        LabelSpace {
            version: "1".to_string(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            aliases: BUILTIN_ALIASES
                .iter()
                .map(|(a, c)| (a.to_string(), c.to_string()))
                .collect(),
        }
    }
}

/// Why a database row was not loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRejection {
    /// The text does not parse as a canonical signature.
    Malformed,
    /// The stored selector is not the Keccak prefix of the text.
    SelectorMismatch,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DbLoadReport {
    pub accepted: usize,
    pub malformed: usize,
    pub selector_mismatch: usize,
    pub duplicates: usize,
}

impl DbLoadReport {
    pub fn rejected(&self) -> usize {
        self.malformed + self.selector_mismatch
    }
}

/// Selector -> signature texts. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignatureDb {
    by_selector: BTreeMap<Selector, Vec<SignatureRecord>>,
}

impl SignatureDb {
    /// Loads rows, keeping only those whose selector matches their text.
    pub fn from_rows<I, S>(rows: I) -> (Self, DbLoadReport)
    where
        I: IntoIterator<Item = (Selector, S)>,
        S: AsRef<str>,
    {
        let mut db = SignatureDb::default();
        let mut report = DbLoadReport::default();
        for (selector, text) in rows {
            match db.insert(selector, text.as_ref()) {
                Ok(true) => report.accepted += 1,
                Ok(false) => report.duplicates += 1,
                Err(RowRejection::Malformed) => report.malformed += 1,
                Err(RowRejection::SelectorMismatch) => report.selector_mismatch += 1,
            }
        }
        (db, report)
    }

    /// Builds a database from signature texts alone.
    pub fn from_signatures<I, S>(texts: I) -> Result<Self, SignatureError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut db = SignatureDb::default();
        for text in texts {
            let record = SignatureRecord::from_canonical(text.as_ref())?;
            db.insert_record(record);
        }
        Ok(db)
    }

    /// `Ok(false)` for an exact duplicate row.
    pub fn insert(&mut self, selector: Selector, text: &str) -> Result<bool, RowRejection> {
        let record = SignatureRecord::from_canonical(text).map_err(|_| RowRejection::Malformed)?;
        if record.selector != selector {
            return Err(RowRejection::SelectorMismatch);
        }
        Ok(self.insert_record(record))
    }

    fn insert_record(&mut self, record: SignatureRecord) -> bool {
        let bucket = self.by_selector.entry(record.selector).or_default();
        match bucket.binary_search_by(|r| r.text.cmp(&record.text)) {
            Ok(_) => false,
            Err(at) => {
                bucket.insert(at, record);
                true
            }
        }
    }

    /// Every record with this selector, sorted by text. Collisions are
    /// returned together; none is preferred.
    pub fn lookup(&self, selector: Selector) -> &[SignatureRecord] {
        self.by_selector.get(&selector).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.by_selector.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_selector.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &SignatureRecord> + '_ {
        self.by_selector.values().flatten()
    }
}
