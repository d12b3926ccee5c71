//! Hex text <-> bytes.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("invalid hex digit {found:?} at index {index}")]
    InvalidDigit { index: usize, found: char },
    #[error("odd number of hex digits; dangling digit at index {index}")]
    OddLength { index: usize },
}

impl HexError {
    /// Character index into the original text.
    pub fn index(&self) -> usize {
        match *self {
            HexError::InvalidDigit { index, .. } | HexError::OddLength { index } => index,
        }
    }
}

fn nibble(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

/// Decodes hex text with an optional `0x`/`0X` prefix. Case-insensitive.
/// Errors report indices into `text` itself, prefix included.
pub fn parse_hex(text: &str) -> Result<Vec<u8>, HexError> {
    let (offset, digits) = match text.get(..2) {
        Some("0x") | Some("0X") => (2, &text[2..]),
        _ => (0, text),
    };
    let bytes = digits.as_bytes();
    let mut out = Vec::with_capacity(bytes.len() / 2);
    for (i, pair) in bytes.chunks(2).enumerate() {
        let at = offset + 2 * i;
        let hi = nibble(pair[0]).ok_or_else(|| invalid(text, at))?;
        let Some(&lo) = pair.get(1) else {
            return Err(HexError::OddLength { index: at });
        };
        let lo = nibble(lo).ok_or_else(|| invalid(text, at + 1))?;
        out.push(hi << 4 | lo);
    }
    Ok(out)
}

fn invalid(text: &str, index: usize) -> HexError {
    // Index is a byte position; report the char that starts there (or the
    // one it falls inside of, for multi-byte input).
    let found = text
        .char_indices()
        .take_while(|(i, _)| *i <= index)
        .last()
        .map_or('\u{fffd}', |(_, c)| c);
    HexError::InvalidDigit { index, found }
}

/// Lowercase hex without prefix.
pub fn encode(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

/// Lowercase hex with a `0x` prefix.
pub fn encode_prefixed(bytes: &[u8]) -> String {
    let mut s = String::from("0x");
    s.push_str(&encode(bytes));
    s
}
