//! Reading bytecode from a path, a literal argument or stdin.

use std::io::Read;
use std::path::Path;

use evmscope_core::hex::{parse_hex, HexError};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{source_name}: {err}")]
    Hex { source_name: String, err: HexError },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Hex text if it decodes as hex (surrounding whitespace ignored), raw bytes
/// otherwise.
pub fn decode_blob(bytes: Vec<u8>) -> Vec<u8> {
    match std::str::from_utf8(&bytes) {
        Ok(text) => parse_hex(text.trim()).unwrap_or(bytes),
        Err(_) => bytes,
    }
}

/// `arg` is read as a file when it names one and parsed as literal hex
/// otherwise; `None` reads stdin.
pub fn read_code(arg: Option<&str>) -> Result<Vec<u8>, InputError> {
    match arg {
        None | Some("-") => {
            let mut buf = Vec::new();
            std::io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| InputError::Io("<stdin>".into(), e))?;
            Ok(decode_blob(buf))
        }
        Some(arg) if Path::new(arg).exists() && !Path::new(arg).is_dir() => {
            let bytes = std::fs::read(arg).map_err(|e| InputError::Io(arg.into(), e))?;
            Ok(decode_blob(bytes))
        }
        Some(arg) => parse_hex(arg.trim()).map_err(|err| InputError::Hex {
            source_name: "argument".into(),
            err,
        }),
    }
}

/// Whole text of a file, or of stdin for `None`/`-`.
pub fn read_text(arg: Option<&str>) -> Result<String, InputError> {
    match arg {
        None | Some("-") => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| InputError::Io("<stdin>".into(), e))?;
            Ok(s)
        }
        Some(path) => std::fs::read_to_string(path).map_err(|e| InputError::Io(path.into(), e)),
    }
}
