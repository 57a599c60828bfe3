//! Pluggable tokenizers behind one lossless-contract trait.
//!
//! Two implementations ship with the crate:
//!
//! - [`ByteTokenizer`] — four specials plus the 256 byte values. Fully
//!   deterministic, needs no model file, and makes the whole test suite
//!   hermetic. This is the default everywhere.
//! - [`BpeTokenizer`] — loads published byte-level BPE `tokenizer.json`
//!   files (vocab + merges + added tokens). The loader is self-contained:
//!   it guarantees the lossless round-trip contract below, but does not
//!   claim token-id parity with any other implementation's pre-tokenizer
//!   quirks.
//!
//! The contract every implementation must satisfy: `decode(encode(text))`
//! reproduces `text` exactly, and every emitted id is `< vocab_size()`.
//! Stage 3 stores naked token ids, so a lossy tokenizer here would silently
//! corrupt training data downstream.

mod bpe;

pub use bpe::BpeTokenizer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("unknown tokenizer spec {0:?} (expected \"byte\" or a path to a .json file)")]
    UnknownSpec(String),
    #[error("failed to read tokenizer file {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("invalid tokenizer file: {0}")]
    Invalid(String),
    #[error("cannot encode: {0}")]
    Encode(String),
    #[error("cannot decode: {0}")]
    Decode(String),
    #[error("token id {0} is outside the vocabulary")]
    InvalidTokenId(u32),
}

pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;

    /// All emitted ids are strictly below this.
    fn vocab_size(&self) -> u32;

    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizerError>;

    fn decode(&self, tokens: &[u32]) -> Result<String, TokenizerError>;
}

/// Resolves a CLI/config tokenizer spec: `byte` for the built-in byte
/// tokenizer, otherwise a path to a BPE `tokenizer.json`.
pub fn load(spec: &str) -> Result<Box<dyn Tokenizer>, TokenizerError> {
    if spec == "byte" {
        return Ok(Box::new(ByteTokenizer::new()));
    }
    if spec.ends_with(".json") {
        return Ok(Box::new(BpeTokenizer::from_file(spec)?));
    }
    Err(TokenizerError::UnknownSpec(spec.to_string()))
}

/// Number of reserved special ids at the bottom of the byte vocabulary.
const SPECIALS: [&str; 4] = ["<|start|>", "<|end|>", "<|pad|>", "<|unk|>"];

/// Deterministic fallback tokenizer: ids 0–3 are specials, ids 4–259 are
/// the byte values shifted by 4. Encoding is byte-at-a-time and therefore
/// lossless for any UTF-8 input.
#[derive(Debug, Default, Clone, Copy)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub fn new() -> Self {
        ByteTokenizer
    }

    /// Id of the nth special token.
    pub fn special(n: usize) -> u32 {
        assert!(n < SPECIALS.len());
        n as u32
    }
}

impl Tokenizer for ByteTokenizer {
    fn name(&self) -> &str {
        "byte"
    }

    fn vocab_size(&self) -> u32 {
        SPECIALS.len() as u32 + 256
    }

    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizerError> {
        Ok(text
            .bytes()
            .map(|b| u32::from(b) + SPECIALS.len() as u32)
            .collect())
    }

    fn decode(&self, tokens: &[u32]) -> Result<String, TokenizerError> {
        let mut bytes = Vec::with_capacity(tokens.len());
        for &id in tokens {
            match id {
                0..=3 => bytes.extend_from_slice(SPECIALS[id as usize].as_bytes()),
                4..=259 => bytes.push((id - 4) as u8),
                _ => return Err(TokenizerError::InvalidTokenId(id)),
            }
        }
        String::from_utf8(bytes)
            .map_err(|e| TokenizerError::Decode(format!("assembled bytes are not UTF-8: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_tokenizer_round_trips() {
        let t = ByteTokenizer::new();
        for text in ["", "hello", "caf\u{e9} \u{1F4C4}", "## Title\n\nBody", "\t\r\n"] {
            let ids = t.encode(text).unwrap();
            assert!(ids.iter().all(|&id| id < t.vocab_size()));
            assert_eq!(t.decode(&ids).unwrap(), text);
        }
    }

    #[test]
    fn byte_tokenizer_ids_are_shifted_bytes() {
        let t = ByteTokenizer::new();
        assert_eq!(t.encode("Ab").unwrap(), vec![4 + 65, 4 + 98]);
        assert_eq!(t.vocab_size(), 260);
    }

    #[test]
    fn byte_tokenizer_decodes_specials_as_names() {
        let t = ByteTokenizer::new();
        assert_eq!(t.decode(&[0, 4 + b'x' as u32, 1]).unwrap(), "<|start|>x<|end|>");
    }

    #[test]
    fn byte_tokenizer_rejects_out_of_domain_ids() {
        let t = ByteTokenizer::new();
        assert!(matches!(
            t.decode(&[260]),
            Err(TokenizerError::InvalidTokenId(260))
        ));
        // A sequence assembling invalid UTF-8 is a decode error, not junk.
        assert!(matches!(
            t.decode(&[4 + 0xFF]),
            Err(TokenizerError::Decode(_))
        ));
    }

    #[test]
    fn load_dispatches_by_spec() {
        assert_eq!(load("byte").unwrap().name(), "byte");
        assert!(matches!(
            load("quantum"),
            Err(TokenizerError::UnknownSpec(_))
        ));
        assert!(matches!(
            load("/nonexistent/tok.json"),
            Err(TokenizerError::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn prop_byte_round_trip(text in "\\PC{0,300}") {
            let t = ByteTokenizer::new();
            let ids = t.encode(&text).unwrap();
            prop_assert!(ids.iter().all(|&id| id < t.vocab_size()));
            prop_assert_eq!(t.decode(&ids).unwrap(), text);
        }
    }
}
