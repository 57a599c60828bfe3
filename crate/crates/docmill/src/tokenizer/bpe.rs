//! Self-contained loader for byte-level BPE `tokenizer.json` files.
//!
//! Reads the published JSON shape: `model.vocab` (token string → id),
//! `model.merges` (either `"a b"` strings or `["a", "b"]` pairs, rank =
//! position), and `added_tokens` (specials appended outside the BPE
//! model). Text is pre-split into whitespace-prefixed word chunks, each
//! chunk is mapped through the standard byte→printable-unicode table, and
//! merges are applied lowest rank first.
//!
//! What this loader promises is the trait contract — lossless round-trip
//! and domain-bounded ids. It does not replicate any particular regex
//! pre-tokenizer, so id sequences can differ from other implementations
//! even under the same vocabulary; anything it encodes, it decodes back
//! byte-for-byte.

use std::collections::HashMap;
use std::path::Path;

use serde_json::Value;

use super::{Tokenizer, TokenizerError};

#[derive(Debug)]
pub struct BpeTokenizer {
    name: String,
    vocab: HashMap<String, u32>,
    /// id → token string, the decode direction.
    inverse: HashMap<u32, String>,
    /// (left, right) → (rank, merged).
    merges: HashMap<(String, String), (u32, String)>,
    /// Added tokens decode as their literal content, bypassing the byte map.
    added: HashMap<u32, String>,
    vocab_size: u32,
}

impl BpeTokenizer {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TokenizerError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("bpe")
            .to_string();
        Self::from_json(&text, name)
    }

    pub fn from_json(text: &str, name: String) -> Result<Self, TokenizerError> {
        let root: Value = serde_json::from_str(text)
            .map_err(|e| TokenizerError::Invalid(format!("not JSON: {e}")))?;
        let model = root
            .get("model")
            .ok_or_else(|| TokenizerError::Invalid("missing model".into()))?;
        match model.get("type").and_then(Value::as_str) {
            Some("BPE") | None => {}
            Some(other) => {
                return Err(TokenizerError::Invalid(format!(
                    "unsupported model type {other:?} (only BPE)"
                )))
            }
        }

        let vocab_json = model
            .get("vocab")
            .and_then(Value::as_object)
            .ok_or_else(|| TokenizerError::Invalid("missing model.vocab".into()))?;
        if vocab_json.is_empty() {
            return Err(TokenizerError::Invalid("empty vocabulary".into()));
        }
        let mut vocab = HashMap::with_capacity(vocab_json.len());
        let mut inverse = HashMap::with_capacity(vocab_json.len());
        let mut max_id = 0u32;
        for (token, id) in vocab_json {
            let id = id
                .as_u64()
                .filter(|&v| v <= u64::from(u32::MAX))
                .ok_or_else(|| {
                    TokenizerError::Invalid(format!("vocab id for {token:?} is not a u32"))
                })? as u32;
            if inverse.insert(id, token.clone()).is_some() {
                return Err(TokenizerError::Invalid(format!("duplicate vocab id {id}")));
            }
            vocab.insert(token.clone(), id);
            max_id = max_id.max(id);
        }

        let mut merges = HashMap::new();
        if let Some(list) = model.get("merges").and_then(Value::as_array) {
            for (rank, entry) in list.iter().enumerate() {
                let (left, right) = match entry {
                    Value::String(s) => s
                        .split_once(' ')
                        .map(|(a, b)| (a.to_string(), b.to_string()))
                        .ok_or_else(|| {
                            TokenizerError::Invalid(format!("merge {s:?} is not \"left right\""))
                        })?,
                    Value::Array(pair) if pair.len() == 2 => {
                        match (pair[0].as_str(), pair[1].as_str()) {
                            (Some(a), Some(b)) => (a.to_string(), b.to_string()),
                            _ => {
                                return Err(TokenizerError::Invalid(
                                    "merge pair entries must be strings".into(),
                                ))
                            }
                        }
                    }
                    _ => {
                        return Err(TokenizerError::Invalid(
                            "merges must be strings or 2-element arrays".into(),
                        ))
                    }
                };
                let merged = format!("{left}{right}");
                merges.insert((left, right), (rank as u32, merged));
            }
        }

        let mut added = HashMap::new();
        if let Some(list) = root.get("added_tokens").and_then(Value::as_array) {
            for entry in list {
                let id = entry
                    .get("id")
                    .and_then(Value::as_u64)
                    .filter(|&v| v <= u64::from(u32::MAX))
                    .ok_or_else(|| TokenizerError::Invalid("added token without u32 id".into()))?
                    as u32;
                let content = entry
                    .get("content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| TokenizerError::Invalid("added token without content".into()))?;
                added.insert(id, content.to_string());
                max_id = max_id.max(id);
            }
        }

        Ok(BpeTokenizer {
            name,
            vocab,
            inverse,
            merges,
            added,
            vocab_size: max_id + 1,
        })
    }

    fn encode_chunk(
        &self,
        chunk: &str,
        table: &[char; 256],
        out: &mut Vec<u32>,
    ) -> Result<(), TokenizerError> {
        let mut symbols: Vec<String> = chunk
            .bytes()
            .map(|b| table[b as usize].to_string())
            .collect();

        // Merge the lowest-ranked adjacent pair until none applies.
        loop {
            let mut best: Option<(usize, u32)> = None;
            for i in 0..symbols.len().saturating_sub(1) {
                if let Some(&(rank, _)) =
                    self.merges.get(&(symbols[i].clone(), symbols[i + 1].clone()))
                {
                    if best.map_or(true, |(_, r)| rank < r) {
                        best = Some((i, rank));
                    }
                }
            }
            match best {
                Some((i, _)) => {
                    let right = symbols.remove(i + 1);
                    symbols[i].push_str(&right);
                }
                None => break,
            }
        }

        for symbol in symbols {
            match self.vocab.get(&symbol) {
                Some(&id) => out.push(id),
                None => {
                    return Err(TokenizerError::Encode(format!(
                        "no vocabulary entry for symbol {symbol:?}; \
                         the vocabulary lacks byte-level coverage"
                    )))
                }
            }
        }
        Ok(())
    }
}

impl Tokenizer for BpeTokenizer {
    fn name(&self) -> &str {
        &self.name
    }

    fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizerError> {
        let table = byte_to_char();
        let mut out = Vec::with_capacity(text.len() / 3 + 1);
        for chunk in WordChunks::new(text) {
            self.encode_chunk(chunk, &table, &mut out)?;
        }
        Ok(out)
    }

    fn decode(&self, tokens: &[u32]) -> Result<String, TokenizerError> {
        let table = char_to_byte();
        let mut bytes = Vec::with_capacity(tokens.len() * 3);
        for &id in tokens {
            if let Some(content) = self.added.get(&id) {
                bytes.extend_from_slice(content.as_bytes());
                continue;
            }
            let token = self
                .inverse
                .get(&id)
                .ok_or(TokenizerError::InvalidTokenId(id))?;
            for c in token.chars() {
                match table.get(&c) {
                    Some(&b) => bytes.push(b),
                    None => {
                        return Err(TokenizerError::Decode(format!(
                            "token {token:?} contains {c:?}, which is outside the byte alphabet"
                        )))
                    }
                }
            }
        }
        String::from_utf8(bytes)
            .map_err(|e| TokenizerError::Decode(format!("assembled bytes are not UTF-8: {e}")))
    }
}

/// Splits text into chunks where each whitespace run attaches to the word
/// following it ("a b c " → "a", " b", " c", " "). Keeps merges from
/// spanning word boundaries while preserving every byte.
struct WordChunks<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> WordChunks<'a> {
    fn new(text: &'a str) -> Self {
        WordChunks { text, pos: 0 }
    }
}

impl<'a> Iterator for WordChunks<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        let rest = &self.text[self.pos..];
        if rest.is_empty() {
            return None;
        }
        let mut iter = rest.char_indices().peekable();
        // Leading whitespace run.
        while let Some(&(_, c)) = iter.peek() {
            if c.is_whitespace() {
                iter.next();
            } else {
                break;
            }
        }
        // Word run; the chunk ends at the whitespace that starts the next
        // chunk, or at the end of input (which makes a trailing-whitespace
        // run its own chunk).
        let end = loop {
            match iter.peek() {
                Some(&(i, c)) if c.is_whitespace() => break i,
                Some(_) => {
                    iter.next();
                }
                None => break rest.len(),
            }
        };
        let chunk = &rest[..end];
        self.pos += end;
        Some(chunk)
    }
}

/// GPT-2-style byte→printable-unicode table.
fn byte_to_char() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut shifted = 0u32;
    for b in 0..256u32 {
        let printable =
            (33..=126).contains(&b) || (161..=172).contains(&b) || (174..=255).contains(&b);
        table[b as usize] = if printable {
            char::from_u32(b).unwrap()
        } else {
            let c = char::from_u32(256 + shifted).unwrap();
            shifted += 1;
            c
        };
    }
    table
}

fn char_to_byte() -> HashMap<char, u8> {
    byte_to_char()
        .iter()
        .enumerate()
        .map(|(b, &c)| (c, b as u8))
        .collect()
}
