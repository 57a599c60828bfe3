//! Text encoding detection for source bytes with unknown provenance.
//!
//! Detection order: byte-order mark, then strict UTF-8 validation, then a
//! byte-frequency check that accepts plausible single-byte text as
//! Latin-1. Bytes that look like binary (NULs, heavy control-character
//! content) are refused rather than mangled into mojibake.

/// Decoded text plus the name of the encoding that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub text: String,
    pub encoding: &'static str,
}

/// Fraction of bytes that must be printable/whitespace for the Latin-1
/// fallback to engage. Random binary fails this overwhelmingly.
const MIN_TEXTUAL_RATIO: f64 = 0.90;

/// Decodes bytes as text, or refuses if they do not plausibly hold any.
///
/// UTF-16 content is only recognized via its BOM; within it, unpaired
/// surrogates become U+FFFD rather than failing the whole document.
pub fn decode_text(raw: &[u8]) -> Result<Decoded, String> {
    if raw.is_empty() {
        return Err("empty content".into());
    }
    if let Some(stripped) = raw.strip_prefix(&[0xEF, 0xBB, 0xBF]) {
        return match std::str::from_utf8(stripped) {
            Ok(text) => Ok(Decoded {
                text: text.to_string(),
                encoding: "utf-8 (bom)",
            }),
            // A UTF-8 BOM on non-UTF-8 bytes: fall back to the heuristic
            // on the payload behind the BOM.
            Err(_) => decode_single_byte(stripped),
        };
    }
    if let Some(stripped) = raw.strip_prefix(&[0xFF, 0xFE]) {
        return Ok(decode_utf16(stripped, u16::from_le_bytes, "utf-16le"));
    }
    if let Some(stripped) = raw.strip_prefix(&[0xFE, 0xFF]) {
        return Ok(decode_utf16(stripped, u16::from_be_bytes, "utf-16be"));
    }
    if let Ok(text) = std::str::from_utf8(raw) {
        return Ok(Decoded {
            text: text.to_string(),
            encoding: "utf-8",
        });
    }
    decode_single_byte(raw)
}

/// True when the bytes pass the frequency check that `decode_text` uses —
/// the same judgement MIME sniffing needs for "is this text at all".
pub fn looks_textual(raw: &[u8]) -> bool {
    if raw.is_empty() || raw.contains(&0) {
        return false;
    }
    let printable = raw
        .iter()
        .filter(|&&b| matches!(b, b'\t' | b'\n' | b'\r' | 0x20..=0x7E | 0xA0..=0xFF))
        .count();
    printable as f64 / raw.len() as f64 >= MIN_TEXTUAL_RATIO
}

fn decode_single_byte(raw: &[u8]) -> Result<Decoded, String> {
    if !looks_textual(raw) {
        return Err("content is not valid UTF-8 and does not look like single-byte text".into());
    }
    Ok(Decoded {
        text: raw.iter().map(|&b| b as char).collect(),
        encoding: "latin-1",
    })
}

fn decode_utf16(raw: &[u8], read: fn([u8; 2]) -> u16, name: &'static str) -> Decoded {
    let mut units: Vec<u16> = raw
        .chunks_exact(2)
        .map(|pair| read([pair[0], pair[1]]))
        .collect();
    if raw.len() % 2 != 0 {
        units.push(u16::from(raw[raw.len() - 1]));
    }
    Decoded {
        text: String::from_utf16_lossy(&units),
        encoding: name,
    }
}
