//! Shared inputs for the docmill benchmarks: deterministic payloads at
//! the sizes the hot paths usually see.

use std::collections::BTreeMap;

use docmill::fixtures;
use docmill::DocumentEnvelope;

/// Roughly `min_words` of deterministic English-like prose.
pub fn prose(min_words: usize) -> String {
    fixtures::english_sample(min_words)
}

/// A mid-sized page: a few dozen headings, a table, emphasis spans.
pub fn html_page() -> String {
    fixtures::html_page(0xBE7C_0001, 24, 40, 32)
}

/// An envelope sealed around `body`, ready to open or extract.
pub fn sealed(body: &[u8], format: &str) -> DocumentEnvelope {
    DocumentEnvelope::seal(
        body,
        format,
        "bench://local",
        "CC0-1.0",
        "bench",
        "doc-0",
        BTreeMap::new(),
    )
    .expect("non-empty payload seals")
}
