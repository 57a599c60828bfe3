//! Text-layer PDF extraction.
//!
//! Pulls text from the content streams of each page. Scanned PDFs (images
//! without a text layer) and encrypted files fail with a descriptive
//! message; rasterized recovery is out of scope.

/// Extracts the concatenated text layer of every page.
pub fn extract_pdf_text(raw: &[u8]) -> Result<String, String> {
    let doc =
        lopdf::Document::load_mem(raw).map_err(|e| format!("pdf parse failure: {e}"))?;
    if doc.is_encrypted() {
        return Err("pdf is encrypted".into());
    }
    let pages: Vec<u32> = doc.get_pages().keys().copied().collect();
    if pages.is_empty() {
        return Err("pdf has no pages".into());
    }
    let text = doc
        .extract_text(&pages)
        .map_err(|e| format!("pdf text extraction failure: {e}"))?;
    let cleaned = normalize(&text);
    if cleaned.is_empty() {
        return Err("pdf has no extractable text layer".into());
    }
    Ok(cleaned)
}

/// Collapses the extractor's per-fragment newlines into readable lines:
/// runs of blank lines become paragraph breaks, trailing space goes away.
fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0;
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            blank_run += 1;
            continue;
        }
        if !out.is_empty() {
            out.push_str(if blank_run > 0 { "\n\n" } else { "\n" });
        }
        out.push_str(line);
        blank_run = 0;
    }
    out
}
