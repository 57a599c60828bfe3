//! Deterministic sample corpus for tests, demos, and benchmarks.
//!
//! Everything here is generated from fixed seeds: two calls to any
//! function in this module produce byte-identical output, on any
//! platform. That determinism is what makes the corpus usable as a test
//! oracle — structural ground truth (heading counts, table rows,
//! emphasis spans, archive membership) is recorded next to the bytes at
//! generation time instead of being re-derived by parsing.
//!
//! The standard [`corpus`] holds fifty documents spanning every format
//! the extraction chains route: HTML pages with known structure, plain
//! text, Markdown, JSON and XML data files, a single-page PDF with a
//! text layer, a ZIP archive of five text members, and one file of
//! printable garbage that parses fine but should never survive quality
//! scoring.

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Corpus shape
// ---------------------------------------------------------------------------

/// Documents in the standard corpus.
pub const CORPUS_SIZE: usize = 50;
/// Members inside the corpus ZIP archive.
pub const ZIP_MEMBER_COUNT: usize = 5;
/// Relative path of the deliberately low-quality document.
pub const GARBLED_PATH: &str = "junk/garbled.bin";
/// Relative path of the ZIP archive.
pub const ARCHIVE_PATH: &str = "archive/bundle.zip";

/// Ground truth for an HTML document's structure, counted at generation
/// time: heading tags (`h1`–`h6`), table rows (`tr`), and emphasis spans
/// (`em` + `strong`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HtmlStructure {
    pub headings: usize,
    pub table_rows: usize,
    pub emphasis_spans: usize,
}

/// One generated document: where it lives relative to the corpus root,
/// its bytes, and — for HTML — its structural ground truth.
#[derive(Debug, Clone)]
pub struct FixtureDoc {
    pub relative_path: String,
    pub bytes: Vec<u8>,
    pub structure: Option<HtmlStructure>,
}

// ---------------------------------------------------------------------------
// Word pool and text generation
// ---------------------------------------------------------------------------

/// High-frequency function words, in rough frequency-rank order. These
/// head the pool so Zipf sampling gives them the lion's share, which is
/// what keeps generated text statistically close to real English.
const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "a", "is", "that", "for", "it", "as", "was", "with", "be",
    "by", "on", "not", "this", "are", "or", "from", "at", "which", "but", "have", "an", "had",
    "they", "you", "were", "their", "one", "all", "we", "can", "has", "there", "been", "if",
    "more", "when", "will", "would", "who", "so", "no", "out", "up", "into", "such", "may",
    "shall", "any", "each", "other", "than", "then", "its", "also", "some", "these", "under",
    "between", "after", "before", "during", "within", "upon", "about", "against", "above",
    "below", "over", "through", "because", "where", "while", "both", "must", "should", "could",
];

/// Content vocabulary: the base nouns and verbs sentences are built
/// from, plus the stems suffix derivation expands.
const CONTENT_WORDS: &[&str] = &[
    "court", "filing", "statute", "agency", "revenue", "contract", "section", "opinion",
    "order", "motion", "record", "evidence", "appeal", "judge", "party", "claim", "rule",
    "notice", "hearing", "tax", "report", "federal", "state", "public", "law", "code", "title",
    "act", "amendment", "regulation", "commission", "board", "office", "department", "register",
    "document", "page", "exhibit", "schedule", "form", "item", "disclosure", "statement",
    "quarter", "fiscal", "year", "income", "asset", "liability", "equity", "share", "stock",
    "market", "price", "rate", "interest", "fund", "capital", "cash", "balance", "period",
    "total", "net", "gross", "annual", "general", "special", "final", "initial", "present",
    "certain", "material", "require", "provide", "include", "contain", "describe", "establish",
    "determine", "consider", "propose", "approve", "submit", "issue", "file", "grant", "deny",
    "review", "amend", "adopt", "publish", "receive", "pursuant", "respect", "matter", "case",
    "question", "decision", "judgment", "proceeding", "action", "defendant", "plaintiff",
    "witness", "counsel", "member", "officer", "director", "holder", "person", "company",
    "corporation", "partnership", "trust", "entity", "business", "operation", "transaction",
    "agreement", "provision", "term", "condition", "obligation", "right", "power", "duty",
    "authority", "jurisdiction", "district", "circuit", "supreme", "appellate",
];

const SUFFIXES: &[&str] = &["s", "ed", "ing", "ment", "tion", "al", "ly", "er", "ers", "able"];

/// Words the sampler draws from, in frequency-rank order. Function words
/// first, then content words, then derived forms, deduplicated — about
/// 1,400 distinct entries.
pub fn word_pool() -> Vec<String> {
    let mut pool: Vec<String> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for word in FUNCTION_WORDS.iter().chain(CONTENT_WORDS.iter()) {
        if seen.insert(word.to_string()) {
            pool.push(word.to_string());
        }
    }
    for suffix in SUFFIXES {
        for base in CONTENT_WORDS {
            let derived = format!("{base}{suffix}");
            if seen.insert(derived.clone()) {
                pool.push(derived);
            }
        }
    }
    pool
}

/// Zipf-weighted word sampler over [`word_pool`].
struct WordSampler {
    pool: Vec<String>,
    cumulative: Vec<f64>,
}

impl WordSampler {
    fn new() -> Self {
        let pool = word_pool();
        let mut cumulative = Vec::with_capacity(pool.len());
        let mut total = 0.0;
        for rank in 0..pool.len() {
            total += 1.0 / (rank as f64 + 1.0);
            cumulative.push(total);
        }
        WordSampler { pool, cumulative }
    }

    fn word(&self, rng: &mut ChaCha8Rng) -> &str {
        let total = *self.cumulative.last().expect("pool is never empty");
        let x: f64 = rng.r#gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c < x);
        &self.pool[idx.min(self.pool.len() - 1)]
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Appends one sentence (`words` long) to `out`.
fn push_sentence(out: &mut String, sampler: &WordSampler, rng: &mut ChaCha8Rng, words: usize) {
    for i in 0..words {
        if i == 0 {
            out.push_str(&capitalize(sampler.word(rng)));
        } else {
            out.push(' ');
            // A sprinkle of numbers keeps digit-sensitive metrics honest.
            if rng.gen_range(0..24) == 0 {
                out.push_str(&format!("{}", rng.gen_range(1..2026)));
            } else {
                out.push_str(sampler.word(rng));
            }
        }
        if words > 7 && i == words / 2 {
            out.push(',');
        }
    }
    out.push('.');
}

/// Generates paragraphs of English-like prose totalling at least
/// `min_words` whitespace-separated words, deterministically for a given
/// `seed`.
pub fn prose(seed: u64, min_words: usize) -> String {
    let sampler = WordSampler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let mut emitted = 0;
    while emitted < min_words {
        let sentences = rng.gen_range(3..8);
        for s in 0..sentences {
            if s > 0 {
                out.push(' ');
            }
            let words = rng.gen_range(6..18);
            push_sentence(&mut out, &sampler, &mut rng, words);
            emitted += words;
        }
        out.push_str("\n\n");
    }
    let trimmed = out.trim_end().to_string();
    trimmed + "\n"
}

/// A fixed English-like sample with at least `min_words` words; the same
/// text every call. Its word-frequency distribution follows a Zipf law
/// over ~1,400 types, so unigram entropy sits where natural English does.
pub fn english_sample(min_words: usize) -> String {
    prose(0x5EED_0001, min_words)
}

// ---------------------------------------------------------------------------
// Single-format builders
// ---------------------------------------------------------------------------

/// Builds a complete one-page PDF whose text layer holds `lines`.
pub fn minimal_text_pdf(lines: &[&str]) -> Vec<u8> {
    use lopdf::content::{Content, Operation};
    use lopdf::{dictionary, Document, Object, Stream};

    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let font_id = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Courier",
    });
    let resources_id = doc.add_object(dictionary! {
        "Font" => dictionary! { "F1" => font_id },
    });
    let mut operations = vec![
        Operation::new("BT", vec![]),
        Operation::new("Tf", vec!["F1".into(), 12.into()]),
        Operation::new("TL", vec![14.into()]),
        Operation::new("Td", vec![72.into(), 720.into()]),
    ];
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            operations.push(Operation::new("T*", vec![]));
        }
        operations.push(Operation::new("Tj", vec![Object::string_literal(*line)]));
    }
    operations.push(Operation::new("ET", vec![]));
    let content = Content { operations };
    let content_id = doc.add_object(Stream::new(
        dictionary! {},
        content.encode().expect("fixture content encodes"),
    ));
    let page_id = doc.add_object(dictionary! {
        "Type" => "Page",
        "Parent" => pages_id,
        "Contents" => content_id,
    });
    let pages = dictionary! {
        "Type" => "Pages",
        "Kids" => vec![page_id.into()],
        "Count" => 1,
        "Resources" => resources_id,
        "MediaBox" => vec![0.into(), 0.into(), 595.into(), 842.into()],
    };
    doc.objects.insert(pages_id, Object::Dictionary(pages));
    let catalog_id = doc.add_object(dictionary! {
        "Type" => "Catalog",
        "Pages" => pages_id,
    });
    doc.trailer.set("Root", catalog_id);
    let mut out = Vec::new();
    doc.save_to(&mut out).expect("fixture pdf serializes");
    out
}

/// Builds an in-memory ZIP with the given (name, bytes) members.
pub fn zip_archive(members: &[(&str, &[u8])]) -> Vec<u8> {
    let mut writer = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let options = zip::write::SimpleFileOptions::default();
    for (name, bytes) in members {
        writer.start_file(*name, options).expect("fixture zip member");
        writer.write_all(bytes).expect("fixture zip member body");
    }
    writer
        .finish()
        .expect("fixture zip finalizes")
        .into_inner()
}

/// One HTML page with exactly `headings` heading tags, `table_rows`
/// table rows (0 = no table), and `emphasis` em/strong spans.
pub fn html_page(seed: u64, headings: usize, table_rows: usize, emphasis: usize) -> String {
    assert!(headings >= 1, "a page needs a title heading");
    let sampler = WordSampler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut title_words: Vec<String> = Vec::new();
    for _ in 0..rng.gen_range(3..6) {
        title_words.push(capitalize(sampler.word(&mut rng)));
    }
    let title = title_words.join(" ");

    let mut body = String::new();
    body.push_str(&format!("<h1>{title}</h1>\n"));
    let paragraph = |body: &mut String, rng: &mut ChaCha8Rng| {
        body.push_str("<p>");
        let mut text = String::new();
        for s in 0..rng.gen_range(2..5) {
            if s > 0 {
                text.push(' ');
            }
            let words = rng.gen_range(8..16);
            push_sentence(&mut text, &sampler, rng, words);
        }
        body.push_str(&text);
        body.push_str("</p>\n");
    };
    paragraph(&mut body, &mut rng);

    for level in 0..headings - 1 {
        let tag = if level % 2 == 0 { "h2" } else { "h3" };
        let mut words: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(2..5) {
            words.push(capitalize(sampler.word(&mut rng)));
        }
        body.push_str(&format!("<{tag}>{}</{tag}>\n", words.join(" ")));
        paragraph(&mut body, &mut rng);
    }

    if table_rows > 0 {
        body.push_str("<table>\n<tr><th>Item</th><th>Amount</th><th>Status</th></tr>\n");
        for _ in 0..table_rows - 1 {
            body.push_str(&format!(
                "<tr><td>{}</td><td>{}</td><td>{}</td></tr>\n",
                capitalize(sampler.word(&mut rng)),
                rng.gen_range(10..100_000),
                sampler.word(&mut rng),
            ));
        }
        body.push_str("</table>\n");
    }

    if emphasis > 0 {
        body.push_str("<p>");
        let mut text = String::new();
        for span in 0..emphasis {
            if span > 0 {
                text.push_str(", ");
            }
            let tag = if span % 2 == 0 { "em" } else { "strong" };
            text.push_str(&format!(
                "the {} <{tag}>{} {}</{tag}>",
                sampler.word(&mut rng),
                sampler.word(&mut rng),
                sampler.word(&mut rng),
            ));
        }
        text.push('.');
        body.push_str(&text);
        body.push_str("</p>\n");
    }

    format!(
        "<!DOCTYPE html>\n<html>\n<head><title>{title}</title></head>\n<body>\n{body}</body>\n</html>\n"
    )
}

/// One Markdown document: title, sections, a list.
fn markdown_doc(seed: u64) -> String {
    let sampler = WordSampler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let words = |rng: &mut ChaCha8Rng, n: usize, cap: bool| -> String {
        let mut parts: Vec<String> = Vec::new();
        for _ in 0..n {
            let w = sampler.word(rng).to_string();
            parts.push(if cap { capitalize(&w) } else { w });
        }
        parts.join(" ")
    };
    out.push_str(&format!("# {}\n\n", words(&mut rng, 4, true)));
    for _ in 0..rng.gen_range(2..4) {
        out.push_str(&format!("## {}\n\n", words(&mut rng, 3, true)));
        let mut text = String::new();
        for s in 0..rng.gen_range(2..5) {
            if s > 0 {
                text.push(' ');
            }
            let words = rng.gen_range(7..15);
            push_sentence(&mut text, &sampler, &mut rng, words);
        }
        out.push_str(&text);
        out.push_str("\n\n");
    }
    out.push_str("Key points:\n\n");
    for _ in 0..rng.gen_range(3..6) {
        out.push_str(&format!("- {}\n", words(&mut rng, 5, false)));
    }
    out
}

/// A JSON data file: an object with a few records built from the pool.
fn json_doc(seed: u64) -> String {
    let sampler = WordSampler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for i in 0..rng.gen_range(3..7) {
        records.push(serde_json::json!({
            "id": i,
            "name": sampler.word(&mut rng),
            "amount": rng.gen_range(100..1_000_000),
            "note": format!(
                "{} {} {}",
                sampler.word(&mut rng),
                sampler.word(&mut rng),
                sampler.word(&mut rng)
            ),
        }));
    }
    let value = serde_json::json!({ "version": 1, "records": records });
    serde_json::to_string_pretty(&value).expect("fixture json serializes") + "\n"
}

/// An XML feed with a handful of entries.
fn xml_doc(seed: u64) -> String {
    let sampler = WordSampler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<feed>\n");
    for i in 0..rng.gen_range(3..6) {
        out.push_str(&format!(
            "  <entry id=\"{i}\">\n    <title>{}</title>\n    <body>{}</body>\n  </entry>\n",
            capitalize(sampler.word(&mut rng)),
            {
                let words = rng.gen_range(8..14);
                let mut text = String::new();
                push_sentence(&mut text, &sampler, &mut rng, words);
                text
            }
        ));
    }
    out.push_str("</feed>\n");
    out
}

/// Printable garbage: decodes cleanly as UTF-8 text (so extraction
/// succeeds) but has no whitespace structure and near-uniform characters
/// (so quality scoring rejects it).
fn garbled_doc(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        if i > 0 && i % 400 == 0 {
            out.push(b'\n');
        } else {
            // Printable ASCII, excluding space.
            out.push(rng.gen_range(0x21..0x7Fu8));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// The standard corpus
// ---------------------------------------------------------------------------

/// Builds the fifty-document corpus. Deterministic: every call returns
/// byte-identical documents in the same order.
pub fn corpus() -> Vec<FixtureDoc> {
    let mut docs = Vec::with_capacity(CORPUS_SIZE);

    for i in 0..20usize {
        let headings = 1 + i % 4;
        let table_rows = i % 6;
        let emphasis = i % 5;
        let html = html_page(0xD0C_0000 + i as u64, headings, table_rows, emphasis);
        docs.push(FixtureDoc {
            relative_path: format!("html/page-{i:02}.html"),
            bytes: html.into_bytes(),
            structure: Some(HtmlStructure {
                headings,
                table_rows,
                emphasis_spans: emphasis,
            }),
        });
    }

    for i in 0..15usize {
        let text = prose(0x7E87_0000 + i as u64, 150 + i * 120);
        docs.push(FixtureDoc {
            relative_path: format!("text/note-{i:02}.txt"),
            bytes: text.into_bytes(),
            structure: None,
        });
    }

    for i in 0..8usize {
        docs.push(FixtureDoc {
            relative_path: format!("md/doc-{i:02}.md"),
            bytes: markdown_doc(0x3A9D_0000 + i as u64).into_bytes(),
            structure: None,
        });
    }

    for i in 0..2usize {
        docs.push(FixtureDoc {
            relative_path: format!("data/record-{i}.json"),
            bytes: json_doc(0x150F_0000 + i as u64).into_bytes(),
            structure: None,
        });
    }

    for i in 0..2usize {
        docs.push(FixtureDoc {
            relative_path: format!("data/feed-{i}.xml"),
            bytes: xml_doc(0xFEED_0000 + i as u64).into_bytes(),
            structure: None,
        });
    }

    docs.push(FixtureDoc {
        relative_path: "pdf/report.pdf".to_string(),
        bytes: minimal_text_pdf(&[
            "Annual report of the commission.",
            "Revenue for the period rose twelve percent.",
            "The board approved the final order in open session.",
            "Further detail appears in the attached schedules.",
            "Counsel reviewed each provision before adoption.",
            "The filing was submitted to the register on time.",
        ]),
        structure: None,
    });

    let members: Vec<(String, Vec<u8>)> = (0..ZIP_MEMBER_COUNT)
        .map(|i| {
            (
                format!("member-{i}.txt"),
                prose(0x21B_0000 + i as u64, 80 + i * 40).into_bytes(),
            )
        })
        .collect();
    let member_refs: Vec<(&str, &[u8])> = members
        .iter()
        .map(|(name, bytes)| (name.as_str(), bytes.as_slice()))
        .collect();
    docs.push(FixtureDoc {
        relative_path: ARCHIVE_PATH.to_string(),
        bytes: zip_archive(&member_refs),
        structure: None,
    });

    docs.push(FixtureDoc {
        relative_path: GARBLED_PATH.to_string(),
        bytes: garbled_doc(0xBAD_0001, 2048),
        structure: None,
    });

    debug_assert_eq!(docs.len(), CORPUS_SIZE);
    docs
}

// ---------------------------------------------------------------------------
// Disk layout
// ---------------------------------------------------------------------------

/// Writes the corpus under `dir`, creating parent directories. Returns
/// the number of files written.
pub fn write_corpus(dir: &Path) -> std::io::Result<usize> {
    let docs = corpus();
    for doc in &docs {
        let path = dir.join(&doc.relative_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, &doc.bytes)?;
    }
    Ok(docs.len())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
