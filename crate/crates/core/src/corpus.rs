//! Document ingestion: deterministic tokenization, overlapping chunk
//! splitting, and rule-based sentence segmentation.
//!
//! Token positions are 1-based inclusive throughout, so a chunk covering
//! tokens `s..=e` satisfies `s = (i-1)*(max_len-overlap) + 1` and
//! `e = min(s + max_len - 1, L)` for a document of `L` tokens. Chunk
//! generation stops at the first chunk whose end reaches `L`, which
//! prevents a trailing chunk fully contained in its predecessor.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced while building or loading a corpus.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid chunking config: overlap {overlap} must be < max_len {max_len}")]
    InvalidChunking { max_len: usize, overlap: usize },
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("corpus line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A source document with its deterministic token count.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
    /// Number of whitespace tokens in `text`.
    pub token_count: usize,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let token_count = tokenize(&text).len();
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            text,
            token_count,
        }
    }
}

/// A contiguous token span of a document. `start`/`end` are 1-based
/// inclusive token positions; `text` is the original substring covering
/// those tokens, so detokenization is exact.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    /// 1-based chunk index within the document.
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Chunk {
    pub fn token_len(&self) -> usize {
        self.end - self.start + 1
    }
}

/// One sentence of a chunk, `ordinal` counted from 1.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Sentence {
    pub chunk_id: String,
    pub ordinal: usize,
    pub text: String,
}

/// Whitespace word segmentation. Deterministic and locale-independent:
/// splits on Unicode whitespace, nothing else.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Byte ranges of each token in `text`, in order.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Split a document into overlapping chunks of at most `max_len` tokens.
pub fn split_document(
    doc: &Document,
    max_len: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, CorpusError> {
    if max_len == 0 || overlap >= max_len {
        return Err(CorpusError::InvalidChunking { max_len, overlap });
    }
    let spans = token_spans(&doc.text);
    let total = spans.len();
    let mut chunks = Vec::new();
    if total == 0 {
        return Ok(chunks);
    }
    let stride = max_len - overlap;
    let mut index = 1usize;
    loop {
        let start = (index - 1) * stride + 1;
        if start > total {
            break;
        }
        let end = (start + max_len - 1).min(total);
        let byte_start = spans[start - 1].0;
        let byte_end = spans[end - 1].1;
        chunks.push(Chunk {
            chunk_id: format!("{}#{}", doc.doc_id, index),
            doc_id: doc.doc_id.clone(),
            index,
            start,
            end,
            text: doc.text[byte_start..byte_end].to_string(),
        });
        if end == total {
            break;
        }
        index += 1;
    }
    Ok(chunks)
}

/// Default abbreviation guard for the sentence splitter. Entries are
/// compared case-insensitively against the whitespace token ending in the
/// period under inspection.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "vs.", "etc.", "e.g.", "i.e.", "jr.", "sr.",
    "no.", "fig.", "al.",
];

/// Rule-based sentence segmentation: terminal punctuation (`.`, `!`, `?`)
/// followed by whitespace ends a sentence unless the word is on the
/// abbreviation guard list.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: BTreeSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self {
            abbreviations: DEFAULT_ABBREVIATIONS
                .iter()
                .map(|a| a.to_string())
                .collect(),
        }
    }
}

impl SentenceSplitter {
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.into().to_lowercase())
                .collect(),
        }
    }

    /// Segment raw text into trimmed sentence strings.
    pub fn split_text(&self, text: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut sentences = Vec::new();
        let mut seg_start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (pos, ch) = chars[i];
            if ch == '.' || ch == '!' || ch == '?' {
                // Consume a run of terminators plus trailing closers.
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                    j += 1;
                }
                while j < chars.len() && matches!(chars[j].1, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
                {
                    j += 1;
                }
                let at_end = j >= chars.len();
                let followed_by_ws = !at_end && chars[j].1.is_whitespace();
                if (at_end || followed_by_ws) && !self.is_guarded(text, ch, pos, &chars, i) {
                    let end_byte = if at_end { text.len() } else { chars[j].0 };
                    let sentence = text[seg_start..end_byte].trim();
                    if !sentence.is_empty() {
                        sentences.push(sentence.to_string());
                    }
                    seg_start = end_byte;
                }
                i = j;
            } else {
                i += 1;
            }
        }
        let tail = text[seg_start..].trim();
        if !tail.is_empty() {
            sentences.push(tail.to_string());
        }
        sentences
    }

    /// Segment a chunk, assigning consecutive ordinals from 1.
    pub fn split(&self, chunk: &Chunk) -> Vec<Sentence> {
        self.split_text(&chunk.text)
            .into_iter()
            .enumerate()
            .map(|(i, text)| Sentence {
                chunk_id: chunk.chunk_id.clone(),
                ordinal: i + 1,
                text,
            })
            .collect()
    }

    // The guard applies to '.' only: look back to the start of the
    // whitespace token ending at this period and check the list.
    fn is_guarded(
        &self,
        text: &str,
        terminator: char,
        pos: usize,
        chars: &[(usize, char)],
        idx: usize,
    ) -> bool {
        if terminator != '.' {
            return false;
        }
        let mut k = idx;
        while k > 0 && !chars[k - 1].1.is_whitespace() {
            k -= 1;
        }
        let word_start = chars[k].0;
        let word = &text[word_start..pos + '.'.len_utf8()];
        self.abbreviations.contains(&word.to_lowercase())
    }
}

/// Split one chunk into sentences with the default abbreviation guard.
pub fn split_sentences(chunk: &Chunk) -> Vec<Sentence> {
    SentenceSplitter::default().split(chunk)
}

/// A chunked corpus: documents plus their chunks, indexed by chunk id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    chunks: Vec<Chunk>,
    by_id: BTreeMap<String, usize>,
    titles: BTreeMap<String, String>,
}

impl Corpus {
    pub fn build(
        documents: Vec<Document>,
        max_len: usize,
        overlap: usize,
    ) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for doc in documents {
            if corpus.titles.contains_key(&doc.doc_id) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id));
            }
            for chunk in split_document(&doc, max_len, overlap)? {
                corpus.by_id.insert(chunk.chunk_id.clone(), corpus.chunks.len());
                corpus.chunks.push(chunk);
            }
            corpus.titles.insert(doc.doc_id.clone(), doc.title.clone());
            corpus.documents.push(doc);
        }
        Ok(corpus)
    }

    /// Build directly from pre-made chunks (synthetic corpora in tests).
    pub fn from_chunks(chunks: Vec<Chunk>) -> Self {
        let mut corpus = Corpus::default();
        for chunk in chunks {
            corpus.by_id.insert(chunk.chunk_id.clone(), corpus.chunks.len());
            corpus.chunks.push(chunk);
        }
        corpus
    }

    /// Read JSON Lines of `{"id", "title", "text"}` and chunk every document.
    pub fn from_jsonl(
        reader: impl BufRead,
        max_len: usize,
        overlap: usize,
    ) -> Result<Self, CorpusError> {
        #[derive(Deserialize)]
        struct Line {
            id: String,
            #[serde(default)]
            title: String,
            text: String,
        }
        let mut documents = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
                    line: i + 1,
                    source,
                })?;
            documents.push(Document::new(parsed.id, parsed.title, parsed.text));
        }
        Self::build(documents, max_len, overlap)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn title_of(&self, doc_id: &str) -> Option<&str> {
        self.titles.get(doc_id).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc_of_len(l: usize) -> Document {
        let text = (1..=l).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ");
        Document::new("d", "", text)
    }

    #[test]
    fn tokenize_empty_is_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_collapses_runs_of_whitespace() {
        assert_eq!(tokenize("a b  c"), vec!["a", "b", "c"]);
    }

    #[test]
    fn detokenized_range_is_substring_of_original() {
        let text = "alpha  beta\tgamma\ndelta";
        let spans = token_spans(text);
        for a in 0..spans.len() {
            for b in a..spans.len() {
                let slice = &text[spans[a].0..spans[b].1];
                assert!(text.contains(slice));
            }
        }
    }

    #[test]
    fn single_chunk_when_doc_fits() {
        let doc = doc_of_len(100);
        let chunks = split_document(&doc, 512, 64).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!((chunks[0].start, chunks[0].end), (1, 100));
    }

    #[test]
    fn three_chunks_for_l_1000() {
        let doc = doc_of_len(1000);
        let chunks = split_document(&doc, 512, 64).unwrap();
        let spans: Vec<(usize, usize)> = chunks.iter().map(|c| (c.start, c.end)).collect();
        assert_eq!(spans, vec![(1, 512), (449, 960), (897, 1000)]);
    }

    #[test]
    fn generation_stops_when_end_reaches_l() {
        let doc = doc_of_len(960);
        let chunks = split_document(&doc, 512, 64).unwrap();
        let spans: Vec<(usize, usize)> = chunks.iter().map(|c| (c.start, c.end)).collect();
        assert_eq!(spans, vec![(1, 512), (449, 960)]);
    }

    #[test]
    fn empty_document_yields_no_chunks() {
        let doc = Document::new("d", "", "");
        assert!(split_document(&doc, 512, 64).unwrap().is_empty());
    }

    #[test]
    fn overlap_ge_max_len_is_an_error() {
        let doc = doc_of_len(10);
        assert!(matches!(
            split_document(&doc, 64, 64),
            Err(CorpusError::InvalidChunking { .. })
        ));
    }

    #[test]
    fn chunk_text_is_exact_token_span() {
        let doc = Document::new("d", "", "a  b c   d e");
        let chunks = split_document(&doc, 3, 1).unwrap();
        assert_eq!(chunks[0].text, "a  b c");
        assert_eq!(chunks[1].text, "c   d e");
    }

    #[test]
    fn sentence_split_examples() {
        let chunk = Chunk {
            chunk_id: "c".into(),
            doc_id: "d".into(),
            index: 1,
            start: 1,
            end: 6,
            text: "A. B ran. C won.".into(),
        };
        let sents = split_sentences(&chunk);
        let texts: Vec<&str> = sents.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["A.", "B ran.", "C won."]);
        assert_eq!(sents.iter().map(|s| s.ordinal).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn punctuation_free_chunk_is_single_sentence() {
        let chunk = Chunk {
            chunk_id: "c".into(),
            doc_id: "d".into(),
            index: 1,
            start: 1,
            end: 3,
            text: "no punctuation here".into(),
        };
        let sents = split_sentences(&chunk);
        assert_eq!(sents.len(), 1);
        assert_eq!(sents[0].text, "no punctuation here");
    }

    #[test]
    fn abbreviation_guard_suppresses_split() {
        let splitter = SentenceSplitter::default();
        let sents = splitter.split_text("We saw e.g. apples. Then pears.");
        assert_eq!(sents, vec!["We saw e.g. apples.", "Then pears."]);
        let sents = splitter.split_text("Dr. Smith arrived. He sat down.");
        assert_eq!(sents, vec!["Dr. Smith arrived.", "He sat down."]);
    }

    #[test]
    fn question_and_exclamation_terminate() {
        let splitter = SentenceSplitter::default();
        let sents = splitter.split_text("Really? Yes! \"Done.\" Next");
        assert_eq!(sents, vec!["Really?", "Yes!", "\"Done.\"", "Next"]);
    }

    #[test]
    fn corpus_jsonl_round_trip() {
        let jsonl = r#"{"id":"a","title":"A","text":"one two three"}
{"id":"b","title":"B","text":"four five"}"#;
        let corpus = Corpus::from_jsonl(jsonl.as_bytes(), 512, 64).unwrap();
        assert_eq!(corpus.documents().len(), 2);
        assert_eq!(corpus.chunks().len(), 2);
        assert_eq!(corpus.chunk("a#1").unwrap().text, "one two three");
        assert_eq!(corpus.title_of("b"), Some("B"));
    }

    #[test]
    fn corpus_rejects_duplicate_doc_ids() {
        let docs = vec![Document::new("a", "", "x"), Document::new("a", "", "y")];
        assert!(matches!(
            Corpus::build(docs, 512, 64),
            Err(CorpusError::DuplicateDocId(_))
        ));
    }

    #[test]
    fn malformed_corpus_line_reports_line_number() {
        let jsonl = "{\"id\":\"a\",\"title\":\"\",\"text\":\"x\"}\nnot json";
        match Corpus::from_jsonl(jsonl.as_bytes(), 512, 64) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn chunking_invariants(l in 0usize..1200, max_len in 1usize..200, overlap_frac in 0.0f64..1.0) {
            let overlap = ((max_len as f64) * overlap_frac) as usize;
            prop_assume!(overlap < max_len);
            let doc = doc_of_len(l);
            let chunks = split_document(&doc, max_len, overlap).unwrap();

            if l == 0 {
                prop_assert!(chunks.is_empty());
                return Ok(());
            }
            // formulas, stride, coverage, termination
            let stride = max_len - overlap;
            let mut covered = vec![false; l + 1];
            for (k, c) in chunks.iter().enumerate() {
                prop_assert_eq!(c.start, k * stride + 1);
                prop_assert_eq!(c.end, (c.start + max_len - 1).min(l));
                prop_assert!(c.token_len() <= max_len);
                covered[c.start..=c.end].fill(true);
                if k + 1 < chunks.len() {
                    prop_assert_eq!(chunks[k + 1].start - c.start, stride);
                    prop_assert!(c.end < l);
                    // full-length chunk overlaps its successor by exactly `overlap`
                    if c.end == c.start + max_len - 1 {
                        let next_start = chunks[k + 1].start;
                        let shared = if next_start <= c.end { c.end - next_start + 1 } else { 0 };
                        prop_assert_eq!(shared, overlap);
                    }
                }
            }
            prop_assert!(covered[1..=l].iter().all(|&x| x));
            prop_assert_eq!(chunks.last().unwrap().end, l);
            // purity
            let again = split_document(&doc, max_len, overlap).unwrap();
            prop_assert_eq!(chunks, again);
        }

        #[test]
        fn sentence_concat_reproduces_chunk(text in "[A-Za-z .!?]{0,200}") {
            let splitter = SentenceSplitter::default();
            let sents = splitter.split_text(&text);
            let joined = sents.join(" ");
            let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
            prop_assert_eq!(norm(&joined), norm(&text));
        }
    }
}
