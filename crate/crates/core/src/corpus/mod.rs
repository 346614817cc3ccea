//! Documents, sentences and corpus-level tooling.

mod segment;
mod split;
mod stats;
mod tokenize;
mod vocab;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zone::Zone;

pub use segment::{abbreviations, segment_sentences, SEGMENTER_VERSION};
pub use split::{split_corpus, DatasetSplit, SplitConfig};
pub use stats::{corpus_stats, SourceStats, StatsReport, ZoneCount};
pub use tokenize::{tokenize, TOKENIZER_VERSION};
pub use vocab::{build_vocabulary, Vocabulary, PAD_INDEX, UNK_INDEX};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("document {doc_id:?}, sentence {sentence_idx}: unknown label {code:?}")]
    Label {
        doc_id: String,
        sentence_idx: usize,
        code: String,
    },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?}: sentence texts do not match the document text")]
    TextMismatch(String),
    #[error("unknown document id {0:?}")]
    UnknownDocument(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("{} unlabeled sentence(s), first: {}", .0.len(), fmt_offenders(.0))]
    UnlabeledSentences(Vec<(String, usize)>),
    #[error("no tokens survive vocabulary filtering")]
    EmptyVocabulary,
}

fn fmt_offenders(offenders: &[(String, usize)]) -> String {
    offenders
        .iter()
        .take(5)
        .map(|(d, i)| format!("{d}#{i}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub gold: Option<Zone>,
}

impl Sentence {
    pub fn new(index: usize, text: impl Into<String>, gold: Option<Zone>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Sentence {
            index,
            text,
            tokens,
            gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obituary {
    pub id: String,
    pub source: String,
    pub raw_text: String,
    pub sentences: Vec<Sentence>,
}

impl Obituary {
    /// Segment and tokenize an unlabeled document.
    pub fn from_text(
        id: impl Into<String>,
        source: impl Into<String>,
        raw_text: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let raw_text = raw_text.into();
        let sentences = segment_sentences(&raw_text)?
            .into_iter()
            .enumerate()
            .map(|(i, s)| Sentence::new(i, s, None))
            .collect();
        Ok(Obituary {
            id: id.into(),
            source: source.into(),
            raw_text,
            sentences,
        })
    }

    /// Build a document from pre-segmented sentences. When `raw_text` is
    /// `None` it is the sentences joined by single spaces.
    pub fn from_sentences<S: Into<String>>(
        id: impl Into<String>,
        source: impl Into<String>,
        raw_text: Option<String>,
        sentences: impl IntoIterator<Item = (S, Option<Zone>)>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let sentences: Vec<Sentence> = sentences
            .into_iter()
            .enumerate()
            .map(|(i, (t, z))| Sentence::new(i, t.into().trim(), z))
            .collect();
        if sentences.is_empty() || sentences.iter().any(|s| s.text.is_empty()) {
            return Err(CorpusError::EmptyDocument);
        }
        let joined = sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
        let raw_text = match raw_text {
            Some(raw) if !raw.trim().is_empty() => {
                if strip_whitespace(&raw) != strip_whitespace(&joined) {
                    return Err(CorpusError::TextMismatch(id));
                }
                raw
            }
            _ => joined,
        };
        Ok(Obituary {
            id,
            source: source.into(),
            raw_text,
            sentences,
        })
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.sentences.iter().all(|s| s.gold.is_some())
    }

    pub fn golds(&self) -> Option<Vec<Zone>> {
        self.sentences.iter().map(|s| s.gold).collect()
    }
}

fn strip_whitespace(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    obituaries: Vec<Obituary>,
}

impl Corpus {
    pub fn new(obituaries: Vec<Obituary>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for o in &obituaries {
            if !seen.insert(o.id.as_str()) {
                return Err(CorpusError::DuplicateId(o.id.clone()));
            }
        }
        Ok(Corpus { obituaries })
    }

    pub fn obituaries(&self) -> &[Obituary] {
        &self.obituaries
    }

    pub fn len(&self) -> usize {
        self.obituaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obituaries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Obituary> {
        self.obituaries.iter().find(|o| o.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.obituaries.iter().map(|o| o.id.as_str()).collect()
    }

    pub fn sentence_count(&self) -> usize {
        self.obituaries.iter().map(|o| o.sentences.len()).sum()
    }

    /// The documents with the given ids, in the order of `ids`.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Corpus, CorpusError> {
        let docs = ids
            .iter()
            .map(|id| {
                self.get(id.as_ref())
                    .cloned()
                    .ok_or_else(|| CorpusError::UnknownDocument(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Corpus::new(docs)
    }

    /// Every unlabeled sentence as (doc id, sentence index).
    pub fn unlabeled(&self) -> Vec<(String, usize)> {
        self.obituaries
            .iter()
            .flat_map(|o| {
                o.sentences
                    .iter()
                    .filter(|s| s.gold.is_none())
                    .map(move |s| (o.id.clone(), s.index))
            })
            .collect()
    }

    pub fn require_labeled(&self) -> Result<(), CorpusError> {
        let offenders = self.unlabeled();
        if offenders.is_empty() {
            Ok(())
        } else {
            Err(CorpusError::UnlabeledSentences(offenders))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line.
    Jsonl,
    /// A directory of `.txt` files, one document each, all tagged with `source`.
    TextDir { source: String },
}

#[derive(Debug, Deserialize)]
struct SentenceRecordIn {
    text: String,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
struct DocumentRecordIn {
    id: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    sentences: Option<Vec<SentenceRecordIn>>,
}

#[derive(Debug, Serialize)]
struct SentenceRecordOut<'a> {
    text: &'a str,
    label: Option<Zone>,
}

#[derive(Debug, Serialize)]
struct DocumentRecordOut<'a> {
    id: &'a str,
    source: &'a str,
    text: &'a str,
    sentences: Vec<SentenceRecordOut<'a>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parse one JSONL corpus record. `line` is 1-based and only used in errors.
pub fn parse_document_line(json: &str, line: usize) -> Result<Obituary, CorpusError> {
    let rec: DocumentRecordIn = serde_json::from_str(json).map_err(|e| CorpusError::Parse {
        line,
        message: e.to_string(),
    })?;
    match rec.sentences {
        Some(sentences) => {
            let mut labeled = Vec::with_capacity(sentences.len());
            for (i, s) in sentences.into_iter().enumerate() {
                let gold = match s.label {
                    None => None,
                    Some(code) => Some(Zone::from_code(&code).map_err(|_| CorpusError::Label {
                        doc_id: rec.id.clone(),
                        sentence_idx: i,
                        code,
                    })?),
                };
                if s.text.trim().is_empty() {
                    return Err(CorpusError::Parse {
                        line,
                        message: format!("document {:?}: sentence {i} is empty", rec.id),
                    });
                }
                labeled.push((s.text, gold));
            }
            Obituary::from_sentences(rec.id, rec.source, rec.text, labeled)
        }
        None => {
            let text = rec.text.unwrap_or_default();
            Obituary::from_text(rec.id, rec.source, text)
        }
    }
}

pub fn read_jsonl(reader: impl BufRead) -> Result<Corpus, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(parse_document_line(&line, i + 1)?);
    }
    Corpus::new(docs)
}

pub fn load_corpus(path: &Path, format: &CorpusFormat) -> Result<Corpus, CorpusError> {
    match format {
        CorpusFormat::Jsonl => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            read_jsonl(BufReader::new(file))
        }
        CorpusFormat::TextDir { source } => {
            let mut files = Vec::new();
            for entry in fs::read_dir(path).map_err(io_err(path))? {
                let p = entry.map_err(io_err(path))?.path();
                if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
                    files.push(p);
                }
            }
            files.sort();
            let mut docs = Vec::with_capacity(files.len());
            for p in files {
                let text = fs::read_to_string(&p).map_err(io_err(&p))?;
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                docs.push(Obituary::from_text(id, source.clone(), text)?);
            }
            Corpus::new(docs)
        }
    }
}

/// Serialize one document as a corpus JSONL line (without the newline).
pub fn document_to_json(doc: &Obituary) -> String {
    let rec = DocumentRecordOut {
        id: &doc.id,
        source: &doc.source,
        text: &doc.raw_text,
        sentences: doc
            .sentences
            .iter()
            .map(|s| SentenceRecordOut {
                text: &s.text,
                label: s.gold,
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("corpus records always serialize")
}

pub fn write_jsonl(corpus: &Corpus, mut out: impl Write) -> std::io::Result<()> {
    for doc in corpus.obituaries() {
        writeln!(out, "{}", document_to_json(doc))?;
    }
    Ok(())
}
