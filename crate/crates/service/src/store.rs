//! Append-only annotation log with an in-memory index of live records.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use thiserror::Error;
use zoner_core::agreement::AnnotationRecord;
use zoner_core::Zone;

/// (doc_id, sentence_idx, annotator)
pub type RecordKey = (String, usize, String);

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("stale revision {submitted}; current revision is {}", current.as_ref().map_or(0, |r| r.rev))]
    Conflict {
        submitted: u64,
        current: Option<Box<AnnotationRecord>>,
    },
    #[error("annotator name must not be empty")]
    NoAnnotator,
}

/// The log file plus the fold of its lines: the highest revision per key.
#[derive(Debug)]
pub struct AnnotationStore {
    path: PathBuf,
    file: File,
    index: BTreeMap<RecordKey, AnnotationRecord>,
    appended: usize,
}

impl AnnotationStore {
    /// Open or create the log at `path` and replay it. A final line without
    /// a newline that does not parse is a torn write and is cut off the file.
    /// Any other malformed line is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        let mut index = BTreeMap::new();
        let mut reader = BufReader::new(&file);
        let mut good_len = 0u64;
        let mut line_no = 0;
        let mut appended = 0;
        let mut buf = String::new();
        let mut newline_missing = false;
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf).map_err(io_err)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let complete = buf.ends_with('\n');
            if buf.trim().is_empty() {
                good_len += n as u64;
                continue;
            }
            match (serde_json::from_str::<AnnotationRecord>(buf.trim_end()), complete) {
                (Ok(r), _) => {
                    good_len += n as u64;
                    appended += 1;
                    fold(&mut index, r);
                    newline_missing = !complete;
                }
                (Err(_), false) => {
                    log::warn!("{}: dropping torn final line {line_no}", path.display());
                    break;
                }
                (Err(e), true) => {
                    return Err(StoreError::Parse {
                        path,
                        line: line_no,
                        message: e.to_string(),
                    })
                }
            }
        }
        drop(reader);
        if file.metadata().map_err(io_err)?.len() != good_len {
            file.set_len(good_len).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err)?;
        if newline_missing {
            file.write_all(b"\n").map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        Ok(AnnotationStore {
            path,
            file,
            index,
            appended,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of records in the log, superseded revisions included.
    pub fn log_len(&self) -> usize {
        self.appended
    }

    pub fn get(&self, doc_id: &str, sentence_idx: usize, annotator: &str) -> Option<&AnnotationRecord> {
        self.index
            .get(&(doc_id.to_string(), sentence_idx, annotator.to_string()))
    }

    /// Accept `label` iff `rev` is one more than the current revision
    /// (1 for a first label). The record is on disk before it is indexed.
    pub fn submit(
        &mut self,
        doc_id: &str,
        sentence_idx: usize,
        annotator: &str,
        label: Zone,
        rev: u64,
    ) -> Result<AnnotationRecord, StoreError> {
        if annotator.trim().is_empty() {
            return Err(StoreError::NoAnnotator);
        }
        let current = self.get(doc_id, sentence_idx, annotator);
        let expected = current.map_or(1, |r| r.rev + 1);
        if rev != expected {
            return Err(StoreError::Conflict {
                submitted: rev,
                current: current.cloned().map(Box::new),
            });
        }
        let record = AnnotationRecord {
            doc_id: doc_id.to_string(),
            sentence_idx,
            annotator: annotator.to_string(),
            label,
            rev,
            ts: Utc::now(),
        };
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        let io_err = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io_err)?;
        self.file.sync_data().map_err(io_err)?;
        self.appended += 1;
        fold(&mut self.index, record.clone());
        Ok(record)
    }

    /// Live records sorted by (doc_id, sentence_idx, annotator).
    pub fn records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.index.values()
    }

    pub fn index(&self) -> &BTreeMap<RecordKey, AnnotationRecord> {
        &self.index
    }

    /// Sentences of `doc_id` that `annotator` has labeled.
    pub fn labeled_count(&self, doc_id: &str, annotator: &str) -> usize {
        self.index
            .range((doc_id.to_string(), 0, String::new())..)
            .take_while(|((d, _, _), _)| d == doc_id)
            .filter(|((_, _, a), _)| a == annotator)
            .count()
    }

    /// One JSON line per live record, in index order.
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

fn fold(index: &mut BTreeMap<RecordKey, AnnotationRecord>, r: AnnotationRecord) {
    let key = (r.doc_id.clone(), r.sentence_idx, r.annotator.clone());
    if index.get(&key).is_none_or(|prev| prev.rev < r.rev) {
        index.insert(key, r);
    }
}
