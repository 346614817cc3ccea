//! word2vec text-format embeddings aligned to a vocabulary.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::nn::Tensor;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embeddings line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("embedding dimension {found} does not match expected {expected}")]
    Dim { expected: usize, found: usize },
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((count, dim))
}

/// Read `[vocab.len() x dim]` from `reader`. Rows of tokens missing from the
/// file, and the reserved rows, are zero. The first line for a token wins.
pub fn read_embeddings(
    reader: impl BufRead,
    vocab: &Vocabulary,
    expected_dim: Option<usize>,
) -> Result<(Tensor<f32>, usize), EmbeddingError> {
    let mut dim = expected_dim;
    let mut table: Vec<f32> = Vec::new();
    let mut seen = vec![false; vocab.len()];
    let mut found = 0;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| EmbeddingError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if n == 0 {
            if let Some((_, d)) = parse_header(&line) {
                if d == 0 || expected_dim.is_some_and(|e| e != d) {
                    return Err(EmbeddingError::Dim {
                        expected: expected_dim.unwrap_or(0),
                        found: d,
                    });
                }
                dim = Some(d);
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line");
        let values: Vec<&str> = fields.collect();
        let d = match dim {
            Some(d) => d,
            None => {
                if values.is_empty() {
                    return Err(EmbeddingError::Parse {
                        line: line_no,
                        message: "token without values".into(),
                    });
                }
                dim = Some(values.len());
                values.len()
            }
        };
        if table.is_empty() {
            table = vec![0.0; vocab.len() * d];
        }
        if values.len() != d {
            return Err(EmbeddingError::Parse {
                line: line_no,
                message: format!("expected {d} values, found {}", values.len()),
            });
        }
        let idx = vocab.index_of(token);
        let known = vocab.contains(token) && !seen[idx];
        let mut row = Vec::with_capacity(d);
        for v in values {
            let x: f32 = v.parse().map_err(|_| EmbeddingError::Parse {
                line: line_no,
                message: format!("invalid number {v:?}"),
            })?;
            row.push(x);
        }
        if known {
            seen[idx] = true;
            found += 1;
            table[idx * d..(idx + 1) * d].copy_from_slice(&row);
        }
    }
    let d = dim.ok_or(EmbeddingError::Parse {
        line: 0,
        message: "no embedding vectors".into(),
    })?;
    if table.is_empty() {
        table = vec![0.0; vocab.len() * d];
    }
    let tensor = Tensor::new(vec![vocab.len(), d], table).expect("table size");
    Ok((tensor, found))
}

/// Load from a file; see [`read_embeddings`]. Also returns how many
/// vocabulary tokens were found.
pub fn load_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    expected_dim: Option<usize>,
) -> Result<(Tensor<f32>, usize), EmbeddingError> {
    let file = File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_embeddings(BufReader::new(file), vocab, expected_dim)
}
