//! Word-vector tables in the plain-text format `token v1 v2 ... vd`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::catalog::tokenize;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn err(line: usize, message: impl Into<String>) -> VectorError {
    VectorError::Format { line, message: message.into() }
}

/// In-memory token-to-vector map with a fixed dimension.
pub struct VectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl VectorTable {
    /// Reads a table whose first line is `<token-count> <dimension>`.
    ///
    /// Every row must match the declared dimension; duplicate tokens keep
    /// their first occurrence. The declared count is advisory.
    pub fn load(path: impl AsRef<Path>) -> Result<VectorTable, VectorError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<VectorTable, VectorError> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".to_string()))?;
        let header = header?;
        let mut parts = header.split_whitespace();
        let _count: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(1, "header must start with a token count"))?;
        let dim: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(1, "header must declare a dimension"))?;
        if parts.next().is_some() {
            return Err(err(1, "header must be '<token-count> <dimension>'"));
        }
        if dim == 0 {
            return Err(err(1, "dimension must be positive"));
        }

        let mut vectors = HashMap::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line has a first field");
            let mut vec = Vec::with_capacity(dim);
            for part in parts {
                let v: f64 = part
                    .parse()
                    .map_err(|_| err(idx + 1, format!("non-numeric component '{part}'")))?;
                vec.push(v);
            }
            if vec.len() != dim {
                return Err(err(
                    idx + 1,
                    format!("expected {dim} components, found {}", vec.len()),
                ));
            }
            vectors.entry(token.to_string()).or_insert(vec);
        }
        Ok(VectorTable { dim, vectors })
    }

    pub fn from_str_table(text: &str) -> Result<VectorTable, VectorError> {
        Self::from_reader(text.as_bytes())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Mean of the vectors of in-vocabulary tokens; `None` when every token
    /// is out of vocabulary.
    pub fn embed(&self, text: &str) -> Option<Vec<f64>> {
        let mut sum = vec![0.0f64; self.dim];
        let mut hits = 0usize;
        for token in tokenize(text) {
            if let Some(v) = self.vectors.get(&token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                hits += 1;
            }
        }
        if hits == 0 {
            return None;
        }
        for s in &mut sum {
            *s /= hits as f64;
        }
        Some(sum)
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}
