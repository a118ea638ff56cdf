//! Distributed chemical-word vectors.
//!
//! [`train_skipgram`] learns word vectors from a tokenized SMILES corpus
//! with skip-gram negative sampling; [`smilesvec`] composes a per-ligand
//! vector as the arithmetic mean of its in-vocabulary word vectors. The
//! same text format reads and writes both chemical-word tables and
//! precomputed per-protein embedding files.

mod train;

pub use train::{train_skipgram, TrainParams};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::smiles_lang::ChemWord;

/// Settings a table was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub min_count: u64,
    pub learning_rate: f64,
    pub subsample: f64,
    pub seed: u64,
}

/// Immutable word -> vector table.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>, // words.len() x dim, row-major
    counts: Vec<u64>,  // empty for tables loaded from file
    trained_with: Option<TrainMeta>,
    epoch_losses: Vec<f64>,
}

impl EmbeddingTable {
    pub(crate) fn from_parts(
        dim: usize,
        words: Vec<String>,
        vectors: Vec<f64>,
        counts: Vec<u64>,
        trained_with: Option<TrainMeta>,
        epoch_losses: Vec<f64>,
    ) -> Result<Self> {
        if vectors.len() != words.len() * dim {
            return Err(Error::Internal(format!(
                "embedding table shape mismatch: {} words, dim {}, {} values",
                words.len(),
                dim,
                vectors.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("non-finite embedding vector".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate embedding entry {w:?}")));
            }
        }
        Ok(Self {
            dim,
            words,
            index,
            vectors,
            counts,
            trained_with,
            epoch_losses,
        })
    }

    /// Build a table from explicit (word, vector) pairs.
    pub fn from_entries(dim: usize, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut words = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        for (w, v) in entries {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "vector for {w:?} has length {}, expected {dim}",
                    v.len()
                )));
            }
            words.push(w);
            vectors.extend(v);
        }
        Self::from_parts(dim, words, vectors, Vec::new(), None, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| w.as_str())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Corpus frequency recorded at training; `None` for loaded tables.
    pub fn count(&self, word: &str) -> Option<u64> {
        if self.counts.is_empty() {
            return None;
        }
        self.index.get(word).map(|&i| self.counts[i])
    }

    pub fn trained_with(&self) -> Option<&TrainMeta> {
        self.trained_with.as_ref()
    }

    /// Mean negative-sampling logistic loss per epoch, in training order.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    /// Write as text: `<word_count> <dim>` header, then one
    /// `<word> <v1> ... <v_dim>` line per word. Values use the shortest
    /// representation that parses back to the identical float.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {}", self.words.len(), self.dim).expect("string write");
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {v}").expect("string write");
            }
            out.push('\n');
        }
        let mut file = File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Read the text format written by [`EmbeddingTable::save`]. Also loads
    /// precomputed per-protein embedding files of the same shape.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Data(format!("cannot open embeddings {}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data(format!("{}: empty embedding file", path.display())))??;
        let mut fields = header.split_whitespace();
        let count: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Data(format!("{}: bad word count", path.display())))?;
        let dim: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Data(format!("{}: bad dimension", path.display())))?;
        if dim == 0 {
            return Err(Error::Data(format!("{}: zero dimension", path.display())));
        }

        let mut words = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap();
            words.push(word.to_string());
            let start = vectors.len();
            for f in fields {
                let v: f64 = f.parse().map_err(|_| {
                    Error::Data(format!(
                        "{}:{}: bad float {f:?}",
                        path.display(),
                        lineno + 2
                    ))
                })?;
                vectors.push(v);
            }
            if vectors.len() - start != dim {
                return Err(Error::Data(format!(
                    "{}:{}: expected {dim} values, got {}",
                    path.display(),
                    lineno + 2,
                    vectors.len() - start
                )));
            }
        }
        if words.len() != count {
            return Err(Error::Data(format!(
                "{}: header says {count} words, found {}",
                path.display(),
                words.len()
            )));
        }
        Self::from_parts(dim, words, vectors, Vec::new(), None, Vec::new())
    }
}

/// A ligand vector: the mean of its in-vocabulary chemical-word vectors
/// plus how many words contributed.
#[derive(Debug, Clone, PartialEq)]
pub struct LigandVector {
    pub values: Vec<f64>,
    pub n_words: usize,
}

impl LigandVector {
    pub fn zero(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            n_words: 0,
        }
    }
}

/// Arithmetic mean of the vectors of the in-vocabulary words.
///
/// Out-of-vocabulary words are skipped and excluded from the divisor; if
/// every word is out of vocabulary the result is the zero vector with
/// `n_words = 0`.
pub fn smilesvec(words: &[ChemWord], table: &EmbeddingTable) -> LigandVector {
    let dim = table.dim();
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for w in words {
        if let Some(v) = table.vector(w.as_str()) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return LigandVector::zero(dim);
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    LigandVector {
        values: sum,
        n_words: n,
    }
}
