//! SMILES chemical-word segmentation.
//!
//! SMILES strings are treated as opaque character sequences (no chemistry
//! validation) and split into "chemical words" in one of two ways:
//!
//! - overlapping k-mers extracted with a sliding window
//!   ([`tokenize_kmer`]), or
//! - segments from a byte-pair-encoding vocabulary trained on a SMILES
//!   corpus ([`train_bpe`], [`tokenize_bpe`]).
//!
//! Digits and SMILES punctuation are ordinary characters; nothing is
//! pre-split.

mod bpe;

pub use bpe::{train_bpe, BpeParams, BpeVocabulary};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Longest chemical word either tokenizer will emit.
pub const MAX_WORD_LEN: usize = 100;

/// Reserved symbol substituted for characters outside a BPE vocabulary's
/// character coverage.
pub const UNK_TOKEN: &str = "<unk>";

/// A SMILES string: non-empty, free of whitespace. Stored verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SmilesString(String);

impl SmilesString {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::InvalidInput("empty SMILES string".into()));
        }
        if text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "SMILES string contains whitespace: {text:?}"
            )));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Length in characters (not bytes).
    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }
}

impl std::fmt::Display for SmilesString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A chemical word: a 1..=100 character substring of a SMILES string, or
/// the reserved [`UNK_TOKEN`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChemWord(String);

impl ChemWord {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let len = text.chars().count();
        if len == 0 {
            return Err(Error::InvalidInput("empty chemical word".into()));
        }
        if len > MAX_WORD_LEN && text != UNK_TOKEN {
            return Err(Error::InvalidInput(format!(
                "chemical word exceeds {MAX_WORD_LEN} characters ({len})"
            )));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ChemWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Extract all overlapping length-`k` substrings of `s`, left to right.
///
/// Strings shorter than `k` yield the whole string as a single word, so no
/// ligand ever maps to an empty word list. `k` must lie in
/// `1..=MAX_WORD_LEN`.
pub fn tokenize_kmer(s: &SmilesString, k: usize) -> Result<Vec<ChemWord>> {
    if k == 0 {
        return Err(Error::InvalidInput("k-mer size must be at least 1".into()));
    }
    if k > MAX_WORD_LEN {
        return Err(Error::InvalidInput(format!(
            "k-mer size {k} exceeds maximum word length {MAX_WORD_LEN}"
        )));
    }
    let chars: Vec<char> = s.as_str().chars().collect();
    if chars.len() <= k {
        return Ok(vec![ChemWord(s.as_str().to_string())]);
    }
    Ok(chars
        .windows(k)
        .map(|w| ChemWord(w.iter().collect()))
        .collect())
}

/// Segment `s` with a trained BPE vocabulary.
///
/// The string is split into characters (characters outside the vocabulary's
/// coverage become [`UNK_TOKEN`]) and the learned merges are applied in
/// order, each as a left-to-right non-overlapping pass. Concatenating the
/// output (ignoring unk substitutions) reproduces the input.
pub fn tokenize_bpe(s: &SmilesString, vocab: &BpeVocabulary) -> Vec<ChemWord> {
    vocab.segment(s)
}

/// Read a SMILES corpus file: UTF-8, one SMILES per line, blank lines
/// ignored.
pub fn read_smiles_corpus(path: &Path) -> Result<Vec<SmilesString>> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open corpus {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut corpus = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let smiles = SmilesString::new(line).map_err(|e| {
            Error::Data(format!(
                "{}:{}: bad SMILES line: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        corpus.push(smiles);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const TABLE1_SMILES: &str = "COc1cc2CCN=C(c3ccc(Cl)c(Cl)c3)c2cc1Cl";

    fn smiles(s: &str) -> SmilesString {
        SmilesString::new(s).unwrap()
    }

    // ── SmilesString / ChemWord ──

    #[test]
    fn smiles_rejects_empty_and_whitespace() {
        assert!(SmilesString::new("").is_err());
        assert!(SmilesString::new("C C").is_err());
        assert!(SmilesString::new("CC\n").is_err());
        assert!(SmilesString::new("CCO").is_ok());
    }

    #[test]
    fn chemword_length_bounds() {
        assert!(ChemWord::new("").is_err());
        assert!(ChemWord::new("C".repeat(100)).is_ok());
        assert!(ChemWord::new("C".repeat(101)).is_err());
    }

    // ── tokenize_kmer ──

    #[test]
    fn kmer_table1_molecule() {
        let words = tokenize_kmer(&smiles(TABLE1_SMILES), 8).unwrap();
        assert_eq!(words.len(), 30);
        assert_eq!(words[0].as_str(), "COc1cc2C");
        assert_eq!(words[1].as_str(), "Oc1cc2CC");
        assert_eq!(words[2].as_str(), "c1cc2CCN");
        assert_eq!(words[28].as_str(), "3)c2cc1C");
        assert_eq!(words[29].as_str(), ")c2cc1Cl");
    }

    #[test]
    fn kmer_short_string_is_single_word() {
        let words = tokenize_kmer(&smiles("CCO"), 8).unwrap();
        assert_eq!(words.len(), 1);
        assert_eq!(words[0].as_str(), "CCO");
    }

    #[test]
    fn kmer_window_equals_string() {
        let words = tokenize_kmer(&smiles("CCCCCCCC"), 8).unwrap();
        assert_eq!(words.len(), 1);
        assert_eq!(words[0].as_str(), "CCCCCCCC");
    }

    #[test]
    fn kmer_rejects_bad_k() {
        assert!(tokenize_kmer(&smiles("CCO"), 0).is_err());
        assert!(tokenize_kmer(&smiles("CCO"), MAX_WORD_LEN + 1).is_err());
    }

    #[test]
    fn kmer_count_and_reconstruction_properties() {
        let mut rng = crate::rng::derive_rng(11, "test/kmer");
        let alphabet: Vec<char> = "CNOclnos123()=#[]+@-".chars().collect();
        for _ in 0..200 {
            let len = rng.random_range(1..60);
            let s: String = (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let s = smiles(&s);
            let k = rng.random_range(1..12);
            let words = tokenize_kmer(&s, k).unwrap();
            if len >= k {
                assert_eq!(words.len(), len - k + 1);
                for w in &words {
                    assert_eq!(w.as_str().chars().count(), k);
                }
                // first char of every word plus the tail of the last word
                // rebuilds the input
                let mut rebuilt: String = words
                    .iter()
                    .take(words.len() - 1)
                    .map(|w| w.as_str().chars().next().unwrap())
                    .collect();
                rebuilt.push_str(words.last().unwrap().as_str());
                assert_eq!(rebuilt, s.as_str());
            } else {
                assert_eq!(words.len(), 1);
                assert_eq!(words[0].as_str(), s.as_str());
            }
        }
    }

    // ── corpus file ──

    #[test]
    fn corpus_reader_skips_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        std::fs::write(&path, "CCO\n\nCCN\r\n\nC\n").unwrap();
        let corpus = read_smiles_corpus(&path).unwrap();
        let texts: Vec<&str> = corpus.iter().map(|s| s.as_str()).collect();
        assert_eq!(texts, vec!["CCO", "CCN", "C"]);
    }

    #[test]
    fn corpus_reader_rejects_inline_whitespace() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        std::fs::write(&path, "CCO\nC C\n").unwrap();
        assert!(matches!(read_smiles_corpus(&path), Err(Error::Data(_))));
    }
}
