//! Substitution matrix parsing and the built-in BLOSUM62 table.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Standard BLOSUM62 in the usual whitespace-separated layout: a header row
/// of residue letters, then one labeled row per residue.
pub const BLOSUM62_TEXT: &str = "\
   A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V  B  Z  X  *
A  4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0 -2 -1  0 -4
R -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3 -1  0 -1 -4
N -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3  3  0 -1 -4
D -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3  4  1 -1 -4
C  0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1 -3 -3 -2 -4
Q -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2  0  3 -1 -4
E -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4
G  0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3 -1 -2 -1 -4
H -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3  0  0 -1 -4
I -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3 -3 -3 -1 -4
L -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1 -4 -3 -1 -4
K -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2  0  1 -1 -4
M -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1 -3 -1 -1 -4
F -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1 -3 -3 -1 -4
P -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2 -2 -1 -2 -4
S  1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2  0  0  0 -4
T  0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0 -1 -1  0 -4
W -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3 -4 -3 -2 -4
Y -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1 -3 -2 -1 -4
V  0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4 -3 -2 -1 -4
B -2 -1  3  4 -3  0  1 -1  0 -3 -4  0 -3 -3 -2  0 -1 -4 -3 -3  4  1 -1 -4
Z -1  0  0  1 -3  3  4 -2  0 -3 -3  1 -1 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4
X  0 -1 -1 -1 -2 -1 -1 -1 -1 -1 -1 -1 -1 -1 -2  0  0 -2 -1 -1 -1 -1 -1 -4
* -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4  1
";

/// A residue substitution matrix with O(1) lookup by character.
#[derive(Debug, Clone)]
pub struct SubstitutionMatrix {
    letters: Vec<char>,
    index: [i16; 128],
    scores: Vec<f64>, // n x n
}

impl SubstitutionMatrix {
    /// Parse the whitespace-separated text format: optional `#` comment
    /// lines, a header row of residue letters, then one row per residue
    /// (an optional leading row label is accepted and checked).
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = rows
            .next()
            .ok_or_else(|| Error::Data("empty substitution matrix".into()))?;
        let letters: Vec<char> = header
            .split_whitespace()
            .map(|tok| {
                let mut chars = tok.chars();
                let c = chars.next().unwrap();
                if chars.next().is_some() {
                    return Err(Error::Data(format!(
                        "substitution matrix header token {tok:?} is not a single letter"
                    )));
                }
                Ok(c)
            })
            .collect::<Result<_>>()?;
        let n = letters.len();
        if n == 0 {
            return Err(Error::Data("substitution matrix header has no letters".into()));
        }

        let mut scores = vec![0.0; n * n];
        let mut row_count = 0;
        for line in rows {
            if row_count >= n {
                return Err(Error::Data("substitution matrix has too many rows".into()));
            }
            let mut fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() == n + 1 {
                let label = fields.remove(0);
                if label.chars().count() != 1
                    || label.chars().next().unwrap() != letters[row_count]
                {
                    return Err(Error::Data(format!(
                        "substitution matrix row {} labeled {label:?}, expected {:?}",
                        row_count + 1,
                        letters[row_count]
                    )));
                }
            } else if fields.len() != n {
                return Err(Error::Data(format!(
                    "substitution matrix row {} has {} values, expected {n}",
                    row_count + 1,
                    fields.len()
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                scores[row_count * n + j] = f.parse().map_err(|_| {
                    Error::Data(format!("bad substitution score {f:?}"))
                })?;
            }
            row_count += 1;
        }
        if row_count != n {
            return Err(Error::Data(format!(
                "substitution matrix has {row_count} rows, expected {n}"
            )));
        }

        let mut index = [-1i16; 128];
        for (i, &c) in letters.iter().enumerate() {
            if !c.is_ascii() {
                return Err(Error::Data(format!("non-ASCII matrix letter {c:?}")));
            }
            if index[c as usize] >= 0 {
                return Err(Error::Data(format!("duplicate matrix letter {c:?}")));
            }
            index[c as usize] = i as i16;
        }
        Ok(Self {
            letters,
            index,
            scores,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Data(format!(
                "cannot read substitution matrix {}: {e}",
                path.display()
            ))
        })?;
        Self::parse(&text)
    }

    pub fn blosum62() -> Self {
        Self::parse(BLOSUM62_TEXT).expect("built-in BLOSUM62 parses")
    }

    pub fn letters(&self) -> &[char] {
        &self.letters
    }

    pub fn covers(&self, c: char) -> bool {
        c.is_ascii() && self.index[c as usize] >= 0
    }

    /// Score of aligning `a` against `b`.
    pub fn score(&self, a: char, b: char) -> Result<f64> {
        let ia = self.lookup(a)?;
        let ib = self.lookup(b)?;
        Ok(self.scores[ia * self.letters.len() + ib])
    }

    fn lookup(&self, c: char) -> Result<usize> {
        if !c.is_ascii() || self.index[c as usize] < 0 {
            return Err(Error::InvalidInput(format!(
                "residue {c:?} not covered by the substitution matrix"
            )));
        }
        Ok(self.index[c as usize] as usize)
    }

    /// Row of scores for residue `c` in header order, for inner DP loops.
    pub(crate) fn row(&self, c: char) -> Result<&[f64]> {
        let i = self.lookup(c)?;
        let n = self.letters.len();
        Ok(&self.scores[i * n..(i + 1) * n])
    }

    pub(crate) fn index_of(&self, c: char) -> Result<usize> {
        self.lookup(c)
    }
}
