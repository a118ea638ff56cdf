//! Smith-Waterman local alignment and normalized protein similarity.
//!
//! [`sw_score`] is the affine-gap local alignment DP; a gap of length k
//! costs `gap_open + k * gap_extend`. [`normalized_sw_matrix`] builds the
//! all-pairs matrix with entries `SW(a,b) / sqrt(SW(a,a) * SW(b,b))`,
//! computing each unordered pair once and in parallel.

mod blosum;

pub use blosum::{SubstitutionMatrix, BLOSUM62_TEXT};

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Residues accepted in protein sequences: the 20 standard letters plus X.
pub const RESIDUES: &str = "ACDEFGHIKLMNPQRSTVWYX";

/// A protein sequence with an identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProteinSequence {
    id: String,
    residues: String,
}

impl ProteinSequence {
    pub fn new(id: impl Into<String>, residues: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let residues = residues.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "bad protein id {id:?}: must be non-empty without whitespace"
            )));
        }
        if residues.is_empty() {
            return Err(Error::InvalidInput(format!("protein {id}: empty sequence")));
        }
        if let Some(bad) = residues.chars().find(|c| !RESIDUES.contains(*c)) {
            return Err(Error::InvalidInput(format!(
                "protein {id}: invalid residue {bad:?}"
            )));
        }
        Ok(Self { id, residues })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn residues(&self) -> &str {
        &self.residues
    }
}

/// Alignment scoring: substitution matrix plus affine gap penalties.
/// A gap of length k costs `gap_open + k * gap_extend`.
#[derive(Debug, Clone)]
pub struct Scoring {
    pub matrix: SubstitutionMatrix,
    pub gap_open: f64,
    pub gap_extend: f64,
}

impl Default for Scoring {
    fn default() -> Self {
        Self {
            matrix: SubstitutionMatrix::blosum62(),
            gap_open: 10.0,
            gap_extend: 0.5,
        }
    }
}

impl Scoring {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_open >= 0.0 && self.gap_extend >= 0.0) {
            return Err(Error::InvalidInput(
                "gap penalties must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Maximum local alignment score of `a` against `b`; non-negative and
/// symmetric in its arguments.
pub fn sw_score(a: &ProteinSequence, b: &ProteinSequence, scoring: &Scoring) -> Result<f64> {
    scoring.validate()?;
    let m = &scoring.matrix;
    let sa: Vec<usize> = a
        .residues()
        .chars()
        .map(|c| m.index_of(c))
        .collect::<Result<_>>()?;
    let rows_b: Vec<&[f64]> = b
        .residues()
        .chars()
        .map(|c| m.row(c))
        .collect::<Result<_>>()?;

    let open = scoring.gap_open + scoring.gap_extend;
    let extend = scoring.gap_extend;
    let n = sa.len();

    // One row per b-residue; h/e roll over rows, f is per-column.
    let mut h_prev = vec![0.0f64; n + 1];
    let mut h_cur = vec![0.0f64; n + 1];
    let mut e_prev = vec![f64::NEG_INFINITY; n + 1];
    let mut e_cur = vec![f64::NEG_INFINITY; n + 1];
    let mut best = 0.0f64;

    for row in rows_b {
        let mut f = f64::NEG_INFINITY;
        h_cur[0] = 0.0;
        e_cur[0] = f64::NEG_INFINITY;
        for j in 1..=n {
            // gap in b (consume a[j-1])
            f = (h_cur[j - 1] - open).max(f - extend);
            // gap in a (consume current b residue)
            e_cur[j] = (h_prev[j] - open).max(e_prev[j] - extend);
            let diag = h_prev[j - 1] + row[sa[j - 1]];
            let h = diag.max(e_cur[j]).max(f).max(0.0);
            h_cur[j] = h;
            if h > best {
                best = h;
            }
        }
        std::mem::swap(&mut h_prev, &mut h_cur);
        std::mem::swap(&mut e_prev, &mut e_cur);
    }
    Ok(best)
}

/// Square matrix of normalized similarities over an ordered protein list.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<f64>, // n x n, row-major
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ids.len()..(i + 1) * self.ids.len()]
    }

    fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        for i in 0..n {
            if (self.get(i, i) - 1.0).abs() > 1e-12 {
                return Err(Error::Internal(format!(
                    "similarity diagonal for {} is {}, expected 1",
                    self.ids[i],
                    self.get(i, i)
                )));
            }
            for j in 0..n {
                let v = self.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Data(format!(
                        "similarity ({}, {}) = {v} outside [0, 1]; the \
                         substitution matrix lacks a dominant diagonal",
                        self.ids[i], self.ids[j]
                    )));
                }
                if (v - self.get(j, i)).abs() > 1e-12 {
                    return Err(Error::Internal("similarity matrix not symmetric".into()));
                }
            }
        }
        Ok(())
    }

    /// TSV with a header row and a leading id column; entries keep full
    /// float precision.
    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for id in &self.ids {
            write!(out, "\t{id}").expect("string write");
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(i) {
                write!(out, "\t{v}").expect("string write");
            }
            out.push('\n');
        }
        let mut file = File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            Error::Data(format!(
                "cannot open similarity matrix {}: {e}",
                path.display()
            ))
        })?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data(format!("{}: empty matrix file", path.display())))??;
        let ids: Vec<String> = header
            .split('\t')
            .skip(1)
            .map(|s| s.to_string())
            .collect();
        let n = ids.len();
        if n == 0 {
            return Err(Error::Data(format!("{}: no ids in header", path.display())));
        }
        let mut values = vec![0.0; n * n];
        let mut row = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if row >= n {
                return Err(Error::Data(format!("{}: too many rows", path.display())));
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default();
            if id != ids[row] {
                return Err(Error::Data(format!(
                    "{}: row {} labeled {id:?}, expected {:?}",
                    path.display(),
                    row + 1,
                    ids[row]
                )));
            }
            let mut count = 0;
            for f in fields {
                if count >= n {
                    return Err(Error::Data(format!(
                        "{}: row {} too wide",
                        path.display(),
                        row + 1
                    )));
                }
                values[row * n + count] = f
                    .parse()
                    .map_err(|_| Error::Data(format!("{}: bad float {f:?}", path.display())))?;
                count += 1;
            }
            if count != n {
                return Err(Error::Data(format!(
                    "{}: row {} has {count} values, expected {n}",
                    path.display(),
                    row + 1
                )));
            }
            row += 1;
        }
        if row != n {
            return Err(Error::Data(format!(
                "{}: {row} rows, expected {n}",
                path.display()
            )));
        }
        let matrix = Self { ids, values };
        matrix.validate()?;
        Ok(matrix)
    }
}

/// All-pairs normalized similarity: entry (i, j) is
/// `sw(i,j) / sqrt(sw(i,i) * sw(j,j))`. Each unordered pair is computed
/// once; the pair loop runs in parallel with a deterministic result.
pub fn normalized_sw_matrix(
    proteins: &[ProteinSequence],
    scoring: &Scoring,
) -> Result<SimilarityMatrix> {
    if proteins.is_empty() {
        return Err(Error::InvalidInput(
            "similarity matrix needs at least one protein".into(),
        ));
    }
    let mut seen = HashSet::new();
    for p in proteins {
        if !seen.insert(p.id()) {
            return Err(Error::InvalidInput(format!("duplicate protein id {}", p.id())));
        }
    }

    let self_scores: Vec<f64> = proteins
        .par_iter()
        .map(|p| sw_score(p, p, scoring))
        .collect::<Result<_>>()?;
    for (p, &s) in proteins.iter().zip(&self_scores) {
        if s <= 0.0 {
            return Err(Error::Data(format!(
                "degenerate sequence: protein {} has self-alignment score 0",
                p.id()
            )));
        }
    }

    let n = proteins.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let pair_scores: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| sw_score(&proteins[i], &proteins[j], scoring))
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (&(i, j), &s) in pairs.iter().zip(&pair_scores) {
        let mut v = s / (self_scores[i] * self_scores[j]).sqrt();
        if v > 1.0 && v < 1.0 + 1e-9 {
            v = 1.0; // rounding right at the bound
        }
        values[i * n + j] = v;
        values[j * n + i] = v;
    }

    let matrix = SimilarityMatrix {
        ids: proteins.iter().map(|p| p.id().to_string()).collect(),
        values,
    };
    matrix.validate()?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn protein(id: &str, seq: &str) -> ProteinSequence {
        ProteinSequence::new(id, seq).unwrap()
    }

    fn random_protein(rng: &mut impl Rng, id: &str, max_len: usize) -> ProteinSequence {
        let letters: Vec<char> = "ACDEFGHIKLMNPQRSTVWY".chars().collect();
        let len = rng.random_range(1..=max_len);
        let seq: String = (0..len)
            .map(|_| letters[rng.random_range(0..letters.len())])
            .collect();
        protein(id, &seq)
    }

    // ── brute-force oracle ──────────────────────────────────────────
    //
    // Local alignment score as the max over all substring pairs of the
    // global affine alignment score of the substrings (floored at zero).
    // The global score is computed by a memoized recursion over
    // (position a, position b, previous op), an independent route from the
    // single-pass DP in `sw_score`.

    #[derive(Clone, Copy, PartialEq)]
    enum PrevOp {
        None,
        GapA,
        GapB,
    }

    fn global_affine(a: &[char], b: &[char], scoring: &Scoring) -> f64 {
        fn rec(
            a: &[char],
            b: &[char],
            i: usize,
            j: usize,
            prev: PrevOp,
            scoring: &Scoring,
            memo: &mut Vec<Option<f64>>,
            nb: usize,
        ) -> f64 {
            let state = match prev {
                PrevOp::None => 0,
                PrevOp::GapA => 1,
                PrevOp::GapB => 2,
            };
            let key = (i * (nb + 1) + j) * 3 + state;
            if let Some(v) = memo[key] {
                return v;
            }
            let open = scoring.gap_open + scoring.gap_extend;
            let extend = scoring.gap_extend;
            let mut best = f64::NEG_INFINITY;
            if i == a.len() && j == b.len() {
                best = 0.0;
            } else {
                if i < a.len() && j < b.len() {
                    let s = scoring.matrix.score(a[i], b[j]).unwrap();
                    best = best
                        .max(s + rec(a, b, i + 1, j + 1, PrevOp::None, scoring, memo, nb));
                }
                if i < a.len() {
                    let cost = if prev == PrevOp::GapB { extend } else { open };
                    best = best
                        .max(-cost + rec(a, b, i + 1, j, PrevOp::GapB, scoring, memo, nb));
                }
                if j < b.len() {
                    let cost = if prev == PrevOp::GapA { extend } else { open };
                    best = best
                        .max(-cost + rec(a, b, i, j + 1, PrevOp::GapA, scoring, memo, nb));
                }
            }
            memo[key] = Some(best);
            best
        }
        let nb = b.len();
        let mut memo = vec![None; (a.len() + 1) * (nb + 1) * 3];
        rec(a, b, 0, 0, PrevOp::None, scoring, &mut memo, nb)
    }

    fn brute_force_local(a: &ProteinSequence, b: &ProteinSequence, scoring: &Scoring) -> f64 {
        let ca: Vec<char> = a.residues().chars().collect();
        let cb: Vec<char> = b.residues().chars().collect();
        let mut best = 0.0f64;
        for i1 in 0..ca.len() {
            for i2 in i1 + 1..=ca.len() {
                for j1 in 0..cb.len() {
                    for j2 in j1 + 1..=cb.len() {
                        let s = global_affine(&ca[i1..i2], &cb[j1..j2], scoring);
                        if s > best {
                            best = s;
                        }
                    }
                }
            }
        }
        best
    }

    /// Path-level enumeration for tiny inputs; validates the substring
    /// oracle itself.
    fn enumerate_alignments(a: &[char], b: &[char], scoring: &Scoring) -> f64 {
        fn rec(
            a: &[char],
            b: &[char],
            i: usize,
            j: usize,
            prev: PrevOp,
            score: f64,
            scoring: &Scoring,
            best: &mut f64,
        ) {
            if score > *best {
                *best = score;
            }
            if i < a.len() && j < b.len() {
                let s = scoring.matrix.score(a[i], b[j]).unwrap();
                rec(a, b, i + 1, j + 1, PrevOp::None, score + s, scoring, best);
            }
            let open = scoring.gap_open + scoring.gap_extend;
            let extend = scoring.gap_extend;
            if i < a.len() {
                let cost = if prev == PrevOp::GapB { extend } else { open };
                rec(a, b, i + 1, j, PrevOp::GapB, score - cost, scoring, best);
            }
            if j < b.len() {
                let cost = if prev == PrevOp::GapA { extend } else { open };
                rec(a, b, i, j + 1, PrevOp::GapA, score - cost, scoring, best);
            }
        }
        let mut best = 0.0f64;
        for i in 0..a.len() {
            for j in 0..b.len() {
                rec(a, b, i, j, PrevOp::None, 0.0, scoring, &mut best);
            }
        }
        best
    }

    #[test]
    fn single_residue_identity_scores_diagonal() {
        let s = Scoring::default();
        let score = sw_score(&protein("a", "A"), &protein("b", "A"), &s).unwrap();
        assert_eq!(score, 4.0);
    }

    #[test]
    fn negative_substitution_floors_at_zero() {
        let s = Scoring::default();
        let score = sw_score(&protein("a", "A"), &protein("b", "D"), &s).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn symmetric_in_arguments() {
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(21, "test/sw-sym");
        for i in 0..30 {
            let a = random_protein(&mut rng, &format!("a{i}"), 20);
            let b = random_protein(&mut rng, &format!("b{i}"), 20);
            let ab = sw_score(&a, &b, &s).unwrap();
            let ba = sw_score(&b, &a, &s).unwrap();
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn self_score_dominates_under_blosum62() {
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(22, "test/sw-dom");
        for i in 0..20 {
            let a = random_protein(&mut rng, &format!("a{i}"), 15);
            let b = random_protein(&mut rng, &format!("b{i}"), 15);
            let aa = sw_score(&a, &a, &s).unwrap();
            let ab = sw_score(&a, &b, &s).unwrap();
            assert!(aa >= ab);
        }
    }

    #[test]
    fn matches_brute_force_on_short_sequences() {
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(23, "test/sw-oracle");
        for i in 0..25 {
            let a = random_protein(&mut rng, &format!("a{i}"), 9);
            let b = random_protein(&mut rng, &format!("b{i}"), 9);
            let dp = sw_score(&a, &b, &s).unwrap();
            let brute = brute_force_local(&a, &b, &s);
            assert!(
                (dp - brute).abs() < 1e-9,
                "dp={dp} brute={brute} a={} b={}",
                a.residues(),
                b.residues()
            );
        }
    }

    #[test]
    fn substring_oracle_matches_path_enumeration_on_tiny_inputs() {
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(24, "test/sw-tiny");
        for i in 0..10 {
            let a = random_protein(&mut rng, &format!("a{i}"), 5);
            let b = random_protein(&mut rng, &format!("b{i}"), 5);
            let ca: Vec<char> = a.residues().chars().collect();
            let cb: Vec<char> = b.residues().chars().collect();
            let by_paths = enumerate_alignments(&ca, &cb, &s);
            let by_substrings = brute_force_local(&a, &b, &s);
            let dp = sw_score(&a, &b, &s).unwrap();
            assert!((by_paths - by_substrings).abs() < 1e-9);
            assert!((dp - by_paths).abs() < 1e-9);
        }
    }

    #[test]
    fn gap_cost_is_open_plus_k_extend() {
        // AGA vs AA: best alignment deletes G: 4 + 4 - (10 + 0.5) < 4+4
        // floored pieces; with these penalties the single-gap alignment
        // scores 8 - 10.5 < max single match 4.
        let s = Scoring::default();
        let score = sw_score(&protein("a", "AGA"), &protein("b", "AA"), &s).unwrap();
        assert_eq!(score, 4.0);
        // Cheap gaps make bridging worthwhile: 4 + 4 - (1 + 0.5) = 6.5
        let cheap = Scoring {
            gap_open: 1.0,
            gap_extend: 0.5,
            ..Scoring::default()
        };
        let score = sw_score(&protein("a", "AGA"), &protein("b", "AA"), &cheap).unwrap();
        assert_eq!(score, 6.5);
    }

    #[test]
    fn invalid_residue_is_rejected() {
        assert!(ProteinSequence::new("p", "AJ").is_err());
        assert!(ProteinSequence::new("p", "").is_err());
        assert!(ProteinSequence::new("p", "ACDX").is_ok());
    }

    // ── normalized matrix ──

    #[test]
    fn self_similarity_is_one() {
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(25, "test/matrix-self");
        let proteins: Vec<ProteinSequence> = (0..4)
            .map(|i| random_protein(&mut rng, &format!("p{i}"), 30))
            .collect();
        let m = normalized_sw_matrix(&proteins, &s).unwrap();
        for i in 0..proteins.len() {
            assert_eq!(m.get(i, i), 1.0);
        }
    }

    #[test]
    fn matrix_is_symmetric_and_bounded() {
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(26, "test/matrix-bounds");
        let proteins: Vec<ProteinSequence> = (0..3)
            .map(|i| random_protein(&mut rng, &format!("p{i}"), 25))
            .collect();
        let m = normalized_sw_matrix(&proteins, &s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v = m.get(i, j);
                assert!((0.0..=1.0).contains(&v));
                assert_eq!(v, m.get(j, i));
            }
        }
    }

    #[test]
    fn matrix_matches_naive_recomputation() {
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(27, "test/matrix-oracle");
        let proteins: Vec<ProteinSequence> = (0..5)
            .map(|i| random_protein(&mut rng, &format!("p{i}"), 15))
            .collect();
        let m = normalized_sw_matrix(&proteins, &s).unwrap();
        for i in 0..proteins.len() {
            for j in 0..proteins.len() {
                let sii = sw_score(&proteins[i], &proteins[i], &s).unwrap();
                let sjj = sw_score(&proteins[j], &proteins[j], &s).unwrap();
                let sij = sw_score(&proteins[i], &proteins[j], &s).unwrap();
                let expect = if i == j { 1.0 } else { sij / (sii * sjj).sqrt() };
                assert!((m.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let s = Scoring::default();
        let ps = vec![protein("p", "ACD"), protein("p", "ACD")];
        assert!(normalized_sw_matrix(&ps, &s).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sw.tsv");
        let s = Scoring::default();
        let mut rng = crate::rng::derive_rng(28, "test/matrix-io");
        let proteins: Vec<ProteinSequence> = (0..4)
            .map(|i| random_protein(&mut rng, &format!("p{i}"), 20))
            .collect();
        let m = normalized_sw_matrix(&proteins, &s).unwrap();
        m.save_tsv(&path).unwrap();
        let loaded = SimilarityMatrix::load_tsv(&path).unwrap();
        assert_eq!(m, loaded);
    }
}
