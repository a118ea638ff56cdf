//! Maximum sequence similarity stratification.
//!
//! For a test pair (P, L), MSS is the largest normalized similarity between
//! P and any protein that interacts with L in the training set. Low MSS
//! means the training set holds no interaction of L with anything
//! sequence-similar to P.

use std::collections::HashMap;

use log::warn;

use crate::error::{Error, Result};
use crate::evalkit::PredictionSet;
use crate::seqsim::SimilarityMatrix;

/// Per-test-pair maximum similarity to the ligand's training partners.
///
/// `training` lists (protein id, ligand id) pairs of the training set. A
/// ligand with no training partners gets MSS 0 (it falls in the lowest
/// category).
pub fn mss(
    test: &PredictionSet,
    sim: &SimilarityMatrix,
    training: &[(String, String)],
) -> Result<Vec<f64>> {
    let mut partners: HashMap<&str, Vec<usize>> = HashMap::new();
    for (protein, ligand) in training {
        let pi = sim.index_of(protein).ok_or_else(|| {
            Error::Data(format!(
                "training protein {protein} missing from the similarity matrix"
            ))
        })?;
        partners.entry(ligand.as_str()).or_default().push(pi);
    }

    let mut out = Vec::with_capacity(test.len());
    let mut unseen = 0usize;
    for (protein, ligand) in test.protein_ids().iter().zip(test.ligand_ids()) {
        let pi = sim.index_of(protein).ok_or_else(|| {
            Error::Data(format!(
                "test protein {protein} missing from the similarity matrix"
            ))
        })?;
        let value = match partners.get(ligand.as_str()) {
            Some(ps) => {
                let row = sim.row(pi);
                ps.iter().map(|&q| row[q]).fold(f64::NEG_INFINITY, f64::max)
            }
            None => {
                unseen += 1;
                0.0
            }
        };
        out.push(value);
    }
    if unseen > 0 {
        warn!("{unseen} test pairs involve ligands unseen in training; their MSS is 0");
    }
    Ok(out)
}

/// Equal-population stratification of MSS values.
#[derive(Debug, Clone, PartialEq)]
pub struct MssBins {
    /// Cut points between bins, at the 1/n..(n-1)/n empirical percentiles.
    pub boundaries: Vec<f64>,
    /// Member indices (into the value list) per bin, lowest MSS first.
    pub members: Vec<Vec<usize>>,
    /// Bin index per value.
    pub assignments: Vec<usize>,
}

impl MssBins {
    pub fn n_bins(&self) -> usize {
        self.members.len()
    }

    /// Inclusive value range (lo, hi] of a bin; the first bin is [0-ish, b1].
    pub fn range(&self, bin: usize, values: &[f64]) -> (f64, f64) {
        let lo = if bin == 0 {
            values
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                .min(self.boundaries.first().copied().unwrap_or(0.0))
        } else {
            self.boundaries[bin - 1]
        };
        let hi = if bin == self.n_bins() - 1 {
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            self.boundaries[bin]
        };
        (lo, hi)
    }
}

/// Split values into `n_bins` population quantile bins. Boundary k sits at
/// the k/n_bins empirical percentile; values tied with a boundary go to the
/// lower bin.
pub fn mss_bins(values: &[f64], n_bins: usize) -> Result<MssBins> {
    if n_bins == 0 {
        return Err(Error::Config("bin count must be positive".into()));
    }
    if values.len() < n_bins {
        return Err(Error::Config(format!(
            "{} values cannot fill {n_bins} bins",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite MSS value".into()));
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let boundaries: Vec<f64> = (1..n_bins)
        .map(|k| {
            let idx = (k * n).div_ceil(n_bins) - 1;
            sorted[idx]
        })
        .collect();

    let mut members = vec![Vec::new(); n_bins];
    let mut assignments = Vec::with_capacity(n);
    for (i, &v) in values.iter().enumerate() {
        let bin = boundaries.partition_point(|&b| v > b);
        members[bin].push(i);
        assignments.push(bin);
    }
    if members.iter().any(Vec::is_empty) {
        warn!("degenerate MSS stratification: tied values left some bins empty");
    }
    Ok(MssBins {
        boundaries,
        members,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqsim::{normalized_sw_matrix, ProteinSequence, Scoring};

    fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
        list.iter()
            .map(|(p, l)| (p.to_string(), l.to_string()))
            .collect()
    }

    fn demo_matrix() -> SimilarityMatrix {
        let proteins = vec![
            ProteinSequence::new("p0", "ACDEFGHIKLMNPQRSTVWY").unwrap(),
            ProteinSequence::new("p1", "ACDEFGHIKLMNPQRSTVWY").unwrap(),
            ProteinSequence::new("p2", "WWWWWWWCCCCCMMMMMHHH").unwrap(),
            ProteinSequence::new("p3", "KKKKRRRRDDDDEEEENNNN").unwrap(),
        ];
        normalized_sw_matrix(&proteins, &Scoring::default()).unwrap()
    }

    #[test]
    fn takes_maximum_over_partners() {
        let sim = demo_matrix();
        let test = PredictionSet::new(
            vec![1.0],
            vec![1.0],
            vec!["p0".into()],
            vec!["lig".into()],
        )
        .unwrap();
        let training = pairs(&[("p2", "lig"), ("p3", "lig")]);
        let got = mss(&test, &sim, &training).unwrap();
        let expect = sim.get(0, 2).max(sim.get(0, 3));
        assert_eq!(got, vec![expect]);
    }

    #[test]
    fn own_protein_in_training_gives_one() {
        let sim = demo_matrix();
        let test = PredictionSet::new(
            vec![1.0],
            vec![1.0],
            vec!["p0".into()],
            vec!["lig".into()],
        )
        .unwrap();
        let training = pairs(&[("p0", "lig"), ("p3", "lig")]);
        assert_eq!(mss(&test, &sim, &training).unwrap(), vec![1.0]);
        // identical sequence under a different id also reaches 1
        let training = pairs(&[("p1", "lig")]);
        assert_eq!(mss(&test, &sim, &training).unwrap(), vec![1.0]);
    }

    #[test]
    fn unseen_ligand_gets_zero() {
        let sim = demo_matrix();
        let test = PredictionSet::new(
            vec![1.0],
            vec![1.0],
            vec!["p0".into()],
            vec!["novel".into()],
        )
        .unwrap();
        let training = pairs(&[("p1", "other")]);
        assert_eq!(mss(&test, &sim, &training).unwrap(), vec![0.0]);
    }

    #[test]
    fn matches_nested_loop_brute_force() {
        use rand::Rng;
        let sim = demo_matrix();
        let mut rng = crate::rng::derive_rng(41, "test/mss-brute");
        let ligs = ["l0", "l1", "l2", "l3", "l4"];
        let prots = ["p0", "p1", "p2", "p3"];
        let training: Vec<(String, String)> = (0..10)
            .map(|_| {
                (
                    prots[rng.random_range(0..4)].to_string(),
                    ligs[rng.random_range(0..5)].to_string(),
                )
            })
            .collect();
        let n = 12;
        let test = PredictionSet::new(
            vec![1.0; n],
            vec![1.0; n],
            (0..n).map(|_| prots[rng.random_range(0..4)].to_string()).collect(),
            (0..n).map(|_| ligs[rng.random_range(0..5)].to_string()).collect(),
        )
        .unwrap();
        let got = mss(&test, &sim, &training).unwrap();
        for i in 0..n {
            let p = &test.protein_ids()[i];
            let l = &test.ligand_ids()[i];
            let mut best = 0.0f64;
            let mut any = false;
            for (tp, tl) in &training {
                if tl == l {
                    any = true;
                    let v = sim.get(
                        sim.index_of(p).unwrap(),
                        sim.index_of(tp).unwrap(),
                    );
                    best = best.max(v);
                }
            }
            let expect = if any { best } else { 0.0 };
            assert_eq!(got[i], expect);
            assert!((0.0..=1.0).contains(&got[i]));
        }
    }

    // ── bins ──

    #[test]
    fn even_split_of_distinct_values() {
        let values: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let bins = mss_bins(&values, 4).unwrap();
        assert_eq!(bins.boundaries, vec![2.0, 4.0, 6.0]);
        let sizes: Vec<usize> = bins.members.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 2, 2]);
    }

    #[test]
    fn boundary_ties_fall_low() {
        let values = vec![1.0, 2.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let bins = mss_bins(&values, 4).unwrap();
        for (i, &v) in values.iter().enumerate() {
            if v == 2.0 {
                assert_eq!(bins.assignments[i], 0);
            }
        }
    }

    #[test]
    fn identical_values_collapse_to_lowest_bin() {
        let values = vec![0.5; 10];
        let bins = mss_bins(&values, 4).unwrap();
        assert_eq!(bins.members[0].len(), 10);
        assert!(bins.members[1..].iter().all(Vec::is_empty));
    }

    #[test]
    fn large_distinct_population_is_balanced() {
        use rand::Rng;
        let mut rng = crate::rng::derive_rng(42, "test/mss-bins");
        let n = 20_000;
        let mut values: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        // shuffle so assignment order differs from sort order
        for i in (1..values.len()).rev() {
            values.swap(i, rng.random_range(0..=i));
        }
        let bins = mss_bins(&values, 4).unwrap();
        for m in &bins.members {
            let diff = (m.len() as f64 - n as f64 / 4.0).abs();
            assert!(diff <= n as f64 / 400.0, "bin size {} off", m.len());
        }
    }

    #[test]
    fn too_few_values_is_config_error() {
        assert!(matches!(
            mss_bins(&[0.1, 0.2], 4),
            Err(Error::Config(_))
        ));
    }
}
