//! Evaluation metrics and analyses.
//!
//! - [`concordance_index`] — pairwise ranking agreement over pairs with
//!   distinct true affinities (prediction ties count half)
//! - [`mse`] — mean squared error with compensated summation
//! - [`mss`] / [`mss_bins`] — maximum sequence similarity of each test pair
//!   to the training partners of its ligand, and quartile stratification
//! - [`paired_t_test`] — two-sided paired t over per-run scores
//! - [`ward_cluster`] — agglomerative clustering minimizing the
//!   within-cluster variance increase

mod cluster;
mod mss;

pub use cluster::{ward_cluster, MergeStep, WardClustering};
pub use mss::{mss, mss_bins, MssBins};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Parallel lists of true affinities, predictions, and pair identifiers.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    y: Vec<f64>,
    pred: Vec<f64>,
    protein_ids: Vec<String>,
    ligand_ids: Vec<String>,
}

impl PredictionSet {
    pub fn new(
        y: Vec<f64>,
        pred: Vec<f64>,
        protein_ids: Vec<String>,
        ligand_ids: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty prediction set".into()));
        }
        if pred.len() != n || protein_ids.len() != n || ligand_ids.len() != n {
            return Err(Error::InvalidInput(format!(
                "prediction set lists disagree in length: {n}, {}, {}, {}",
                pred.len(),
                protein_ids.len(),
                ligand_ids.len()
            )));
        }
        if y.iter().chain(pred.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite value in prediction set".into(),
            ));
        }
        Ok(Self {
            y,
            pred,
            protein_ids,
            ligand_ids,
        })
    }

    /// Metric-only set with placeholder pair identifiers.
    pub fn from_values(y: Vec<f64>, pred: Vec<f64>) -> Result<Self> {
        let protein_ids = (0..y.len()).map(|i| format!("p{i}")).collect();
        let ligand_ids = (0..y.len()).map(|i| format!("l{i}")).collect();
        Self::new(y, pred, protein_ids, ligand_ids)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn true_affinities(&self) -> &[f64] {
        &self.y
    }

    pub fn predictions(&self) -> &[f64] {
        &self.pred
    }

    pub fn protein_ids(&self) -> &[String] {
        &self.protein_ids
    }

    pub fn ligand_ids(&self) -> &[String] {
        &self.ligand_ids
    }

    /// Subset by row indices.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.y[i]).collect(),
            idx.iter().map(|&i| self.pred[i]).collect(),
            idx.iter().map(|&i| self.protein_ids[i].clone()).collect(),
            idx.iter().map(|&i| self.ligand_ids[i].clone()).collect(),
        )
    }
}

fn step(m: f64) -> f64 {
    if m > 0.0 {
        1.0
    } else if m < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Concordance index over all ordered pairs with strictly larger true
/// affinity: the mean of the step function of the prediction difference.
/// Pairs with tied true affinities are excluded from the normalization.
///
/// Dispatches to a rank-counting path for large inputs; both paths agree
/// exactly.
pub fn concordance_index(preds: &PredictionSet) -> Result<f64> {
    if preds.len() > 512 {
        concordance_index_fast(preds)
    } else {
        concordance_index_all_pairs(preds)
    }
}

/// Direct O(n^2) evaluation of the definition.
pub fn concordance_index_all_pairs(preds: &PredictionSet) -> Result<f64> {
    let y = &preds.y;
    let b = &preds.pred;
    let mut z = 0u64;
    let mut sum = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] > y[j] {
                z += 1;
                sum += step(b[i] - b[j]);
            }
        }
    }
    if z == 0 {
        return Err(Error::InvalidInput(
            "concordance index undefined: all true affinities are equal".into(),
        ));
    }
    Ok(sum / z as f64)
}

/// O(n log n) evaluation: process rows in increasing true affinity, count
/// already-inserted predictions below / equal with a Fenwick tree. Rows
/// with tied true affinity are inserted as a block so they never pair.
pub fn concordance_index_fast(preds: &PredictionSet) -> Result<f64> {
    let n = preds.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| preds.y[a].partial_cmp(&preds.y[b]).unwrap());

    // compress prediction values to ranks
    let mut pred_sorted: Vec<f64> = preds.pred.clone();
    pred_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pred_sorted.dedup();
    let rank =
        |v: f64| -> usize { pred_sorted.partition_point(|&x| x < v) };

    let mut below = Fenwick::new(pred_sorted.len());
    let mut equal = Fenwick::new(pred_sorted.len());
    let mut wins = 0u64; // counted in halves
    let mut z = 0u64;
    let mut inserted = 0u64;

    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && preds.y[order[j]] == preds.y[order[i]] {
            j += 1;
        }
        for &row in &order[i..j] {
            let r = rank(preds.pred[row]);
            let lower = below.prefix(r); // strictly below r
            let eq = equal.at(r);
            wins += 2 * lower + eq;
            z += inserted;
        }
        for &row in &order[i..j] {
            let r = rank(preds.pred[row]);
            below.add(r, 1);
            equal.add_point(r, 1);
        }
        inserted += (j - i) as u64;
        i = j;
    }
    if z == 0 {
        return Err(Error::InvalidInput(
            "concordance index undefined: all true affinities are equal".into(),
        ));
    }
    Ok((wins as f64 / 2.0) / z as f64)
}

struct Fenwick {
    tree: Vec<u64>,
    point: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
            point: vec![0; n],
        }
    }

    /// Count of items with rank strictly less than `r`.
    fn prefix(&self, r: usize) -> u64 {
        let mut i = r; // sum of ranks 0..r-1 stored at 1-based positions
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn add(&mut self, r: usize, v: u64) {
        let mut i = r + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    fn at(&self, r: usize) -> u64 {
        self.point[r]
    }

    fn add_point(&mut self, r: usize, v: u64) {
        self.point[r] += v;
    }
}

/// Mean squared error with Neumaier-compensated summation.
pub fn mse(preds: &PredictionSet) -> f64 {
    mse_slices(&preds.pred, &preds.y)
}

pub(crate) fn mse_slices(pred: &[f64], y: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (p, t) in pred.iter().zip(y) {
        let d = p - t;
        let x = d * d;
        let s = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - s) + x;
        } else {
            comp += (x - s) + sum;
        }
        sum = s;
    }
    (sum + comp) / y.len() as f64
}

/// Outcome of a paired t-test on per-run metric lists.
#[derive(Debug, Clone, PartialEq)]
pub enum TTest {
    /// Every paired difference is zero.
    Indistinguishable,
    /// Differences are constant but nonzero: the statistic diverges.
    DegenerateZeroVariance { mean_diff: f64 },
    Stat { t: f64, p: f64, df: usize },
}

/// Two-sided paired t-test of `scores_a` against `scores_b`.
pub fn paired_t_test(scores_a: &[f64], scores_b: &[f64]) -> Result<TTest> {
    let n = scores_a.len();
    if n < 2 || scores_b.len() != n {
        return Err(Error::InvalidInput(format!(
            "paired t-test needs two equal-length lists of at least 2 scores, \
             got {n} and {}",
            scores_b.len()
        )));
    }
    let d: Vec<f64> = scores_a.iter().zip(scores_b).map(|(a, b)| a - b).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite score difference".into()));
    }
    if d.iter().all(|&v| v == 0.0) {
        return Ok(TTest::Indistinguishable);
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(TTest::DegenerateZeroVariance { mean_diff: mean });
    }
    let se = (var / n as f64).sqrt();
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Internal(format!("t distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTest::Stat { t, p, df: n - 1 })
}

/// Mean and population standard deviation of a score list.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
