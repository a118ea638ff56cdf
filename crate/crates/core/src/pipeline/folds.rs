//! Interaction-level fold management: six random equal parts, one held out
//! as the independent test set, and five cross-validation masks over the
//! rest.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;

pub const N_PARTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldPlan {
    version: u32,
    seed: u64,
    test_part: usize,
    parts: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn test_part(&self) -> usize {
        self.test_part
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    /// Interaction indices of the held-out test part.
    pub fn test_indices(&self) -> &[usize] {
        &self.parts[self.test_part]
    }

    /// All training interaction indices, ascending.
    pub fn training_indices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .parts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.test_part)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// The five cross-validation masks: each hides one non-test part and
    /// trains on the remaining four. Pairs are (train, validation)
    /// interaction indices.
    pub fn cv_folds(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let training_parts: Vec<usize> = (0..self.parts.len())
            .filter(|&i| i != self.test_part)
            .collect();
        training_parts
            .iter()
            .map(|&masked| {
                let valid = self.parts[masked].clone();
                let mut train: Vec<usize> = training_parts
                    .iter()
                    .filter(|&&p| p != masked)
                    .flat_map(|&p| self.parts[p].iter().copied())
                    .collect();
                train.sort_unstable();
                (train, valid)
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("fold serialization: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path, n_interactions: usize) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read folds {}: {e}", path.display())))?;
        let plan: FoldPlan = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("bad fold file {}: {e}", path.display())))?;
        plan.validate(n_interactions)?;
        Ok(plan)
    }

    fn validate(&self, n_interactions: usize) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Data(format!(
                "unsupported fold file version {}",
                self.version
            )));
        }
        if self.parts.len() != N_PARTS {
            return Err(Error::Data(format!(
                "fold plan has {} parts, expected {N_PARTS}",
                self.parts.len()
            )));
        }
        if self.test_part >= N_PARTS {
            return Err(Error::Data(format!("bad test part {}", self.test_part)));
        }
        let mut seen = vec![false; n_interactions];
        let mut count = 0;
        for part in &self.parts {
            for &i in part {
                if i >= n_interactions || seen[i] {
                    return Err(Error::Data(
                        "fold plan does not partition the interaction list".into(),
                    ));
                }
                seen[i] = true;
                count += 1;
            }
        }
        if count != n_interactions {
            return Err(Error::Data(format!(
                "fold plan covers {count} of {n_interactions} interactions"
            )));
        }
        let max = self.parts.iter().map(Vec::len).max().unwrap();
        let min = self.parts.iter().map(Vec::len).min().unwrap();
        if max - min > 1 {
            return Err(Error::Data("fold part sizes differ by more than 1".into()));
        }
        Ok(())
    }
}

/// Randomly partition `n_interactions` into six parts with sizes within 1
/// of each other; `test_part` names the held-out part. Deterministic in the
/// seed.
pub fn make_folds(n_interactions: usize, seed: u64, test_part: usize) -> Result<FoldPlan> {
    if n_interactions < N_PARTS {
        return Err(Error::Config(format!(
            "{n_interactions} interactions cannot fill {N_PARTS} folds"
        )));
    }
    if test_part >= N_PARTS {
        return Err(Error::Config(format!(
            "test part {test_part} out of range 0..{N_PARTS}"
        )));
    }
    let mut idx: Vec<usize> = (0..n_interactions).collect();
    let mut rng = derive_rng(seed, "folds");
    idx.shuffle(&mut rng);

    let base = n_interactions / N_PARTS;
    let remainder = n_interactions % N_PARTS;
    let mut parts = Vec::with_capacity(N_PARTS);
    let mut cursor = 0;
    for p in 0..N_PARTS {
        let size = base + usize::from(p < remainder);
        parts.push(idx[cursor..cursor + size].to_vec());
        cursor += size;
    }
    let plan = FoldPlan {
        version: 1,
        seed,
        test_part,
        parts,
    };
    plan.validate(n_interactions)?;
    Ok(plan)
}
