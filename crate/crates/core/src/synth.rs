//! Seeded synthetic benchmark generator.
//!
//! Produces a dataset whose affinities are a noisy function of quantities
//! the feature pipeline can actually see, so end-to-end accuracy has a
//! computable floor:
//!
//! - proteins fall into sequence clusters (mutated copies of a cluster
//!   base), so normalized similarity recovers cluster membership;
//! - ligand SMILES are built from "signal" characters whose planted word
//!   vectors encode a per-ligand scalar, plus identity characters that
//!   fingerprint the ligand;
//! - affinity = slope * (ligand vector signal) + cluster offset +
//!   pair_effect * r(ligand, cluster) + gaussian noise, with r = +-1 drawn
//!   per (ligand, cluster).
//!
//! The r-term is only predictable for a test pair (P, L) when some training
//! interaction shows L together with P's cluster; [`SynthData::noise_floor`]
//! counts the uncovered test pairs and returns the exact best achievable
//! MSE, `noise_sd^2 + pair_effect^2 * uncovered_fraction`. Uncovered pairs
//! are also exactly the low-MSS pairs, which makes the similarity
//! stratification trend visible by construction.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::embedder::{smilesvec, EmbeddingTable};
use crate::error::Result;
use crate::pipeline::dataset::{AffinityKind, InteractionDataset, Ligand};
use crate::rng::derive_rng;
use crate::seqsim::ProteinSequence;
use crate::smiles_lang::{tokenize_kmer, SmilesString};

const AMINO: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";
const SIGNAL_CHARS: &[u8] = b"abcdefghijklmnop"; // 16, planted scalar values

/// Dedicated identity character for one ligand (a printable block with
/// plenty of room; SMILES strings are opaque here).
fn id_char(ligand: usize) -> char {
    char::from_u32(0x4E00 + ligand as u32).expect("in range")
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub n_proteins: usize,
    pub n_clusters: usize,
    pub n_ligands: usize,
    pub partners_per_ligand: usize,
    /// Standard deviation of the additive gaussian noise.
    pub noise_sd: f64,
    /// Magnitude of the per-(ligand, cluster) interaction term.
    pub pair_effect: f64,
    /// Magnitude of the per-(protein, ligand) noise term. Pairs never
    /// repeat between training and test, so this is never predictable.
    pub pair_noise: f64,
    /// Slope on the planted ligand scalar.
    pub ligand_slope: f64,
    /// Per-ligand partner sampling weight decay across clusters: cluster c
    /// is drawn proportionally to decay^c, so later clusters are observed
    /// rarely. Rare-cluster test pairs are exactly the pairs with low
    /// similarity to their ligand's training partners.
    pub cluster_weight_decay: f64,
    /// Half-width of the uniform per-protein offset around the cluster
    /// ladder.
    pub protein_jitter: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_proteins: 40,
            n_clusters: 8,
            n_ligands: 120,
            partners_per_ligand: 15,
            noise_sd: 0.2,
            pair_effect: 0.55,
            pair_noise: 1.1,
            ligand_slope: 2.0,
            cluster_weight_decay: 0.7,
            protein_jitter: 1.0,
            seed: 1234,
        }
    }
}

pub struct SynthData {
    pub dataset: InteractionDataset,
    /// Planted chemical-word vectors (single-character words, k-mer k=1).
    pub embedding: EmbeddingTable,
    pub protein_cluster: Vec<usize>,
    /// Noise-free affinity per interaction, in interaction order.
    pub true_signal: Vec<f64>,
    params: SynthParams,
    /// r value per (ligand, cluster), row-major over ligands.
    pair_response: Vec<f64>,
}

pub struct SynthPaths {
    pub proteins: PathBuf,
    pub ligands: PathBuf,
    pub interactions: PathBuf,
    pub embedding: PathBuf,
}

fn normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl SynthData {
    pub fn generate(params: &SynthParams) -> Result<Self> {
        assert!(params.n_proteins % params.n_clusters == 0);
        let per_cluster = params.n_proteins / params.n_clusters;

        // Protein sequences: a random base per cluster, members mutated at
        // 10% of positions.
        let mut rng = derive_rng(params.seed, "synth/sequences");
        let seq_len = 60;
        let mut proteins = Vec::with_capacity(params.n_proteins);
        let mut protein_cluster = Vec::with_capacity(params.n_proteins);
        for c in 0..params.n_clusters {
            let base: Vec<u8> = (0..seq_len)
                .map(|_| AMINO[rng.random_range(0..AMINO.len())])
                .collect();
            for m in 0..per_cluster {
                let mut seq = base.clone();
                for _ in 0..6 {
                    let pos = rng.random_range(0..seq_len);
                    let mut sub = AMINO[rng.random_range(0..AMINO.len())];
                    while sub == seq[pos] {
                        sub = AMINO[rng.random_range(0..AMINO.len())];
                    }
                    seq[pos] = sub;
                }
                let id = format!("P{:03}", c * per_cluster + m);
                proteins.push(ProteinSequence::new(
                    id,
                    String::from_utf8(seq).expect("ascii"),
                )?);
                protein_cluster.push(c);
            }
        }

        // Planted word vectors: signal characters carry a scalar in
        // coordinate 0; each ligand's identity character carries a unique
        // sortable scalar in coordinate 1 plus a random fingerprint.
        let dim = 100;
        let mut rng = derive_rng(params.seed, "synth/embedding");
        let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
        for (i, &c) in SIGNAL_CHARS.iter().enumerate() {
            let mut v = vec![0.0; dim];
            v[0] = 3.0 * i as f64 / (SIGNAL_CHARS.len() - 1) as f64;
            entries.push(((c as char).to_string(), v));
        }
        for l in 0..params.n_ligands {
            let mut v = vec![0.0; dim];
            v[1] = (l + 1) as f64 / params.n_ligands as f64;
            for x in v.iter_mut().skip(2).take(24) {
                *x = rng.random_range(-0.5..0.5);
            }
            entries.push((id_char(l).to_string(), v));
        }
        let embedding = EmbeddingTable::from_entries(dim, entries)?;

        // Ligands: 16 signal characters clustered around a per-ligand
        // target plus 4 copies of the ligand's identity character.
        let mut rng = derive_rng(params.seed, "synth/ligands");
        let mut ligands = Vec::with_capacity(params.n_ligands);
        let mut ligand_signal = Vec::with_capacity(params.n_ligands);
        for l in 0..params.n_ligands {
            let target: f64 = rng.random_range(0.0..=(SIGNAL_CHARS.len() - 1) as f64);
            let mut text = String::with_capacity(20);
            for _ in 0..16 {
                let idx = (target + 2.0 * normal(&mut rng))
                    .round()
                    .clamp(0.0, (SIGNAL_CHARS.len() - 1) as f64) as usize;
                text.push(SIGNAL_CHARS[idx] as char);
            }
            for _ in 0..4 {
                text.push(id_char(l));
            }
            let smiles = SmilesString::new(text)?;
            // the scalar the model can recover: coordinate 0 of the actual
            // ligand vector under k-mer k=1 segmentation
            let words = tokenize_kmer(&smiles, 1)?;
            let vec = smilesvec(&words, &embedding);
            ligand_signal.push(vec.values[0]);
            ligands.push(Ligand {
                id: format!("L{l:03}"),
                smiles,
            });
        }

        // Protein affinity offsets: a wide per-cluster ladder (cluster
        // identity dominates the ranking) plus per-protein jitter; the
        // per-(ligand, cluster) responses are random signs.
        let mut rng = derive_rng(params.seed, "synth/effects");
        let protein_offset: Vec<f64> = (0..params.n_proteins)
            .map(|p| {
                6.0 * protein_cluster[p] as f64
                    + rng.random_range(-params.protein_jitter..=params.protein_jitter)
            })
            .collect();
        let pair_response: Vec<f64> = (0..params.n_ligands * params.n_clusters)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();

        // Interactions: each ligand binds a weighted random protein subset;
        // later clusters are sampled rarely.
        let mut rng = derive_rng(params.seed, "synth/interactions");
        let mut noise_rng = derive_rng(params.seed, "synth/noise");
        let mut rows = Vec::with_capacity(params.n_ligands * params.partners_per_ligand);
        let mut true_signal = Vec::with_capacity(params.n_ligands * params.partners_per_ligand);
        for l in 0..params.n_ligands {
            let mut weights: Vec<f64> = (0..params.n_proteins)
                .map(|p| params.cluster_weight_decay.powi(protein_cluster[p] as i32))
                .collect();
            let mut chosen = Vec::with_capacity(params.partners_per_ligand);
            for _ in 0..params.partners_per_ligand {
                let total: f64 = weights.iter().sum();
                let mut t = rng.random::<f64>() * total;
                let mut pick = 0;
                for (p, &w) in weights.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    if t < w {
                        pick = p;
                        break;
                    }
                    t -= w;
                    pick = p;
                }
                weights[pick] = 0.0;
                chosen.push(pick);
            }
            for p in chosen {
                let c = protein_cluster[p];
                let signal = params.ligand_slope * ligand_signal[l]
                    + protein_offset[p]
                    + params.pair_effect * pair_response[l * params.n_clusters + c];
                let pair_sign = if noise_rng.random::<bool>() { 1.0 } else { -1.0 };
                let affinity = signal
                    + params.pair_noise * pair_sign
                    + params.noise_sd * normal(&mut noise_rng);
                true_signal.push(signal);
                rows.push((
                    proteins[p].id().to_string(),
                    ligands[l].id.clone(),
                    affinity,
                    false,
                ));
            }
        }

        let dataset = InteractionDataset::new(proteins, ligands, rows, AffinityKind::PKd)?;
        Ok(Self {
            dataset,
            embedding,
            protein_cluster,
            true_signal,
            params: params.clone(),
            pair_response,
        })
    }

    /// Exact best achievable test MSE for a given split: the white-noise
    /// variance, plus the per-pair noise variance (pairs never repeat, so
    /// that term can never be predicted), plus the pair-effect variance on
    /// test pairs whose (ligand, cluster) combination never occurs in
    /// training.
    pub fn noise_floor(&self, training: &[usize], test: &[usize]) -> f64 {
        let covered: HashSet<(usize, usize)> = training
            .iter()
            .map(|&i| {
                let r = &self.dataset.interactions()[i];
                (r.ligand, self.protein_cluster[r.protein])
            })
            .collect();
        let uncovered = test
            .iter()
            .filter(|&&i| {
                let r = &self.dataset.interactions()[i];
                !covered.contains(&(r.ligand, self.protein_cluster[r.protein]))
            })
            .count();
        let f_unc = uncovered as f64 / test.len() as f64;
        self.params.noise_sd.powi(2)
            + self.params.pair_noise.powi(2)
            + self.params.pair_effect.powi(2) * f_unc
    }

    /// Copy with selected affinities replaced, for leakage checks.
    pub fn poisoned(&self, idx: &[usize], values: &[f64]) -> Result<Self> {
        Ok(Self {
            dataset: self.dataset.with_affinities(idx, values)?,
            embedding: self.embedding.clone(),
            protein_cluster: self.protein_cluster.clone(),
            true_signal: self.true_signal.clone(),
            params: self.params.clone(),
            pair_response: self.pair_response.clone(),
        })
    }

    /// Median affinity, a sensible strong-binder cutoff for this data.
    pub fn median_affinity(&self) -> f64 {
        let mut values: Vec<f64> = self
            .dataset
            .interactions()
            .iter()
            .map(|r| r.affinity)
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values[values.len() / 2]
    }

    /// Write the dataset TSVs and the planted embedding file.
    pub fn write_files(&self, dir: &Path) -> Result<SynthPaths> {
        std::fs::create_dir_all(dir)?;
        self.dataset.save_tsv(dir)?;
        let embedding = dir.join("embedding.txt");
        self.embedding.save(&embedding)?;
        Ok(SynthPaths {
            proteins: dir.join("proteins.tsv"),
            ligands: dir.join("ligands.tsv"),
            interactions: dir.join("interactions.tsv"),
            embedding,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::folds::make_folds;

    #[test]
    fn generation_is_deterministic() {
        let params = SynthParams {
            n_proteins: 8,
            n_clusters: 4,
            n_ligands: 10,
            partners_per_ligand: 4,
            ..SynthParams::default()
        };
        let a = SynthData::generate(&params).unwrap();
        let b = SynthData::generate(&params).unwrap();
        assert_eq!(a.dataset.n_interactions(), 40);
        for (x, y) in a
            .dataset
            .interactions()
            .iter()
            .zip(b.dataset.interactions())
        {
            assert_eq!(x, y);
        }
        for w in a.embedding.words() {
            assert_eq!(a.embedding.vector(w), b.embedding.vector(w));
        }
    }

    #[test]
    fn shape_matches_parameters() {
        let params = SynthParams::default();
        let d = SynthData::generate(&params).unwrap();
        assert_eq!(d.dataset.n_proteins(), 40);
        assert_eq!(d.dataset.n_ligands(), 120);
        assert_eq!(d.dataset.n_interactions(), 40 * 45); // 120 * 15
        assert_eq!(d.protein_cluster.len(), 40);
    }

    #[test]
    fn noise_floor_accounts_for_uncovered_pairs() {
        let params = SynthParams::default();
        let d = SynthData::generate(&params).unwrap();
        let folds = make_folds(d.dataset.n_interactions(), 7, 0).unwrap();
        let training = folds.training_indices();
        let floor = d.noise_floor(&training, folds.test_indices());
        // at least the unpredictable noise, at most that plus the full
        // pair effect
        let base = params.noise_sd.powi(2) + params.pair_noise.powi(2);
        assert!(floor >= base);
        assert!(floor <= base + params.pair_effect.powi(2));
        // with everything in training the cell term vanishes and only the
        // never-predictable noise remains
        let all: Vec<usize> = (0..d.dataset.n_interactions()).collect();
        let f = d.noise_floor(&all, &all);
        assert_eq!(
            f,
            params.noise_sd.powi(2) + params.pair_noise.powi(2)
        );
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let params = SynthParams {
            n_proteins: 8,
            n_clusters: 4,
            n_ligands: 12,
            partners_per_ligand: 4,
            ..SynthParams::default()
        };
        let d = SynthData::generate(&params).unwrap();
        let paths = d.write_files(dir.path()).unwrap();
        let loaded = InteractionDataset::load_tsv(
            &paths.proteins,
            &paths.ligands,
            &paths.interactions,
        )
        .unwrap();
        assert_eq!(loaded.n_interactions(), d.dataset.n_interactions());
        let table = EmbeddingTable::load(&paths.embedding).unwrap();
        assert_eq!(table.dim(), 100);
        for w in d.embedding.words() {
            assert_eq!(table.vector(w).unwrap(), d.embedding.vector(w).unwrap());
        }
    }
}
