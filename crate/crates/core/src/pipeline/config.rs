//! Experiment configuration: a JSON file mirroring [`ExperimentConfig`].
//! Unknown keys are rejected; relative paths resolve against the config
//! file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedder::TrainParams;
use crate::error::{Error, Result};
use crate::featurize::RepresentationRecipe;
use crate::gbt::HyperParamGrid;
use crate::smiles_lang::{BpeParams, MAX_WORD_LEN};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub proteins: PathBuf,
    pub ligands: PathBuf,
    pub interactions: PathBuf,
}

/// Where the chemical-word embedding table comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Load a precomputed embedding file.
    Path(PathBuf),
    /// Train on a corpus with the given settings.
    Train(EmbedTrainConfig),
}

/// Corpus for in-pipeline vocabulary or embedding training.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum CorpusSource {
    /// SMILES of the ligands referenced by training-fold interactions.
    TrainLigands,
    /// External corpus file, one SMILES per line.
    File(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedTrainConfig {
    pub corpus: CorpusSource,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_negative")]
    pub negative: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_subsample")]
    pub subsample: f64,
}

fn default_dim() -> usize {
    100
}
fn default_window() -> usize {
    5
}
fn default_negative() -> usize {
    5
}
fn default_epochs() -> usize {
    5
}
fn default_min_count() -> u64 {
    5
}
fn default_learning_rate() -> f64 {
    0.025
}
fn default_subsample() -> f64 {
    1e-3
}

impl EmbedTrainConfig {
    pub fn to_params(&self, seed: u64) -> TrainParams {
        TrainParams {
            dim: self.dim,
            window: self.window,
            negative: self.negative,
            epochs: self.epochs,
            min_count: self.min_count,
            learning_rate: self.learning_rate,
            subsample: self.subsample,
            seed,
        }
    }
}

/// Where the BPE vocabulary comes from (required when the recipe's word
/// scheme is `bpe`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum BpeSource {
    Path(PathBuf),
    Train(BpeTrainConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpeTrainConfig {
    pub corpus: CorpusSource,
    pub target_size: usize,
    #[serde(default = "default_coverage")]
    pub character_coverage: f64,
    #[serde(default = "default_max_word_len")]
    pub max_word_len: usize,
}

fn default_coverage() -> f64 {
    0.99
}
fn default_max_word_len() -> usize {
    MAX_WORD_LEN
}

impl BpeTrainConfig {
    pub fn to_params(&self) -> BpeParams {
        BpeParams {
            target_size: self.target_size,
            character_coverage: self.character_coverage,
            max_word_len: self.max_word_len,
        }
    }
}

/// Alignment scoring overrides for the similarity matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwScoringConfig {
    pub gap_open: f64,
    pub gap_extend: f64,
    /// Substitution matrix file; the built-in BLOSUM62 when absent.
    pub matrix: Option<PathBuf>,
}

impl Default for SwScoringConfig {
    fn default() -> Self {
        Self {
            gap_open: 10.0,
            gap_extend: 0.5,
            matrix: None,
        }
    }
}

/// Fixed boosting settings that the grid does not search.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtOverrides {
    pub subsample: f64,
    pub colsample: f64,
}

impl Default for GbtOverrides {
    fn default() -> Self {
        Self {
            subsample: 1.0,
            colsample: 1.0,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Display name used in merged reports.
    #[serde(default)]
    pub label: Option<String>,
    pub dataset: DatasetPaths,
    /// Fold plan file; generated from the seed when absent.
    #[serde(default)]
    pub folds: Option<PathBuf>,
    /// Held-out part when folds are generated.
    #[serde(default)]
    pub test_part: Option<usize>,
    pub recipe: RepresentationRecipe,
    #[serde(default)]
    pub embedding: Option<EmbeddingSource>,
    #[serde(default)]
    pub bpe_vocab: Option<BpeSource>,
    #[serde(default)]
    pub protein_embedding: Option<PathBuf>,
    #[serde(default)]
    pub augmentation: Option<PathBuf>,
    /// Precomputed similarity matrix TSV; computed from sequences when
    /// absent.
    #[serde(default)]
    pub sw_matrix: Option<PathBuf>,
    #[serde(default)]
    pub sw_scoring: SwScoringConfig,
    #[serde(default)]
    pub grid: Option<HyperParamGrid>,
    #[serde(default)]
    pub gbt: GbtOverrides,
    /// Emit the sequence-similarity stratification table.
    #[serde(default = "default_true")]
    pub analyze_mss: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parse a config file; unknown keys are configuration errors and
    /// relative paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.dataset.proteins);
        fix(&mut self.dataset.ligands);
        fix(&mut self.dataset.interactions);
        if let Some(p) = &mut self.folds {
            fix(p);
        }
        match &mut self.embedding {
            Some(EmbeddingSource::Path(p)) => fix(p),
            Some(EmbeddingSource::Train(t)) => {
                if let CorpusSource::File(p) = &mut t.corpus {
                    fix(p);
                }
            }
            None => {}
        }
        match &mut self.bpe_vocab {
            Some(BpeSource::Path(p)) => fix(p),
            Some(BpeSource::Train(t)) => {
                if let CorpusSource::File(p) = &mut t.corpus {
                    fix(p);
                }
            }
            None => {}
        }
        if let Some(p) = &mut self.protein_embedding {
            fix(p);
        }
        if let Some(p) = &mut self.augmentation {
            fix(p);
        }
        if let Some(p) = &mut self.sw_matrix {
            fix(p);
        }
        if let Some(p) = &mut self.sw_scoring.matrix {
            fix(p);
        }
        fix(&mut self.out_dir);
    }

    /// Referenced files must exist and the recipe's artifact requirements
    /// must be satisfiable.
    pub fn validate(&self) -> Result<()> {
        let must_exist = |p: &Path, what: &str| -> Result<()> {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "{what} file does not exist: {}",
                    p.display()
                )));
            }
            Ok(())
        };
        must_exist(&self.dataset.proteins, "proteins")?;
        must_exist(&self.dataset.ligands, "ligands")?;
        must_exist(&self.dataset.interactions, "interactions")?;
        if let Some(p) = &self.folds {
            must_exist(p, "folds")?;
        }
        match &self.embedding {
            Some(EmbeddingSource::Path(p)) => must_exist(p, "embedding")?,
            Some(EmbeddingSource::Train(t)) => {
                if let CorpusSource::File(p) = &t.corpus {
                    must_exist(p, "embedding corpus")?;
                }
            }
            None => {
                if self.recipe.needs_embedding() {
                    return Err(Error::Config(
                        "recipe requires an embedding table but the config names none".into(),
                    ));
                }
            }
        }
        match &self.bpe_vocab {
            Some(BpeSource::Path(p)) => must_exist(p, "bpe vocabulary")?,
            Some(BpeSource::Train(t)) => {
                if let CorpusSource::File(p) = &t.corpus {
                    must_exist(p, "bpe corpus")?;
                }
            }
            None => {
                if self.recipe.needs_embedding()
                    && self.recipe.word_scheme == crate::featurize::WordScheme::Bpe
                {
                    return Err(Error::Config(
                        "word scheme bpe requires a bpe_vocab source".into(),
                    ));
                }
            }
        }
        if let Some(p) = &self.protein_embedding {
            must_exist(p, "protein embedding")?;
        } else if self.recipe.needs_protein_embedding() {
            return Err(Error::Config(
                "recipe requires a protein embedding file but the config names none".into(),
            ));
        }
        if let Some(p) = &self.augmentation {
            must_exist(p, "augmentation store")?;
        } else if self.recipe.needs_augmentation() {
            return Err(Error::Config(
                "recipe requires an augmentation store but the config names none".into(),
            ));
        }
        if let Some(p) = &self.sw_matrix {
            must_exist(p, "similarity matrix")?;
        }
        if let Some(p) = &self.sw_scoring.matrix {
            must_exist(p, "substitution matrix")?;
        }
        if let Some(grid) = &self.grid {
            grid.expand(&crate::gbt::GbtParams::default())?;
        }
        if let Some(tp) = self.test_part {
            if tp >= crate::pipeline::folds::N_PARTS {
                return Err(Error::Config(format!("test part {tp} out of range")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_minimal_dataset(dir: &Path) {
        fs::write(dir.join("proteins.tsv"), "protein_id\tsequence\nP\tACD\n").unwrap();
        fs::write(dir.join("ligands.tsv"), "ligand_id\tsmiles\nL\tCC\n").unwrap();
        fs::write(
            dir.join("interactions.tsv"),
            "protein_id\tligand_id\taffinity\tkind\tcensored\nP\tL\t5\tpkd\t0\n",
        )
        .unwrap();
    }

    fn minimal_config_json() -> &'static str {
        r#"{
            "dataset": {
                "proteins": "proteins.tsv",
                "ligands": "ligands.tsv",
                "interactions": "interactions.tsv"
            },
            "recipe": {
                "protein_mode": "none",
                "ligand_mode": "smilesvec",
                "word_scheme": {"kmer": 8},
                "strong_threshold": {"cutoff": 7.0, "direction": "larger_stronger"}
            },
            "embedding": {"train": {"corpus": "train_ligands"}},
            "seed": 42,
            "out_dir": "out"
        }"#
    }

    #[test]
    fn loads_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_dataset(dir.path());
        let path = dir.path().join("config.json");
        fs::write(&path, minimal_config_json()).unwrap();
        let config = ExperimentConfig::load(&path).unwrap();
        assert!(config.dataset.proteins.is_absolute());
        assert_eq!(config.seed, 42);
        assert!(config.analyze_mss);
        match config.embedding {
            Some(EmbeddingSource::Train(t)) => {
                assert_eq!(t.corpus, CorpusSource::TrainLigands);
                assert_eq!(t.dim, 100);
                assert_eq!(t.window, 5);
            }
            other => panic!("unexpected embedding source {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_dataset(dir.path());
        let path = dir.path().join("config.json");
        let bad = minimal_config_json().replace("\"seed\": 42", "\"seed\": 42, \"typo\": 1");
        fs::write(&path, bad).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("typo"), "{err}");
    }

    #[test]
    fn missing_files_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, minimal_config_json()).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("proteins"), "{err}");
    }

    #[test]
    fn recipe_artifact_requirements_checked() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_dataset(dir.path());
        let path = dir.path().join("config.json");
        // smilesvec ligand mode without any embedding source
        let bad = minimal_config_json().replace(
            "\"embedding\": {\"train\": {\"corpus\": \"train_ligands\"}},",
            "",
        );
        fs::write(&path, bad).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("embedding"), "{err}");
    }
}
