//! The train/evaluate protocol: artifact preparation, cross-validated grid
//! search on the five training folds, five models each masking one training
//! fold, test-set evaluation with mean and standard deviation, and the
//! sequence-similarity stratification table.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedder::{train_skipgram, EmbeddingTable};
use crate::error::{Error, Result};
use crate::evalkit::{
    concordance_index, mean_std, mse, mss, mss_bins, PredictionSet,
};
use crate::featurize::{
    AugmentationStore, FeatureBuilder, FeatureInputs, RepresentationRecipe, WordScheme,
};
use crate::gbt::{fit, grid_search_cv, GbtParams, GridPoint, TreeEnsemble};
use crate::pipeline::config::{
    BpeSource, CorpusSource, EmbeddingSource, ExperimentConfig, SwScoringConfig,
};
use crate::pipeline::dataset::{AffinityKind, InteractionDataset};
use crate::pipeline::folds::{make_folds, FoldPlan};
use crate::seqsim::{normalized_sw_matrix, Scoring, SimilarityMatrix, SubstitutionMatrix};
use crate::smiles_lang::{read_smiles_corpus, train_bpe, BpeVocabulary, ChemWord, SmilesString};

/// Every artifact an experiment needs, loaded or trained. Training-derived
/// artifacts (vocabulary, embedding table) are written into the output
/// directory as they are produced.
pub struct ExperimentContext {
    pub config: ExperimentConfig,
    pub dataset: InteractionDataset,
    pub folds: FoldPlan,
    pub embedding: Option<EmbeddingTable>,
    pub bpe: Option<BpeVocabulary>,
    pub sim: Option<SimilarityMatrix>,
    pub protein_embedding: Option<EmbeddingTable>,
    pub augmentation: Option<AugmentationStore>,
}

fn scoring_from_config(config: &SwScoringConfig) -> Result<Scoring> {
    let matrix = match &config.matrix {
        Some(path) => SubstitutionMatrix::load(path)?,
        None => SubstitutionMatrix::blosum62(),
    };
    Ok(Scoring {
        matrix,
        gap_open: config.gap_open,
        gap_extend: config.gap_extend,
    })
}

/// SMILES corpus for in-pipeline training: an external file, or the
/// training folds' ligands (never test-only ligands).
fn corpus_smiles(
    source: &CorpusSource,
    dataset: &InteractionDataset,
    training: &[usize],
) -> Result<Vec<SmilesString>> {
    match source {
        CorpusSource::File(path) => read_smiles_corpus(path),
        CorpusSource::TrainLigands => {
            let mut seen = vec![false; dataset.n_ligands()];
            for &i in training {
                seen[dataset.interactions()[i].ligand] = true;
            }
            Ok(dataset
                .ligands()
                .iter()
                .zip(&seen)
                .filter(|(_, &s)| s)
                .map(|(l, _)| l.smiles.clone())
                .collect())
        }
    }
}

/// Load or train everything the config's recipe requires.
pub fn prepare(config: &ExperimentConfig) -> Result<ExperimentContext> {
    let dataset = InteractionDataset::load_tsv(
        &config.dataset.proteins,
        &config.dataset.ligands,
        &config.dataset.interactions,
    )?;
    config.recipe.validate(&dataset)?;
    fs::create_dir_all(&config.out_dir)?;

    let folds = match &config.folds {
        Some(path) => FoldPlan::load(path, dataset.n_interactions())?,
        None => make_folds(
            dataset.n_interactions(),
            config.seed,
            config.test_part.unwrap_or(0),
        )?,
    };
    let training = folds.training_indices();

    let bpe = if config.recipe.needs_embedding()
        && config.recipe.word_scheme == WordScheme::Bpe
    {
        let source = config.bpe_vocab.as_ref().ok_or_else(|| {
            Error::Config("word scheme bpe requires a bpe_vocab source".into())
        })?;
        let vocab = match source {
            BpeSource::Path(path) => BpeVocabulary::load(path)?,
            BpeSource::Train(train) => {
                let corpus = corpus_smiles(&train.corpus, &dataset, &training)?;
                let vocab = train_bpe(&corpus, &train.to_params())?;
                vocab.save(&config.out_dir.join("vocab.txt"))?;
                vocab
            }
        };
        Some(vocab)
    } else {
        None
    };

    let embedding = match &config.embedding {
        None => None,
        Some(EmbeddingSource::Path(path)) => Some(EmbeddingTable::load(path)?),
        Some(EmbeddingSource::Train(train)) => {
            let corpus = corpus_smiles(&train.corpus, &dataset, &training)?;
            let tokenized: Vec<Vec<ChemWord>> = corpus
                .iter()
                .map(|s| config.recipe.word_scheme.tokenize(s, bpe.as_ref()))
                .collect::<Result<_>>()?;
            let table = train_skipgram(&tokenized, &train.to_params(config.seed))?;
            table.save(&config.out_dir.join("embedding.txt"))?;
            Some(table)
        }
    };

    let sim = if config.recipe.needs_sw() || config.analyze_mss {
        let sim = match &config.sw_matrix {
            Some(path) => {
                let sim = SimilarityMatrix::load_tsv(path)?;
                let ids: Vec<&str> = dataset.proteins().iter().map(|p| p.id()).collect();
                let sim_ids: Vec<&str> = sim.ids().iter().map(String::as_str).collect();
                if ids != sim_ids {
                    return Err(Error::Config(format!(
                        "similarity matrix {} does not list the dataset proteins in order",
                        path.display()
                    )));
                }
                sim
            }
            None => {
                let scoring = scoring_from_config(&config.sw_scoring)?;
                normalized_sw_matrix(dataset.proteins(), &scoring)?
            }
        };
        Some(sim)
    } else {
        None
    };

    let protein_embedding = match &config.protein_embedding {
        Some(path) if config.recipe.needs_protein_embedding() => {
            Some(EmbeddingTable::load(path)?)
        }
        _ => None,
    };

    let augmentation = match &config.augmentation {
        Some(path) if config.recipe.needs_augmentation() => {
            Some(AugmentationStore::load(path, &dataset)?)
        }
        _ => None,
    };

    Ok(ExperimentContext {
        config: config.clone(),
        dataset,
        folds,
        embedding,
        bpe,
        sim,
        protein_embedding,
        augmentation,
    })
}

/// Feature matrices and fold bookkeeping for one prepared experiment.
pub struct PreparedFeatures<'a> {
    pub builder: FeatureBuilder<'a>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// (train, validation) positions into the training row list, one per
    /// cross-validation mask.
    pub cv_positions: Vec<(Vec<usize>, Vec<usize>)>,
}

impl ExperimentContext {
    pub fn build_features(&self) -> Result<PreparedFeatures<'_>> {
        let train_idx = self.folds.training_indices();
        let test_idx = self.folds.test_indices().to_vec();
        let builder = FeatureBuilder::new(
            &self.dataset,
            &self.config.recipe,
            &train_idx,
            FeatureInputs {
                embedding: self.embedding.as_ref(),
                bpe: self.bpe.as_ref(),
                sim: if self.config.recipe.needs_sw() {
                    self.sim.as_ref()
                } else {
                    None
                },
                protein_embedding: self.protein_embedding.as_ref(),
                augmentation: self.augmentation.as_ref(),
                seed: self.config.seed,
            },
        )?;
        builder.save_protein_vectors(&self.config.out_dir.join("protein_vectors.tsv"))?;

        let pos_of: HashMap<usize, usize> = train_idx
            .iter()
            .enumerate()
            .map(|(pos, &idx)| (idx, pos))
            .collect();
        let cv_positions = self
            .folds
            .cv_folds()
            .iter()
            .map(|(train, valid)| {
                (
                    train.iter().map(|i| pos_of[i]).collect(),
                    valid.iter().map(|i| pos_of[i]).collect(),
                )
            })
            .collect();
        Ok(PreparedFeatures {
            builder,
            train_idx,
            test_idx,
            cv_positions,
        })
    }

    fn base_params(&self) -> GbtParams {
        GbtParams {
            subsample: self.config.gbt.subsample,
            colsample: self.config.gbt.colsample,
            seed: self.config.seed,
            ..GbtParams::default()
        }
    }

    /// Grid search over the five training folds; writes `best_params.json`
    /// and `cv_table.tsv`.
    pub fn tune(&self, feats: &PreparedFeatures<'_>) -> Result<TuneOutcome> {
        let x = feats.builder.build_matrix(&feats.train_idx);
        let y = feats.builder.targets(&feats.train_idx);
        let grid = self.config.grid.clone().unwrap_or_default();
        let outcome = grid_search_cv(
            &x.view(),
            &y,
            &feats.cv_positions,
            &grid,
            &self.base_params(),
        )?;

        let json = serde_json::to_string_pretty(&outcome.best)
            .map_err(|e| Error::Internal(format!("params serialization: {e}")))?;
        fs::write(self.config.out_dir.join("best_params.json"), json)?;

        let mut table = String::from(
            "learning_rate\trounds\tmax_depth\tlambda\tgamma\tmin_child_weight\tmean_mse\n",
        );
        for p in &outcome.table {
            writeln!(
                table,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.params.learning_rate,
                p.params.rounds,
                p.params.max_depth,
                p.params.lambda,
                p.params.gamma,
                p.params.min_child_weight,
                p.mean_mse
            )
            .expect("string write");
        }
        fs::write(self.config.out_dir.join("cv_table.tsv"), table)?;
        Ok(TuneOutcome {
            best: outcome.best,
            table: outcome.table,
        })
    }

    /// Train the five reporting models, each masking one training fold;
    /// writes `models/model_k.json`.
    pub fn train_models(
        &self,
        feats: &PreparedFeatures<'_>,
        params: &GbtParams,
    ) -> Result<Vec<TreeEnsemble>> {
        let x = feats.builder.build_matrix(&feats.train_idx);
        let y = feats.builder.targets(&feats.train_idx);
        let models_dir = self.config.out_dir.join("models");
        fs::create_dir_all(&models_dir)?;
        let mut models = Vec::with_capacity(feats.cv_positions.len());
        for (k, (train_pos, _)) in feats.cv_positions.iter().enumerate() {
            let (data, rows) = x.view().gather(train_pos);
            let sub = crate::gbt::MatrixView::new(&data, rows, x.cols())?;
            let sub_y: Vec<f64> = train_pos.iter().map(|&p| y[p]).collect();
            let model = fit(&sub, &sub_y, params)?;
            model.save(&models_dir.join(format!("model_{}.json", k + 1)))?;
            models.push(model);
        }
        Ok(models)
    }

    /// Test-set scores per model. Rankings respect the dataset's affinity
    /// direction (lists are jointly negated for smaller-is-stronger data).
    pub fn evaluate(
        &self,
        feats: &PreparedFeatures<'_>,
        models: &[TreeEnsemble],
    ) -> Result<Vec<RunScore>> {
        let x_test = feats.builder.build_matrix(&feats.test_idx);
        let y_test = feats.builder.targets(&feats.test_idx);
        let mut runs = Vec::with_capacity(models.len());
        for (k, model) in models.iter().enumerate() {
            let preds = model.predict(&x_test.view())?;
            let set = ranking_set(self.dataset.kind(), &y_test, &preds)?;
            runs.push(RunScore {
                model: k + 1,
                ci: concordance_index(&set)?,
                mse: mse(&set),
            });
        }
        Ok(runs)
    }

    /// Per-MSS-bin metrics over the five models; writes `mss_bins.csv`.
    pub fn analyze_mss(
        &self,
        feats: &PreparedFeatures<'_>,
        models: &[TreeEnsemble],
    ) -> Result<MssReport> {
        let sim = self.sim.as_ref().ok_or_else(|| {
            Error::Config("MSS analysis requires the similarity matrix".into())
        })?;
        let x_test = feats.builder.build_matrix(&feats.test_idx);
        let y_test = feats.builder.targets(&feats.test_idx);
        let (protein_ids, ligand_ids) = self.pair_ids(&feats.test_idx);
        let training_pairs: Vec<(String, String)> = feats
            .train_idx
            .iter()
            .map(|&i| {
                let r = &self.dataset.interactions()[i];
                (
                    self.dataset.protein_id(r.protein).to_string(),
                    self.dataset.ligand_id(r.ligand).to_string(),
                )
            })
            .collect();

        // MSS values do not depend on predictions; use the truth as a
        // placeholder prediction list.
        let probe = PredictionSet::new(
            y_test.clone(),
            y_test.clone(),
            protein_ids.clone(),
            ligand_ids.clone(),
        )?;
        let values = mss(&probe, sim, &training_pairs)?;
        let bins = mss_bins(&values, 4)?;

        let mut per_model_preds = Vec::with_capacity(models.len());
        for model in models {
            per_model_preds.push(model.predict(&x_test.view())?);
        }

        let mut bin_reports = Vec::with_capacity(bins.n_bins());
        for b in 0..bins.n_bins() {
            let members = &bins.members[b];
            let (lo, hi) = bins.range(b, &values);
            if members.is_empty() {
                bin_reports.push(MssBinReport {
                    bin: b,
                    lo,
                    hi,
                    count: 0,
                    mse_mean: None,
                    mse_std: None,
                    ci_mean: None,
                    ci_std: None,
                });
                continue;
            }
            let mut mses = Vec::with_capacity(models.len());
            let mut cis: Vec<f64> = Vec::new();
            let mut ci_defined = true;
            for preds in &per_model_preds {
                let y_bin: Vec<f64> = members.iter().map(|&i| y_test[i]).collect();
                let p_bin: Vec<f64> = members.iter().map(|&i| preds[i]).collect();
                let set = ranking_set(self.dataset.kind(), &y_bin, &p_bin)?;
                mses.push(mse(&set));
                match concordance_index(&set) {
                    Ok(ci) => cis.push(ci),
                    Err(_) => ci_defined = false,
                }
            }
            let (mse_mean, mse_std) = mean_std(&mses);
            let (ci_mean, ci_std) = if ci_defined && !cis.is_empty() {
                let (m, s) = mean_std(&cis);
                (Some(m), Some(s))
            } else {
                (None, None)
            };
            bin_reports.push(MssBinReport {
                bin: b,
                lo,
                hi,
                count: members.len(),
                mse_mean: Some(mse_mean),
                mse_std: Some(mse_std),
                ci_mean,
                ci_std,
            });
        }

        let report = MssReport {
            boundaries: bins.boundaries.clone(),
            bins: bin_reports,
        };
        self.write_mss_csv(&report)?;
        Ok(report)
    }

    fn write_mss_csv(&self, report: &MssReport) -> Result<()> {
        let mut out =
            String::from("bin,lo,hi,count,mse_mean,mse_std,ci_mean,ci_std\n");
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for b in &report.bins {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                b.bin,
                b.lo,
                b.hi,
                b.count,
                fmt(b.mse_mean),
                fmt(b.mse_std),
                fmt(b.ci_mean),
                fmt(b.ci_std)
            )
            .expect("string write");
        }
        fs::write(self.config.out_dir.join("mss_bins.csv"), out)?;
        Ok(())
    }

    fn pair_ids(&self, interactions: &[usize]) -> (Vec<String>, Vec<String>) {
        let proteins = interactions
            .iter()
            .map(|&i| {
                self.dataset
                    .protein_id(self.dataset.interactions()[i].protein)
                    .to_string()
            })
            .collect();
        let ligands = interactions
            .iter()
            .map(|&i| {
                self.dataset
                    .ligand_id(self.dataset.interactions()[i].ligand)
                    .to_string()
            })
            .collect();
        (proteins, ligands)
    }
}

/// Metric view where "larger affinity" always means stronger binding: for
/// smaller-is-stronger data both truths and predictions are negated.
fn ranking_set(kind: AffinityKind, y: &[f64], preds: &[f64]) -> Result<PredictionSet> {
    if kind.larger_is_stronger() {
        PredictionSet::from_values(y.to_vec(), preds.to_vec())
    } else {
        PredictionSet::from_values(
            y.iter().map(|v| -v).collect(),
            preds.iter().map(|v| -v).collect(),
        )
    }
}

pub struct TuneOutcome {
    pub best: GbtParams,
    pub table: Vec<GridPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunScore {
    pub model: usize,
    pub ci: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub ci_mean: f64,
    pub ci_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MssBinReport {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mse_mean: Option<f64>,
    pub mse_std: Option<f64>,
    pub ci_mean: Option<f64>,
    pub ci_std: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MssReport {
    pub boundaries: Vec<f64>,
    pub bins: Vec<MssBinReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub proteins: usize,
    pub ligands: usize,
    pub interactions: usize,
    pub kind: AffinityKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub label: Option<String>,
    pub recipe: RepresentationRecipe,
    pub dataset: DatasetSummary,
    pub seed: u64,
    pub best_params: GbtParams,
    pub runs: Vec<RunScore>,
    pub summary: Summary,
    pub mss: Option<MssReport>,
}

impl ExperimentReport {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read report {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("bad report {}: {e}", path.display())))
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("section\tkey\tci\tmse\n");
        for r in &self.runs {
            writeln!(out, "run\t{}\t{}\t{}", r.model, r.ci, r.mse).expect("string write");
        }
        writeln!(
            out,
            "summary\tmean\t{}\t{}",
            self.summary.ci_mean, self.summary.mse_mean
        )
        .expect("string write");
        writeln!(
            out,
            "summary\tstd\t{}\t{}",
            self.summary.ci_std, self.summary.mse_std
        )
        .expect("string write");
        fs::write(path, out)?;
        Ok(())
    }
}

/// Merge several experiment reports into one table, labeled per row.
pub fn merge_reports(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("label\tci_mean\tci_std\tmse_mean\tmse_std\n");
    for r in reports {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.label.as_deref().unwrap_or("-"),
            r.summary.ci_mean,
            r.summary.ci_std,
            r.summary.mse_mean,
            r.summary.mse_std
        )
        .expect("string write");
    }
    out
}

/// Attach the failing stage's name to an error; partially written outputs
/// are left in place.
fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("stage {name}: {m}")),
        Error::Data(m) => Error::Data(format!("stage {name}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("stage {name}: {m}")),
        Error::Internal(m) => Error::Internal(format!("stage {name}: {m}")),
        Error::Io(e) => Error::Data(format!("stage {name}: i/o error: {e}")),
    })
}

/// End-to-end protocol: prepare artifacts, grid-search on the training
/// folds, train the five reporting models, evaluate on the held-out test
/// part, stratify by MSS, and write `report.json` / `report.tsv`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = stage("prepare", prepare(config))?;
    let feats = stage("featurize", ctx.build_features())?;
    let tuned = stage("tune", ctx.tune(&feats))?;
    let models = stage("train", ctx.train_models(&feats, &tuned.best))?;
    let runs = stage("evaluate", ctx.evaluate(&feats, &models))?;

    let (ci_mean, ci_std) = mean_std(&runs.iter().map(|r| r.ci).collect::<Vec<_>>());
    let (mse_mean, mse_std) = mean_std(&runs.iter().map(|r| r.mse).collect::<Vec<_>>());
    let mss = if config.analyze_mss {
        Some(stage("analyze-mss", ctx.analyze_mss(&feats, &models))?)
    } else {
        None
    };

    let report = ExperimentReport {
        version: 1,
        label: config.label.clone(),
        recipe: config.recipe.clone(),
        dataset: DatasetSummary {
            proteins: ctx.dataset.n_proteins(),
            ligands: ctx.dataset.n_ligands(),
            interactions: ctx.dataset.n_interactions(),
            kind: ctx.dataset.kind(),
        },
        seed: config.seed,
        best_params: tuned.best,
        runs,
        summary: Summary {
            ci_mean,
            ci_std,
            mse_mean,
            mse_std,
        },
        mss,
    };
    report.save_json(&config.out_dir.join("report.json"))?;
    report.save_tsv(&config.out_dir.join("report.tsv"))?;
    Ok(report)
}

/// Convenience for tools that need the fold plan file on disk.
pub fn write_folds(plan: &FoldPlan, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("folds.json");
    plan.save(&path)?;
    Ok(path)
}
