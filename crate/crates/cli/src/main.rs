//! `chemlang` command line: dataset ingestion, vocabulary and embedding
//! training, similarity matrices, fold management, and the tune / train /
//! evaluate / analyze protocol driven by a JSON experiment config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
//! invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use chemlang::embedder::{train_skipgram, EmbeddingTable, TrainParams};
use chemlang::error::{Error, Result};
use chemlang::evalkit::ward_cluster;
use chemlang::gbt::TreeEnsemble;
use chemlang::pipeline::config::ExperimentConfig;
use chemlang::pipeline::experiment::{self, merge_reports, ExperimentReport};
use chemlang::pipeline::{
    filter_bindingdb, make_folds, read_bindingdb_raw, ColumnMap, InteractionDataset,
};
use chemlang::seqsim::{normalized_sw_matrix, Scoring, SubstitutionMatrix};
use chemlang::smiles_lang::{
    read_smiles_corpus, tokenize_bpe, tokenize_kmer, train_bpe, BpeParams, BpeVocabulary,
};

#[derive(Parser)]
#[command(
    name = "chemlang",
    version,
    about = "Chemical-language toolkit for protein-ligand binding affinity prediction"
)]
struct Cli {
    /// Master seed; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run single-threaded for bitwise reproducibility.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory; overrides the config file's out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a dataset: either filter a raw BindingDB TSV export or
    /// validate existing dataset TSVs. Writes proteins.tsv, ligands.tsv
    /// and interactions.tsv.
    Ingest {
        /// Raw BindingDB TSV export to filter.
        #[arg(long, conflicts_with_all = ["proteins", "ligands", "interactions"])]
        raw_bindingdb: Option<PathBuf>,
        /// JSON file mapping logical column names to export column names.
        #[arg(long, requires = "raw_bindingdb")]
        column_map: Option<PathBuf>,
        #[arg(long, requires_all = ["ligands", "interactions"])]
        proteins: Option<PathBuf>,
        #[arg(long)]
        ligands: Option<PathBuf>,
        #[arg(long)]
        interactions: Option<PathBuf>,
    },
    /// Train a BPE vocabulary on a SMILES corpus file.
    BpeTrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        target_size: usize,
        #[arg(long, default_value_t = 0.99)]
        coverage: f64,
        #[arg(long, default_value_t = 100)]
        max_word_len: usize,
    },
    /// Train chemical-word embeddings on a SMILES corpus file.
    EmbedTrain {
        #[arg(long)]
        corpus: PathBuf,
        /// k-mer word length (mutually exclusive with --bpe-vocab).
        #[arg(long, conflicts_with = "bpe_vocab")]
        kmer: Option<usize>,
        /// Trained vocabulary file for BPE words.
        #[arg(long)]
        bpe_vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negative: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        #[arg(long, default_value_t = 0.025)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1e-3)]
        subsample: f64,
    },
    /// Compute the normalized all-pairs similarity matrix of a protein
    /// file.
    SwMatrix {
        #[arg(long)]
        proteins: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        gap_open: f64,
        #[arg(long, default_value_t = 0.5)]
        gap_extend: f64,
        /// Substitution matrix file (built-in BLOSUM62 when absent).
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Randomly partition a dataset's interactions into six folds.
    Split {
        #[arg(long)]
        proteins: PathBuf,
        #[arg(long)]
        ligands: PathBuf,
        #[arg(long)]
        interactions: PathBuf,
        #[arg(long, default_value_t = 0)]
        test_part: usize,
    },
    /// Build and persist feature matrices for the config's recipe.
    Featurize {
        /// Which interactions to featurize.
        #[arg(long, value_parser = ["train", "test", "all"], default_value = "all")]
        split: String,
        /// Also dump a TSV next to the binary matrix.
        #[arg(long)]
        tsv: bool,
    },
    /// Grid-search boosting hyper-parameters over the five training folds.
    Tune,
    /// Train the five reporting models (tuning first if needed).
    Train {
        /// Fixed parameter file; skips tuning.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Evaluate trained models on the held-out test part.
    Evaluate {
        /// Directory of model_k.json files (default: <out>/models).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Per-MSS-bin metric table for trained models.
    AnalyzeMss {
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Ward-linkage clustering of a vector file (embedding text format or
    /// the protein_vectors.tsv written by featurize).
    Cluster {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        clusters: usize,
    },
    /// Merge experiment reports into one labeled summary table.
    Report {
        /// report.json files to merge.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = if cli.deterministic {
        Some(1)
    } else {
        cli.threads
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    let out_dir = |fallback: Option<&Path>| -> Result<PathBuf> {
        let dir = cli
            .out
            .clone()
            .or_else(|| fallback.map(Path::to_path_buf))
            .ok_or_else(|| Error::Config("no output directory: pass --out".into()))?;
        fs::create_dir_all(&dir)?;
        Ok(dir)
    };

    // Experiment-config-driven subcommands share this loader.
    let load_config = || -> Result<ExperimentConfig> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand requires --config".into()))?;
        let mut config = ExperimentConfig::load(path)?;
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(out) = &cli.out {
            config.out_dir = out.clone();
        }
        fs::create_dir_all(&config.out_dir)?;
        Ok(config)
    };

    match &cli.command {
        Command::Ingest {
            raw_bindingdb,
            column_map,
            proteins,
            ligands,
            interactions,
        } => {
            let out = out_dir(None)?;
            let dataset = match (raw_bindingdb, proteins) {
                (Some(raw), _) => {
                    let map = match column_map {
                        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
                            .map_err(|e| Error::Config(format!("bad column map: {e}")))?,
                        None => ColumnMap::default(),
                    };
                    let (rows, stats) = read_bindingdb_raw(raw, &map)?;
                    info!(
                        "read {} rows ({} malformed, {} non-Kd)",
                        stats.total_rows, stats.malformed, stats.non_kd
                    );
                    let (dataset, fstats) = filter_bindingdb(&rows)?;
                    println!(
                        "filtered BindingDB: {} interactions ({} proteins, {} ligands); \
                         {} pairs deduplicated, {} censored rows clamped",
                        dataset.n_interactions(),
                        dataset.n_proteins(),
                        dataset.n_ligands(),
                        fstats.deduplicated,
                        fstats.censored_clamped
                    );
                    dataset
                }
                (None, Some(p)) => {
                    let dataset = InteractionDataset::load_tsv(
                        p,
                        ligands.as_ref().expect("clap enforces"),
                        interactions.as_ref().expect("clap enforces"),
                    )?;
                    println!(
                        "validated dataset: {} interactions ({} proteins, {} ligands)",
                        dataset.n_interactions(),
                        dataset.n_proteins(),
                        dataset.n_ligands()
                    );
                    dataset
                }
                (None, None) => {
                    return Err(Error::Config(
                        "ingest needs --raw-bindingdb or --proteins/--ligands/--interactions"
                            .into(),
                    ))
                }
            };
            dataset.save_tsv(&out)?;
            println!("wrote dataset TSVs to {}", out.display());
            Ok(())
        }

        Command::BpeTrain {
            corpus,
            target_size,
            coverage,
            max_word_len,
        } => {
            let out = out_dir(None)?;
            let smiles = read_smiles_corpus(corpus)?;
            let vocab = train_bpe(
                &smiles,
                &BpeParams {
                    target_size: *target_size,
                    character_coverage: *coverage,
                    max_word_len: *max_word_len,
                },
            )?;
            let path = out.join("vocab.txt");
            vocab.save(&path)?;
            println!(
                "trained vocabulary: {} tokens, {} merges -> {}",
                vocab.tokens().len(),
                vocab.merges().len(),
                path.display()
            );
            Ok(())
        }

        Command::EmbedTrain {
            corpus,
            kmer,
            bpe_vocab,
            dim,
            window,
            negative,
            epochs,
            min_count,
            learning_rate,
            subsample,
        } => {
            let out = out_dir(None)?;
            let smiles = read_smiles_corpus(corpus)?;
            let vocab = bpe_vocab
                .as_ref()
                .map(|p| BpeVocabulary::load(p))
                .transpose()?;
            let tokenized: Vec<_> = match (&vocab, kmer) {
                (Some(v), None) => smiles.iter().map(|s| tokenize_bpe(s, v)).collect(),
                (None, k) => {
                    let k = k.unwrap_or(8);
                    smiles
                        .iter()
                        .map(|s| tokenize_kmer(s, k))
                        .collect::<Result<_>>()?
                }
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let table = train_skipgram(
                &tokenized,
                &TrainParams {
                    dim: *dim,
                    window: *window,
                    negative: *negative,
                    epochs: *epochs,
                    min_count: *min_count,
                    learning_rate: *learning_rate,
                    subsample: *subsample,
                    seed: cli.seed.unwrap_or(1),
                },
            )?;
            let path = out.join("embedding.txt");
            table.save(&path)?;
            println!(
                "trained embeddings: {} words x {} dims -> {}",
                table.len(),
                table.dim(),
                path.display()
            );
            Ok(())
        }

        Command::SwMatrix {
            proteins,
            gap_open,
            gap_extend,
            matrix,
        } => {
            let out = out_dir(None)?;
            let rows = load_protein_tsv(proteins)?;
            let scoring = Scoring {
                matrix: match matrix {
                    Some(path) => SubstitutionMatrix::load(path)?,
                    None => SubstitutionMatrix::blosum62(),
                },
                gap_open: *gap_open,
                gap_extend: *gap_extend,
            };
            let sim = normalized_sw_matrix(&rows, &scoring)?;
            let path = out.join("sw_matrix.tsv");
            sim.save_tsv(&path)?;
            println!("wrote {}x{} similarity matrix -> {}", sim.len(), sim.len(), path.display());
            Ok(())
        }

        Command::Split {
            proteins,
            ligands,
            interactions,
            test_part,
        } => {
            let out = out_dir(None)?;
            let dataset = InteractionDataset::load_tsv(proteins, ligands, interactions)?;
            let plan = make_folds(
                dataset.n_interactions(),
                cli.seed.unwrap_or(0),
                *test_part,
            )?;
            let path = out.join("folds.json");
            plan.save(&path)?;
            println!(
                "split {} interactions into 6 parts (test part {}) -> {}",
                dataset.n_interactions(),
                test_part,
                path.display()
            );
            Ok(())
        }

        Command::Featurize { split, tsv } => {
            let config = load_config()?;
            let ctx = experiment::prepare(&config)?;
            let feats = ctx.build_features()?;
            let rows: Vec<usize> = match split.as_str() {
                "train" => feats.train_idx.clone(),
                "test" => feats.test_idx.clone(),
                _ => (0..ctx.dataset.n_interactions()).collect(),
            };
            let matrix = feats.builder.build_matrix(&rows);
            let path = config.out_dir.join(format!("features_{split}.bin"));
            matrix.save(&path)?;
            if *tsv {
                matrix.save_tsv(&config.out_dir.join(format!("features_{split}.tsv")))?;
            }
            println!(
                "wrote {} x {} feature matrix -> {}",
                matrix.rows(),
                matrix.cols(),
                path.display()
            );
            Ok(())
        }

        Command::Tune => {
            let config = load_config()?;
            let ctx = experiment::prepare(&config)?;
            let feats = ctx.build_features()?;
            let tuned = ctx.tune(&feats)?;
            println!(
                "best parameters: learning_rate {}, rounds {}, max_depth {} -> {}",
                tuned.best.learning_rate,
                tuned.best.rounds,
                tuned.best.max_depth,
                config.out_dir.join("best_params.json").display()
            );
            Ok(())
        }

        Command::Train { params } => {
            let config = load_config()?;
            let ctx = experiment::prepare(&config)?;
            let feats = ctx.build_features()?;
            let best = match params {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
                    .map_err(|e| Error::Config(format!("bad params file: {e}")))?,
                None => {
                    let existing = config.out_dir.join("best_params.json");
                    if existing.exists() {
                        serde_json::from_str(&fs::read_to_string(&existing)?)
                            .map_err(|e| Error::Config(format!("bad params file: {e}")))?
                    } else {
                        ctx.tune(&feats)?.best
                    }
                }
            };
            let models = ctx.train_models(&feats, &best)?;
            println!(
                "trained {} models -> {}",
                models.len(),
                config.out_dir.join("models").display()
            );
            Ok(())
        }

        Command::Evaluate { models } => {
            let config = load_config()?;
            let ctx = experiment::prepare(&config)?;
            let feats = ctx.build_features()?;
            let loaded = load_models(models.as_deref(), &config.out_dir)?;
            let runs = ctx.evaluate(&feats, &loaded)?;
            let (ci_mean, ci_std) =
                chemlang::evalkit::mean_std(&runs.iter().map(|r| r.ci).collect::<Vec<_>>());
            let (mse_mean, mse_std) =
                chemlang::evalkit::mean_std(&runs.iter().map(|r| r.mse).collect::<Vec<_>>());
            let report = ExperimentReport {
                version: 1,
                label: config.label.clone(),
                recipe: config.recipe.clone(),
                dataset: experiment::DatasetSummary {
                    proteins: ctx.dataset.n_proteins(),
                    ligands: ctx.dataset.n_ligands(),
                    interactions: ctx.dataset.n_interactions(),
                    kind: ctx.dataset.kind(),
                },
                seed: config.seed,
                best_params: loaded[0].params().clone(),
                runs,
                summary: experiment::Summary {
                    ci_mean,
                    ci_std,
                    mse_mean,
                    mse_std,
                },
                mss: None,
            };
            report.save_json(&config.out_dir.join("report.json"))?;
            report.save_tsv(&config.out_dir.join("report.tsv"))?;
            println!(
                "test CI {:.4} ({:.4}), MSE {:.4} ({:.4}) over {} models -> {}",
                ci_mean,
                ci_std,
                mse_mean,
                mse_std,
                report.runs.len(),
                config.out_dir.join("report.json").display()
            );
            Ok(())
        }

        Command::AnalyzeMss { models } => {
            let config = load_config()?;
            let ctx = experiment::prepare(&config)?;
            let feats = ctx.build_features()?;
            let loaded = load_models(models.as_deref(), &config.out_dir)?;
            let mss = ctx.analyze_mss(&feats, &loaded)?;
            println!("bin\trange\tcount\tmse_mean\tmse_std");
            for b in &mss.bins {
                println!(
                    "{}\t({:.3}, {:.3}]\t{}\t{}\t{}",
                    b.bin,
                    b.lo,
                    b.hi,
                    b.count,
                    b.mse_mean.map(|v| format!("{v:.4}")).unwrap_or_default(),
                    b.mse_std.map(|v| format!("{v:.4}")).unwrap_or_default(),
                );
            }
            println!(
                "wrote {}",
                config.out_dir.join("mss_bins.csv").display()
            );
            Ok(())
        }

        Command::Cluster { vectors, clusters } => {
            let out = out_dir(None)?;
            let items = load_vectors(vectors)?;
            let clustering = ward_cluster(&items, *clusters)?;
            let mut text = String::from("id\tcluster\n");
            for (id, label) in clustering.ids.iter().zip(&clustering.assignments) {
                text.push_str(&format!("{id}\t{label}\n"));
            }
            let path = out.join("clusters.tsv");
            fs::write(&path, text)?;
            println!(
                "clustered {} vectors into {} groups -> {}",
                items.len(),
                clusters,
                path.display()
            );
            Ok(())
        }

        Command::Report { inputs } => {
            let out = out_dir(None)?;
            let reports: Vec<ExperimentReport> = inputs
                .iter()
                .map(|p| ExperimentReport::load_json(p))
                .collect::<Result<_>>()?;
            let table = merge_reports(&reports);
            fs::write(out.join("summary.tsv"), &table)?;
            let json = serde_json::to_string_pretty(&reports)
                .map_err(|e| Error::Internal(format!("summary serialization: {e}")))?;
            fs::write(out.join("summary.json"), json)?;
            print!("{table}");
            println!("wrote {}", out.join("summary.tsv").display());
            Ok(())
        }
    }
}

fn load_protein_tsv(path: &Path) -> Result<Vec<chemlang::seqsim::ProteinSequence>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("protein_id\tsequence") => {}
        _ => {
            return Err(Error::Data(format!(
                "{}: expected header protein_id<TAB>sequence",
                path.display()
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut fields = l.split('\t');
            let id = fields.next().unwrap_or_default();
            let seq = fields.next().ok_or_else(|| {
                Error::Data(format!("{}: row missing sequence column", path.display()))
            })?;
            chemlang::seqsim::ProteinSequence::new(id, seq)
        })
        .collect()
}

/// Vectors for clustering: the embedding text format (`count dim` header)
/// or the featurize protein-vector TSV (`id <TAB> n_sources <TAB> values`).
fn load_vectors(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let first = text.lines().next().unwrap_or_default();
    let header: Vec<&str> = first.split_whitespace().collect();
    let looks_like_embedding =
        header.len() == 2 && header.iter().all(|t| t.parse::<usize>().is_ok());
    if looks_like_embedding {
        let table = EmbeddingTable::load(path)?;
        return Ok(table
            .words()
            .map(|w| (w.to_string(), table.vector(w).unwrap().to_vec()))
            .collect());
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut fields = line.split('\t');
            let id = fields
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Data(format!("{}: empty id", path.display())))?
                .to_string();
            let _n_sources = fields.next();
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Data(format!("{}: bad float {f:?}", path.display())))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(Error::Data(format!(
                    "{}: row for {id} has no vector values",
                    path.display()
                )));
            }
            Ok((id, values))
        })
        .collect()
}

fn load_models(dir: Option<&Path>, out_dir: &Path) -> Result<Vec<TreeEnsemble>> {
    let dir = dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("models"));
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::Config(format!("cannot read models dir {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.starts_with("model_"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no model_*.json files in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| TreeEnsemble::load(p)).collect()
}
