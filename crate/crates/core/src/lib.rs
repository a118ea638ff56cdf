//! Chemical-language toolkit for protein-ligand binding affinity prediction.
//!
//! Treats SMILES strings as sentences of a chemical language: ligands are
//! segmented into "chemical words" (overlapping k-mers or byte-pair-encoding
//! units), word vectors are learned from a SMILES corpus with a skip-gram
//! trainer, and ligand/protein feature vectors are assembled from them.
//! Affinities are regressed with gradient-boosted trees and evaluated with
//! ranking and error metrics plus sequence-similarity stratification.
//!
//! Module map:
//!
//! - [`smiles_lang`] — k-mer and BPE segmentation of SMILES strings
//! - [`embedder`] — skip-gram word vectors and ligand vector averaging
//! - [`seqsim`] — Smith-Waterman scores and normalized similarity matrices
//! - [`featurize`] — representation recipes and feature matrix assembly
//! - [`gbt`] — regularized gradient-boosted regression trees
//! - [`evalkit`] — concordance index, MSE, MSS stratification, t-tests,
//!   ward clustering
//! - [`pipeline`] — dataset ingestion, folds, experiment orchestration
//! - [`synth`] — seeded synthetic benchmark generator

pub mod embedder;
pub mod error;
pub mod evalkit;
pub mod featurize;
pub mod gbt;
pub mod pipeline;
pub mod rng;
pub mod seqsim;
pub mod smiles_lang;
pub mod synth;

pub use error::{Error, Result};
