//! Skip-gram training with negative sampling.
//!
//! Single-threaded SGD over (center, context) pairs: the dot product of a
//! pair's vectors is pushed up and the dot products with sampled negative
//! words are pushed down under the logistic loss. With a fixed seed the
//! result is bitwise reproducible.

use rand::Rng;

use crate::embedder::{EmbeddingTable, TrainMeta};
use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::smiles_lang::ChemWord;

#[derive(Debug, Clone)]
pub struct TrainParams {
    /// Vector dimension.
    pub dim: usize,
    /// Maximum context window; the effective window per center word is
    /// drawn uniformly from 1..=window.
    pub window: usize,
    /// Negative samples per training pair.
    pub negative: usize,
    pub epochs: usize,
    /// Words rarer than this are dropped from the vocabulary.
    pub min_count: u64,
    /// Initial learning rate, decayed linearly to 1e-4 of itself.
    pub learning_rate: f64,
    /// Frequency subsampling threshold; <= 0 disables subsampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negative: 5,
            epochs: 5,
            min_count: 5,
            learning_rate: 0.025,
            subsample: 1e-3,
            seed: 1,
        }
    }
}

/// Gradient saturation bound, matching the classic trainer.
const MAX_EXP: f64 = 6.0;

fn sigmoid_clamped(x: f64) -> f64 {
    if x > MAX_EXP {
        1.0
    } else if x < -MAX_EXP {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// ln(1 + e^x), stable for large |x|.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Learn word vectors from a tokenized corpus.
pub fn train_skipgram(corpus: &[Vec<ChemWord>], params: &TrainParams) -> Result<EmbeddingTable> {
    if params.dim == 0 {
        return Err(Error::InvalidInput("embedding dimension must be > 0".into()));
    }
    if params.window == 0 {
        return Err(Error::InvalidInput("window must be > 0".into()));
    }
    if !(params.learning_rate > 0.0) {
        return Err(Error::InvalidInput("learning rate must be > 0".into()));
    }

    // Vocabulary: words at or above min count, most frequent first (ties on
    // the word itself so the ordering is reproducible).
    let mut raw_counts: std::collections::HashMap<&str, u64> = std::collections::HashMap::new();
    for sentence in corpus {
        for w in sentence {
            *raw_counts.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = raw_counts
        .iter()
        .filter(|(_, &c)| c >= params.min_count)
        .map(|(&w, &c)| (w, c))
        .collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if vocab.is_empty() {
        return Err(Error::InvalidInput(
            "empty vocabulary: every word fell below the minimum count".into(),
        ));
    }
    let word_id: std::collections::HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, (w, _))| (*w, i))
        .collect();
    let counts: Vec<u64> = vocab.iter().map(|(_, c)| *c).collect();
    let total_kept: u64 = counts.iter().sum();

    // Cumulative count^0.75 mass for negative sampling.
    let mut neg_cum: Vec<f64> = Vec::with_capacity(counts.len());
    let mut acc = 0.0;
    for &c in &counts {
        acc += (c as f64).powf(0.75);
        neg_cum.push(acc);
    }
    let neg_total = acc;

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|sentence| {
            sentence
                .iter()
                .filter_map(|w| word_id.get(w.as_str()).copied())
                .collect()
        })
        .collect();

    let dim = params.dim;
    let n_words = counts.len();
    let mut init_rng = derive_rng(params.seed, "embedder/init");
    let half = 0.5 / dim as f64;
    let mut syn0: Vec<f64> = (0..n_words * dim)
        .map(|_| init_rng.random_range(-half..half))
        .collect();
    let mut syn1: Vec<f64> = vec![0.0; n_words * dim];

    let mut rng = derive_rng(params.seed, "embedder/train");
    let schedule_total = (params.epochs as u64 * total_kept).max(1);
    let mut processed: u64 = 0;
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let mut neu1e = vec![0.0; dim];

    for _epoch in 0..params.epochs {
        let mut loss_sum = 0.0;
        let mut pair_count: u64 = 0;

        for sentence in &sentences {
            let alpha = (params.learning_rate
                * (1.0 - processed as f64 / schedule_total as f64))
                .max(params.learning_rate * 1e-4);
            processed += sentence.len() as u64;

            let sen: Vec<usize> = if params.subsample > 0.0 {
                sentence
                    .iter()
                    .copied()
                    .filter(|&w| {
                        let f = counts[w] as f64 / total_kept as f64;
                        let keep = (params.subsample / f).sqrt() + params.subsample / f;
                        keep >= 1.0 || rng.random::<f64>() < keep
                    })
                    .collect()
            } else {
                sentence.clone()
            };

            for i in 0..sen.len() {
                let center = sen[i];
                let shrink = rng.random_range(0..params.window);
                let reach = params.window - shrink;
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(sen.len().saturating_sub(1));
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context = sen[j];
                    let c0 = center * dim;
                    neu1e.fill(0.0);

                    // positive example
                    let o = context * dim;
                    let mut dot = 0.0;
                    for d in 0..dim {
                        dot += syn0[c0 + d] * syn1[o + d];
                    }
                    loss_sum += softplus(-dot);
                    let g = (1.0 - sigmoid_clamped(dot)) * alpha;
                    for d in 0..dim {
                        neu1e[d] += g * syn1[o + d];
                        syn1[o + d] += g * syn0[c0 + d];
                    }

                    for _ in 0..params.negative {
                        let t = rng.random::<f64>() * neg_total;
                        let target = neg_cum.partition_point(|&c| c <= t).min(n_words - 1);
                        if target == context {
                            continue;
                        }
                        let o = target * dim;
                        let mut dot = 0.0;
                        for d in 0..dim {
                            dot += syn0[c0 + d] * syn1[o + d];
                        }
                        loss_sum += softplus(dot);
                        let g = (0.0 - sigmoid_clamped(dot)) * alpha;
                        for d in 0..dim {
                            neu1e[d] += g * syn1[o + d];
                            syn1[o + d] += g * syn0[c0 + d];
                        }
                    }

                    for d in 0..dim {
                        syn0[c0 + d] += neu1e[d];
                    }
                    pair_count += 1;
                }
            }
        }
        epoch_losses.push(loss_sum / pair_count.max(1) as f64);
    }

    EmbeddingTable::from_parts(
        dim,
        vocab.iter().map(|(w, _)| w.to_string()).collect(),
        syn0,
        counts,
        Some(TrainMeta {
            window: params.window,
            negative: params.negative,
            epochs: params.epochs,
            min_count: params.min_count,
            learning_rate: params.learning_rate,
            subsample: params.subsample,
            seed: params.seed,
        }),
        epoch_losses,
    )
}
