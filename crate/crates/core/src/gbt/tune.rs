//! Hyper-parameter grid search over cross-validation folds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::mse_slices;
use crate::gbt::{fit, GbtParams, MatrixView};

/// Candidate lists per searched parameter; the grid is their Cartesian
/// product in field order (learning rate outermost).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParamGrid {
    pub learning_rate: Vec<f64>,
    pub rounds: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub min_child_weight: Vec<f64>,
}

impl Default for HyperParamGrid {
    fn default() -> Self {
        Self {
            learning_rate: vec![0.05, 0.1, 0.3],
            rounds: vec![100, 500, 1000, 2000],
            max_depth: vec![4, 6, 8],
            lambda: vec![1.0],
            gamma: vec![0.0],
            min_child_weight: vec![1.0],
        }
    }
}

impl HyperParamGrid {
    /// A one-point grid around fixed parameters.
    pub fn single(params: &GbtParams) -> Self {
        Self {
            learning_rate: vec![params.learning_rate],
            rounds: vec![params.rounds],
            max_depth: vec![params.max_depth],
            lambda: vec![params.lambda],
            gamma: vec![params.gamma],
            min_child_weight: vec![params.min_child_weight],
        }
    }

    /// Expand into full parameter sets, inheriting everything not searched
    /// (sampling fractions, seed, base score) from `base`.
    pub fn expand(&self, base: &GbtParams) -> Result<Vec<GbtParams>> {
        if self.learning_rate.is_empty()
            || self.rounds.is_empty()
            || self.max_depth.is_empty()
            || self.lambda.is_empty()
            || self.gamma.is_empty()
            || self.min_child_weight.is_empty()
        {
            return Err(Error::Config("empty hyper-parameter grid axis".into()));
        }
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rate {
            for &rounds in &self.rounds {
                for &max_depth in &self.max_depth {
                    for &lambda in &self.lambda {
                        for &gamma in &self.gamma {
                            for &min_child_weight in &self.min_child_weight {
                                out.push(GbtParams {
                                    learning_rate,
                                    rounds,
                                    max_depth,
                                    lambda,
                                    gamma,
                                    min_child_weight,
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub params: GbtParams,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSearchOutcome {
    pub best: GbtParams,
    pub table: Vec<GridPoint>,
}

/// Evaluate every grid point with the given `(train, validation)` row-index
/// folds and return the one with the lowest mean validation MSE (ties go to
/// the earliest point in grid order).
pub fn grid_search_cv(
    x: &MatrixView,
    y: &[f64],
    folds: &[(Vec<usize>, Vec<usize>)],
    grid: &HyperParamGrid,
    base: &GbtParams,
) -> Result<GridSearchOutcome> {
    if folds.is_empty() {
        return Err(Error::Config("grid search needs at least one fold".into()));
    }
    for (train, valid) in folds {
        if train.is_empty() || valid.is_empty() {
            return Err(Error::Config("empty cross-validation fold".into()));
        }
    }
    let candidates = grid.expand(base)?;

    let mut table = Vec::with_capacity(candidates.len());
    let mut best: Option<usize> = None;
    for (ci, params) in candidates.iter().enumerate() {
        let mut fold_mse = Vec::with_capacity(folds.len());
        for (train, valid) in folds {
            let (train_data, train_rows) = x.gather(train);
            let train_x = MatrixView::new(&train_data, train_rows, x.cols())?;
            let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = fit(&train_x, &train_y, params)?;

            let (valid_data, valid_rows) = x.gather(valid);
            let valid_x = MatrixView::new(&valid_data, valid_rows, x.cols())?;
            let valid_y: Vec<f64> = valid.iter().map(|&i| y[i]).collect();
            let preds = model.predict(&valid_x)?;
            fold_mse.push(mse_slices(&preds, &valid_y));
        }
        let mean_mse = fold_mse.iter().sum::<f64>() / fold_mse.len() as f64;
        table.push(GridPoint {
            params: params.clone(),
            fold_mse,
            mean_mse,
        });
        if best.is_none_or(|b| mean_mse < table[b].mean_mse) {
            best = Some(ci);
        }
    }
    let best = best.expect("non-empty grid");
    Ok(GridSearchOutcome {
        best: table[best].params.clone(),
        table,
    })
}
