//! Regularized gradient-boosted regression trees.
//!
//! Squared-error boosting with second-order leaf weights: gradient
//! `g = prediction - target`, hessian 1, leaf weight `-G / (H + lambda)`,
//! split gain `(G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)) / 2 - gamma`.
//! Split finding is exact greedy over midpoints of adjacent sorted feature
//! values. Prediction is `base_score + eta * sum(tree_k(x))`.

mod train;
mod tune;

pub use train::fit;
pub use tune::{grid_search_cv, GridPoint, GridSearchOutcome, HyperParamGrid};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix view used for training and prediction.
#[derive(Debug, Clone, Copy)]
pub struct MatrixView<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
}

impl<'a> MatrixView<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &'a [f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Copy of the selected rows.
    pub fn gather(&self, rows: &[usize]) -> (Vec<f64>, usize) {
        let mut out = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            out.extend_from_slice(self.row(r));
        }
        (out, rows.len())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GbtParams {
    /// Shrinkage eta in (0, 1].
    pub learning_rate: f64,
    /// Maximum number of boosting rounds K.
    pub rounds: usize,
    /// Tree depth; 0 grows a single leaf per round.
    pub max_depth: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum split gain.
    pub gamma: f64,
    /// Minimum hessian mass per child (row count under squared loss).
    pub min_child_weight: f64,
    /// Row fraction sampled per round.
    pub subsample: f64,
    /// Feature fraction sampled per tree.
    pub colsample: f64,
    /// Forced base score; `None` uses the target mean.
    pub base_score: Option<f64>,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            rounds: 500,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            base_score: None,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0)
            || !(self.colsample > 0.0 && self.colsample <= 1.0)
        {
            return Err(Error::InvalidInput("sample fractions must lie in (0, 1]".into()));
        }
        if self.lambda < 0.0 || self.gamma < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::InvalidInput(
                "lambda, gamma and min child weight must be non-negative".into(),
            ));
        }
        if let Some(b) = self.base_score {
            if !b.is_finite() {
                return Err(Error::InvalidInput("non-finite base score".into()));
            }
        }
        Ok(())
    }
}

/// Tree node in the arena representation; the root is slot 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Direction for missing (NaN) feature values.
        default_left: bool,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub(crate) fn new(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() { *default_left } else { v < *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }
}

/// The boosted ensemble of Eq.-style additive trees.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    base_score: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
    params: GbtParams,
    n_features: usize,
}

impl TreeEnsemble {
    pub(crate) fn new(
        base_score: f64,
        learning_rate: f64,
        trees: Vec<RegressionTree>,
        params: GbtParams,
        n_features: usize,
    ) -> Self {
        Self {
            base_score,
            learning_rate,
            trees,
            params,
            n_features,
        }
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &GbtParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Per-row predictions; the feature width must match training.
    pub fn predict(&self, x: &MatrixView) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "shape mismatch: model expects {} features, matrix has {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok((0..x.rows()).map(|r| self.predict_row(x.row(r))).collect())
    }

    /// Prediction using only the first `k` trees.
    pub fn predict_staged(&self, x: &MatrixView, k: usize) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "shape mismatch: model expects {} features, matrix has {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok((0..x.rows())
            .map(|r| {
                let row = x.row(r);
                let sum: f64 = self.trees[..k.min(self.trees.len())]
                    .iter()
                    .map(|t| t.predict_row(row))
                    .sum();
                self.base_score + self.learning_rate * sum
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            version: MODEL_VERSION,
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            n_features: self.n_features,
            params: self.params.clone(),
            trees: self.trees.iter().map(tree_to_repr).collect(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Internal(format!("model serialization: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read model {}: {e}", path.display())))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("bad model file {}: {e}", path.display())))?;
        if file.version != MODEL_VERSION {
            return Err(Error::Data(format!(
                "unsupported model version {} in {}",
                file.version,
                path.display()
            )));
        }
        let trees = file
            .trees
            .iter()
            .map(repr_to_tree)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base_score: file.base_score,
            learning_rate: file.learning_rate,
            trees,
            params: file.params,
            n_features: file.n_features,
        })
    }
}

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    base_score: f64,
    learning_rate: f64,
    n_features: usize,
    params: GbtParams,
    trees: Vec<NodeRepr>,
}

/// Nested-object tree encoding for the JSON model file.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Leaf {
        leaf: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        default: DefaultDir,
        left: Box<NodeRepr>,
        right: Box<NodeRepr>,
    },
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "lowercase")]
enum DefaultDir {
    Left,
    Right,
}

fn tree_to_repr(tree: &RegressionTree) -> NodeRepr {
    fn build(nodes: &[Node], i: usize) -> NodeRepr {
        match &nodes[i] {
            Node::Leaf { weight } => NodeRepr::Leaf { leaf: *weight },
            Node::Split {
                feature,
                threshold,
                default_left,
                left,
                right,
            } => NodeRepr::Split {
                feature: *feature,
                threshold: *threshold,
                default: if *default_left {
                    DefaultDir::Left
                } else {
                    DefaultDir::Right
                },
                left: Box::new(build(nodes, *left)),
                right: Box::new(build(nodes, *right)),
            },
        }
    }
    build(&tree.nodes, 0)
}

fn repr_to_tree(repr: &NodeRepr) -> Result<RegressionTree> {
    fn build(repr: &NodeRepr, nodes: &mut Vec<Node>) -> Result<usize> {
        let slot = nodes.len();
        match repr {
            NodeRepr::Leaf { leaf } => {
                if !leaf.is_finite() {
                    return Err(Error::Data("non-finite leaf weight".into()));
                }
                nodes.push(Node::Leaf { weight: *leaf });
            }
            NodeRepr::Split {
                feature,
                threshold,
                default,
                left,
                right,
            } => {
                if !threshold.is_finite() {
                    return Err(Error::Data("non-finite split threshold".into()));
                }
                nodes.push(Node::Leaf { weight: 0.0 }); // placeholder
                let l = build(left, nodes)?;
                let r = build(right, nodes)?;
                nodes[slot] = Node::Split {
                    feature: *feature,
                    threshold: *threshold,
                    default_left: *default == DefaultDir::Left,
                    left: l,
                    right: r,
                };
            }
        }
        Ok(slot)
    }
    let mut nodes = Vec::new();
    build(repr, &mut nodes)?;
    Ok(RegressionTree::new(nodes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_tree(weight: f64) -> RegressionTree {
        RegressionTree::new(vec![Node::Leaf { weight }])
    }

    #[test]
    fn empty_ensemble_predicts_base_score() {
        let e = TreeEnsemble::new(2.5, 0.1, Vec::new(), GbtParams::default(), 3);
        let data = vec![1.0, 2.0, 3.0];
        let x = MatrixView::new(&data, 1, 3).unwrap();
        assert_eq!(e.predict(&x).unwrap(), vec![2.5]);
    }

    #[test]
    fn two_identical_leaves_with_half_shrinkage() {
        let e = TreeEnsemble::new(
            1.0,
            0.5,
            vec![leaf_tree(0.8), leaf_tree(0.8)],
            GbtParams::default(),
            2,
        );
        let data = vec![0.0, 0.0];
        let x = MatrixView::new(&data, 1, 2).unwrap();
        let got = e.predict(&x).unwrap()[0];
        assert!((got - 1.8).abs() < 1e-15); // base + 0.5 * (0.8 + 0.8)
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let e = TreeEnsemble::new(0.0, 1.0, Vec::new(), GbtParams::default(), 4);
        let data = vec![0.0; 6];
        let x = MatrixView::new(&data, 2, 3).unwrap();
        assert!(e.predict(&x).is_err());
    }

    #[test]
    fn missing_values_follow_default_direction() {
        let tree = RegressionTree::new(vec![
            Node::Split {
                feature: 0,
                threshold: 1.0,
                default_left: false,
                left: 1,
                right: 2,
            },
            Node::Leaf { weight: -1.0 },
            Node::Leaf { weight: 1.0 },
        ]);
        assert_eq!(tree.predict_row(&[f64::NAN]), 1.0);
        assert_eq!(tree.predict_row(&[0.0]), -1.0);
        assert_eq!(tree.predict_row(&[2.0]), 1.0);
    }

    #[test]
    fn model_file_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let tree = RegressionTree::new(vec![
            Node::Split {
                feature: 1,
                threshold: 0.123456789012345,
                default_left: true,
                left: 1,
                right: 2,
            },
            Node::Leaf {
                weight: -0.987654321098765,
            },
            Node::Split {
                feature: 0,
                threshold: 2.5,
                default_left: false,
                left: 3,
                right: 4,
            },
            Node::Leaf { weight: 0.25 },
            Node::Leaf {
                weight: 1.0 / 3.0,
            },
        ]);
        let e = TreeEnsemble::new(
            0.777777777777,
            0.3,
            vec![tree, leaf_tree(0.5)],
            GbtParams::default(),
            2,
        );
        e.save(&path).unwrap();
        let loaded = TreeEnsemble::load(&path).unwrap();
        assert_eq!(e, loaded);
        let data = vec![0.4, 0.1, 3.0, -2.0];
        let x = MatrixView::new(&data, 2, 2).unwrap();
        assert_eq!(e.predict(&x).unwrap(), loaded.predict(&x).unwrap());
    }

    #[test]
    fn unsupported_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let e = TreeEnsemble::new(0.0, 1.0, vec![leaf_tree(1.0)], GbtParams::default(), 1);
        e.save(&path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(TreeEnsemble::load(&path), Err(Error::Data(_))));
    }

    #[test]
    fn prediction_matches_nested_json_traversal() {
        // independent traversal of the serialized nested-object encoding
        fn walk(value: &serde_json::Value, row: &[f64]) -> f64 {
            if let Some(w) = value.get("leaf") {
                return w.as_f64().unwrap();
            }
            let f = value["feature"].as_u64().unwrap() as usize;
            let t = value["threshold"].as_f64().unwrap();
            let v = row[f];
            let go_left = if v.is_nan() {
                value["default"] == "left"
            } else {
                v < t
            };
            walk(if go_left { &value["left"] } else { &value["right"] }, row)
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let data: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..10).map(|i| (i % 3) as f64).collect();
        let x = MatrixView::new(&data, 10, 4).unwrap();
        let e = fit(
            &x,
            &y,
            &GbtParams {
                rounds: 5,
                max_depth: 2,
                ..GbtParams::default()
            },
        )
        .unwrap();
        e.save(&path).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let base = json["base_score"].as_f64().unwrap();
        let eta = json["learning_rate"].as_f64().unwrap();
        let trees = json["trees"].as_array().unwrap();
        for r in 0..x.rows() {
            let row = x.row(r);
            let slow: f64 = base + eta * trees.iter().map(|t| walk(t, row)).sum::<f64>();
            let fast = e.predict_row(row);
            assert_eq!(slow, fast);
        }
    }
}
