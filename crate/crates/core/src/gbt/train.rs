//! Boosting loop and level-wise exact greedy tree growth.
//!
//! Features are pre-sorted once per fit; every tree level is grown with a
//! single scan of each feature's sort order, accumulating per-node left
//! statistics. Tie-breaking is fixed (lowest feature index, then lowest
//! threshold), so the result is schedule-independent.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::gbt::{GbtParams, MatrixView, Node, RegressionTree, TreeEnsemble};
use crate::rng::derive_rng;

struct ScanState {
    prev_value: f64,
    grad_left: f64,
    hess_left: f64,
    seen: bool,
}

#[derive(Clone, Copy)]
struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    grad_left: f64,
    hess_left: f64,
}

struct FrontierNode {
    slot: usize,
    grad: f64,
    hess: f64,
    best: Option<BestSplit>,
}

fn leaf_weight(grad: f64, hess: f64, lambda: f64) -> f64 {
    -grad / (hess + lambda)
}

fn gain_term(grad: f64, hess: f64, lambda: f64) -> f64 {
    grad * grad / (hess + lambda)
}

/// Train an ensemble on `x` against `y`.
///
/// The base score is the target mean unless the params force one. Boosting
/// stops early when a round finds no positive-gain split anywhere (with
/// `max_depth` 0 splits are never attempted and every round appends its
/// single leaf).
pub fn fit(x: &MatrixView, y: &[f64], params: &GbtParams) -> Result<TreeEnsemble> {
    params.validate()?;
    let n = x.rows();
    if n != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} targets",
            n,
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("training needs at least 2 rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite training target".into()));
    }
    for r in 0..n {
        if x.row(r).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value in row {r}"
            )));
        }
    }

    let base_score = params
        .base_score
        .unwrap_or_else(|| y.iter().sum::<f64>() / n as f64);
    let mut preds = vec![base_score; n];

    // Global feature sort, reused across rounds.
    let cols = x.cols();
    let sorted: Vec<Vec<u32>> = (0..cols)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                x.at(a as usize, f)
                    .partial_cmp(&x.at(b as usize, f))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let mut trees: Vec<RegressionTree> = Vec::new();
    let mut grad = vec![0.0f64; n];
    let mut node_of_row: Vec<i32> = vec![0; n];

    for round in 0..params.rounds {
        for i in 0..n {
            grad[i] = preds[i] - y[i];
        }

        let in_sample: Vec<bool> = if params.subsample < 1.0 {
            let mut rng = derive_rng(params.seed, &format!("gbt/round{round}/rows"));
            let take = ((params.subsample * n as f64).floor() as usize).max(1);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut mask = vec![false; n];
            for &i in &idx[..take] {
                mask[i] = true;
            }
            mask
        } else {
            vec![true; n]
        };

        let features: Vec<usize> = if params.colsample < 1.0 {
            let mut rng = derive_rng(params.seed, &format!("gbt/round{round}/cols"));
            let take = ((params.colsample * cols as f64).ceil() as usize).clamp(1, cols);
            let mut idx: Vec<usize> = (0..cols).collect();
            idx.shuffle(&mut rng);
            let mut chosen = idx[..take].to_vec();
            chosen.sort_unstable();
            chosen
        } else {
            (0..cols).collect()
        };

        let mut root_grad = 0.0;
        let mut root_hess = 0.0;
        for i in 0..n {
            if in_sample[i] {
                node_of_row[i] = 0;
                root_grad += grad[i];
                root_hess += 1.0;
            } else {
                node_of_row[i] = -1;
            }
        }

        let mut nodes: Vec<Node> = vec![Node::Leaf { weight: 0.0 }];
        let mut frontier = vec![FrontierNode {
            slot: 0,
            grad: root_grad,
            hess: root_hess,
            best: None,
        }];

        for _depth in 0..params.max_depth {
            if frontier.is_empty() {
                break;
            }
            let mut states: Vec<ScanState> = frontier
                .iter()
                .map(|_| ScanState {
                    prev_value: 0.0,
                    grad_left: 0.0,
                    hess_left: 0.0,
                    seen: false,
                })
                .collect();

            for &f in &features {
                for s in &mut states {
                    s.grad_left = 0.0;
                    s.hess_left = 0.0;
                    s.seen = false;
                }
                for &r in &sorted[f] {
                    let r = r as usize;
                    let ni = node_of_row[r];
                    if ni < 0 {
                        continue;
                    }
                    let node = &mut frontier[ni as usize];
                    let state = &mut states[ni as usize];
                    let v = x.at(r, f);
                    if state.seen && v > state.prev_value {
                        let threshold = (state.prev_value + v) / 2.0;
                        // splittable only if the midpoint separates the sides
                        if threshold > state.prev_value {
                            let hl = state.hess_left;
                            let hr = node.hess - hl;
                            if hl >= params.min_child_weight && hr >= params.min_child_weight {
                                let gl = state.grad_left;
                                let gr = node.grad - gl;
                                let gain = 0.5
                                    * (gain_term(gl, hl, params.lambda)
                                        + gain_term(gr, hr, params.lambda)
                                        - gain_term(node.grad, node.hess, params.lambda))
                                    - params.gamma;
                                let better = match node.best {
                                    None => gain > 0.0,
                                    Some(b) => gain > b.gain,
                                };
                                if better {
                                    node.best = Some(BestSplit {
                                        gain,
                                        feature: f,
                                        threshold,
                                        grad_left: gl,
                                        hess_left: hl,
                                    });
                                }
                            }
                        }
                    }
                    state.grad_left += grad[r];
                    state.hess_left += 1.0;
                    state.prev_value = v;
                    state.seen = true;
                }
            }

            // Materialize splits; unsplit frontier nodes become leaves.
            let mut next_frontier: Vec<FrontierNode> = Vec::new();
            let mut child_of: Vec<Option<(usize, f64, i32, i32)>> =
                Vec::with_capacity(frontier.len());
            for node in &frontier {
                match node.best {
                    Some(best) => {
                        let left_slot = nodes.len();
                        nodes.push(Node::Leaf { weight: 0.0 });
                        let right_slot = nodes.len();
                        nodes.push(Node::Leaf { weight: 0.0 });
                        nodes[node.slot] = Node::Split {
                            feature: best.feature,
                            threshold: best.threshold,
                            default_left: true,
                            left: left_slot,
                            right: right_slot,
                        };
                        let li = next_frontier.len() as i32;
                        next_frontier.push(FrontierNode {
                            slot: left_slot,
                            grad: best.grad_left,
                            hess: best.hess_left,
                            best: None,
                        });
                        let ri = next_frontier.len() as i32;
                        next_frontier.push(FrontierNode {
                            slot: right_slot,
                            grad: node.grad - best.grad_left,
                            hess: node.hess - best.hess_left,
                            best: None,
                        });
                        child_of.push(Some((best.feature, best.threshold, li, ri)));
                    }
                    None => {
                        nodes[node.slot] = Node::Leaf {
                            weight: leaf_weight(node.grad, node.hess, params.lambda),
                        };
                        child_of.push(None);
                    }
                }
            }

            for r in 0..n {
                let ni = node_of_row[r];
                if ni < 0 {
                    continue;
                }
                node_of_row[r] = match child_of[ni as usize] {
                    Some((f, t, li, ri)) => {
                        if x.at(r, f) < t {
                            li
                        } else {
                            ri
                        }
                    }
                    None => -1,
                };
            }
            frontier = next_frontier;
        }

        for node in &frontier {
            nodes[node.slot] = Node::Leaf {
                weight: leaf_weight(node.grad, node.hess, params.lambda),
            };
        }

        // A round whose root found no split while splits were allowed means
        // no positive gain exists anywhere: stop without appending.
        if params.max_depth > 0 && nodes.len() == 1 {
            break;
        }

        let tree = RegressionTree::new(nodes);
        for i in 0..n {
            preds[i] += params.learning_rate * tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }

    Ok(TreeEnsemble::new(
        base_score,
        params.learning_rate,
        trees,
        params.clone(),
        cols,
    ))
}
