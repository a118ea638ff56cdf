//! Agglomerative clustering with Ward linkage.
//!
//! Maintains twice the variance-increase merge cost between live clusters
//! and updates it with the Lance-Williams recurrence; each step merges the
//! cheapest pair. Reported heights are the within-cluster variance increase
//! itself.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// One agglomeration step: clusters `a` and `b` (leaves are 0..n-1, merged
/// clusters continue upward as n, n+1, ...) join into `merged` at `height`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    pub a: usize,
    pub b: usize,
    pub merged: usize,
    pub height: f64,
}

#[derive(Debug, Clone)]
pub struct WardClustering {
    /// Cluster label per input item, 0..n_clusters, numbered by first
    /// appearance in input order.
    pub assignments: Vec<usize>,
    /// Input ids in input order.
    pub ids: Vec<String>,
    /// Full agglomeration sequence (n-1 steps).
    pub merges: Vec<MergeStep>,
}

/// Cluster vectors into `n_clusters` groups by Ward's method.
pub fn ward_cluster(items: &[(String, Vec<f64>)], n_clusters: usize) -> Result<WardClustering> {
    let n = items.len();
    if n_clusters == 0 {
        return Err(Error::InvalidInput("cluster count must be positive".into()));
    }
    if n < n_clusters {
        return Err(Error::InvalidInput(format!(
            "{n} vectors cannot form {n_clusters} clusters"
        )));
    }
    let mut seen = HashSet::new();
    for (id, _) in items {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate id {id:?}")));
        }
    }
    let dim = items[0].1.len();
    for (id, v) in items {
        if v.len() != dim {
            return Err(Error::InvalidInput(format!(
                "vector for {id:?} has length {}, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite vector for {id:?}")));
        }
    }

    // dist[i][j] holds 2x the variance increase of merging live clusters i, j.
    let total = 2 * n - 1;
    let mut dist = vec![f64::INFINITY; total * total];
    let mut size = vec![0usize; total];
    let mut alive: Vec<usize> = (0..n).collect();
    for i in 0..n {
        size[i] = 1;
        for j in i + 1..n {
            let d2: f64 = items[i]
                .1
                .iter()
                .zip(&items[j].1)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist[i * total + j] = d2;
            dist[j * total + i] = d2;
        }
    }

    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        // cheapest pair; exact ties break on the (smaller, larger) index pair
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for (ai, &a) in alive.iter().enumerate() {
            for &b in &alive[ai + 1..] {
                let d = dist[a * total + b];
                let (x, y) = (a.min(b), a.max(b));
                if d < best.2 || (d == best.2 && (x, y) < (best.0, best.1)) {
                    best = (x, y, d);
                }
            }
        }
        let (a, b, d) = best;
        let merged = n + step;
        merges.push(MergeStep {
            a,
            b,
            merged,
            height: d / 2.0,
        });
        size[merged] = size[a] + size[b];

        // Lance-Williams update for Ward linkage.
        let na = size[a] as f64;
        let nb = size[b] as f64;
        for &c in &alive {
            if c == a || c == b {
                continue;
            }
            let nc = size[c] as f64;
            let t = na + nb + nc;
            let updated = ((na + nc) * dist[a * total + c] + (nb + nc) * dist[b * total + c]
                - nc * d)
                / t;
            dist[merged * total + c] = updated;
            dist[c * total + merged] = updated;
        }
        alive.retain(|&x| x != a && x != b);
        alive.push(merged);
    }

    // Cut: undo the last (n_clusters - 1) merges.
    let mut root = vec![0usize; total];
    for i in 0..total {
        root[i] = i;
    }
    for m in merges.iter().take(n - n_clusters) {
        root[m.a] = m.merged;
        root[m.b] = m.merged;
    }
    let find = |mut i: usize| {
        while root[i] != i {
            i = root[i];
        }
        i
    };
    let mut label_of = std::collections::HashMap::new();
    let mut assignments = Vec::with_capacity(n);
    for i in 0..n {
        let r = find(i);
        let next = label_of.len();
        let label = *label_of.entry(r).or_insert(next);
        assignments.push(label);
    }

    Ok(WardClustering {
        assignments,
        ids: items.iter().map(|(id, _)| id.clone()).collect(),
        merges,
    })
}
