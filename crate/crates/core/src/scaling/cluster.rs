use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NOISE: i64 = -1;

// Rows per parallel batch when collecting core-core edges.
const EDGE_BATCH: usize = 512;

fn within(a: &[f64], b: &[f64], eps2: f64) -> bool {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += (x - y) * (x - y);
        if s > eps2 {
            return false;
        }
    }
    true
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // The smaller index becomes the root.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Renumbers labels `0, 1, …` by first occurrence in row order; noise stays −1.
pub fn canonical_labels(labels: &[i64]) -> Vec<i64> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l < 0 {
                NOISE
            } else {
                let next = map.len() as i64;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

/// DBSCAN with exact Euclidean neighborhoods. A point is core when at least
/// `min_pts` points (itself included) lie within `eps`. Core points within
/// `eps` of each other share a cluster; a border point joins the
/// lowest-numbered cluster among its core neighbors.
pub fn density_cluster(rows: &[&[f64]], eps: f64, min_pts: usize) -> Result<Vec<i64>> {
    let n = rows.len();
    if !(eps > 0.0) || min_pts == 0 {
        return Err(Error::InvalidArgument(format!(
            "eps {eps} and min_pts {min_pts} must be positive"
        )));
    }
    if n < min_pts {
        return Err(Error::InsufficientData {
            what: "rows for density clustering",
            have: n,
            need: min_pts,
        });
    }
    let eps2 = eps * eps;
    let core: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut count = 0;
            for r in rows {
                if within(rows[i], r, eps2) {
                    count += 1;
                    if count >= min_pts {
                        return true;
                    }
                }
            }
            false
        })
        .collect();

    let core_idx: Vec<usize> = (0..n).filter(|&i| core[i]).collect();
    let mut uf = UnionFind::new(n);
    for batch in core_idx.chunks(EDGE_BATCH) {
        let edges: Vec<Vec<usize>> = batch
            .par_iter()
            .map(|&i| {
                core_idx
                    .iter()
                    .copied()
                    .filter(|&j| j > i && within(rows[i], rows[j], eps2))
                    .collect()
            })
            .collect();
        for (&i, js) in batch.iter().zip(edges) {
            for j in js {
                uf.union(i, j);
            }
        }
    }

    // Components are numbered by their first core row.
    let mut label = vec![NOISE; n];
    let mut root_label = HashMap::new();
    for &i in &core_idx {
        let root = uf.find(i);
        let next = root_label.len() as i64;
        label[i] = *root_label.entry(root).or_insert(next);
    }
    let border: Vec<(usize, i64)> = (0..n)
        .into_par_iter()
        .filter(|&i| !core[i])
        .filter_map(|i| {
            core_idx
                .iter()
                .filter(|&&j| within(rows[i], rows[j], eps2))
                .map(|&j| label[j])
                .min()
                .map(|l| (i, l))
        })
        .collect();
    for (i, l) in border {
        label[i] = l;
    }
    Ok(canonical_labels(&label))
}

/// Adjusted Rand index between two labelings (noise treated as a label).
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("labelings differ in length".into()));
    }
    let n = a.len();
    let comb2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut joint: HashMap<(i64, i64), usize> = HashMap::new();
    let mut ra: HashMap<i64, usize> = HashMap::new();
    let mut rb: HashMap<i64, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| comb2(c)).sum();
    let sa: f64 = ra.values().map(|&c| comb2(c)).sum();
    let sb: f64 = rb.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Cluster labels with per-cluster sizes and cumulative growth over local hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTrace {
    pub labels: Vec<i64>,
    pub sizes: Vec<usize>,
    pub noise: usize,
    /// `growth[c][h]` counts members of cluster `c` posted at or before hour `h`.
    pub growth: Vec<[usize; 24]>,
}

impl ClusterTrace {
    /// Cluster indices by decreasing size, ties by label.
    pub fn by_size(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.sizes.len()).collect();
        idx.sort_by(|&a, &b| self.sizes[b].cmp(&self.sizes[a]).then(a.cmp(&b)));
        idx
    }

    /// Fraction of all rows held by the `k` largest clusters.
    pub fn top_share(&self, k: usize) -> f64 {
        let n = self.labels.len();
        if n == 0 {
            return 0.0;
        }
        let top: usize = self.by_size().iter().take(k).map(|&c| self.sizes[c]).sum();
        top as f64 / n as f64
    }
}

pub fn cluster_growth(labels: &[i64], local_hours: &[u8]) -> Result<ClusterTrace> {
    if labels.len() != local_hours.len() {
        return Err(Error::InvalidArgument("labels and hours differ in length".into()));
    }
    if let Some(h) = local_hours.iter().find(|&&h| h > 23) {
        return Err(Error::InvalidArgument(format!("hour {h} out of range")));
    }
    let k = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut per_hour = vec![[0usize; 24]; k];
    let mut noise = 0;
    for (&l, &h) in labels.iter().zip(local_hours) {
        if l < 0 {
            noise += 1;
        } else {
            per_hour[l as usize][h as usize] += 1;
        }
    }
    let growth: Vec<[usize; 24]> = per_hour
        .iter()
        .map(|c| {
            let mut acc = 0;
            let mut g = [0; 24];
            for (h, v) in c.iter().enumerate() {
                acc += v;
                g[h] = acc;
            }
            g
        })
        .collect();
    Ok(ClusterTrace {
        labels: labels.to_vec(),
        sizes: growth.iter().map(|g| g[23]).collect(),
        noise,
        growth,
    })
}
