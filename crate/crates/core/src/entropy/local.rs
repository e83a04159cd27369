use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 10;
/// Neighbor distances below this are clamped and the row flagged.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// `ln r_k` for every row of one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEntropy {
    pub k: usize,
    pub values: Vec<f64>,
    /// The row's k-th neighbor distance was below [`DISTANCE_FLOOR`].
    pub excluded_duplicate: Vec<bool>,
}

impl LocalEntropy {
    /// Values of rows not flagged as duplicates, in row order.
    pub fn retained(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.excluded_duplicate)
            .filter(|(_, &dup)| !dup)
            .map(|(&h, _)| h)
            .collect()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        (!self.excluded_duplicate[i]).then(|| self.values[i])
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance from `rows[i]` to its k-th nearest other row, by exhaustive search.
pub fn kth_neighbor_distance(rows: &[&[f64]], i: usize, k: usize) -> f64 {
    let mut d2: Vec<f64> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, r)| squared_distance(rows[i], r))
        .collect();
    let (_, kth, _) = d2.select_nth_unstable_by(k - 1, f64::total_cmp);
    kth.sqrt()
}

/// Local semantic entropy `H_i = ln r_k(x_i)` with exact neighbor search.
pub fn local_entropy(rows: &[&[f64]], k: usize) -> Result<LocalEntropy> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if rows.len() <= k {
        return Err(Error::InsufficientData {
            what: "local entropy bin",
            have: rows.len(),
            need: k + 1,
        });
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidArgument("rows have unequal dimension".into()));
    }
    let (values, excluded_duplicate) = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            let r = kth_neighbor_distance(rows, i, k);
            if r < DISTANCE_FLOOR {
                (DISTANCE_FLOOR.ln(), true)
            } else {
                (r.ln(), false)
            }
        })
        .unzip();
    Ok(LocalEntropy {
        k,
        values,
        excluded_duplicate,
    })
}
