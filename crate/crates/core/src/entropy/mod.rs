//! Local (kNN) and global (Gaussian) semantic entropy and their aggregation
//! into hourly profiles and month × hour heatmaps. All entropies are in nats.

mod aggregate;
mod global;
mod local;

pub use aggregate::{aggregate, zscore_grid, Aggregated, CellStat, GridLayout, HeatmapGrid, OutlierPolicy};
pub use global::{
    entropy_from_eigenvalues, global_entropy, sample_covariance, symmetric_eigenvalues, GlobalEntropy,
    DEFAULT_EPSILON, DEFAULT_N_MIN,
};
pub use local::{kth_neighbor_distance, local_entropy, LocalEntropy, DEFAULT_K, DISTANCE_FLOOR};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BinIndex, BinKey, EmbeddingMatrix};

/// Per-record local entropy computed within each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedLocalEntropy {
    /// Indexed by matrix row; `None` for rows in skipped bins or flagged duplicates.
    pub values: Vec<Option<f64>>,
    pub duplicate_rows: Vec<usize>,
    /// Bins with too few rows, with their sizes.
    pub skipped_bins: Vec<(BinKey, usize)>,
}

pub fn local_entropy_by_bin(matrix: &EmbeddingMatrix, bins: &BinIndex, k: usize) -> Result<BinnedLocalEntropy> {
    let cells: Vec<(BinKey, &[usize])> = bins.iter().filter(|(_, r)| !r.is_empty()).collect();
    let results: Vec<(BinKey, &[usize], Result<LocalEntropy>)> = cells
        .into_par_iter()
        .map(|(key, rows)| (key, rows, local_entropy(&matrix.select(rows), k)))
        .collect();
    let mut out = BinnedLocalEntropy {
        values: vec![None; matrix.n()],
        duplicate_rows: Vec::new(),
        skipped_bins: Vec::new(),
    };
    for (key, rows, res) in results {
        match res {
            Ok(le) => {
                for (i, &row) in rows.iter().enumerate() {
                    if le.excluded_duplicate[i] {
                        out.duplicate_rows.push(row);
                    } else {
                        out.values[row] = Some(le.values[i]);
                    }
                }
            }
            Err(Error::InsufficientData { have, .. }) => {
                log::warn!("bin {key:?} has {have} rows, need more than k = {k}; skipped");
                out.skipped_bins.push((key, have));
            }
            Err(e) => return Err(e),
        }
    }
    out.duplicate_rows.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedGlobalEntropy {
    pub bins: Vec<(BinKey, GlobalEntropy)>,
    pub skipped_bins: Vec<(BinKey, usize)>,
}

pub fn global_entropy_by_bin(
    matrix: &EmbeddingMatrix,
    bins: &BinIndex,
    epsilon: f64,
    n_min: usize,
) -> Result<BinnedGlobalEntropy> {
    let cells: Vec<(BinKey, &[usize])> = bins.iter().filter(|(_, r)| !r.is_empty()).collect();
    let results: Vec<(BinKey, Result<GlobalEntropy>)> = cells
        .into_par_iter()
        .map(|(key, rows)| (key, global_entropy(&matrix.select(rows), epsilon, n_min)))
        .collect();
    let mut out = BinnedGlobalEntropy {
        bins: Vec::new(),
        skipped_bins: Vec::new(),
    };
    for (key, res) in results {
        match res {
            Ok(g) => out.bins.push((key, g)),
            Err(Error::InsufficientData { have, .. }) => {
                log::warn!("bin {key:?} has {have} rows, below n_min = {n_min}; skipped");
                out.skipped_bins.push((key, have));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

impl BinnedGlobalEntropy {
    /// One cell per computed bin; `n` holds the sample count.
    pub fn to_grid(&self, statistic: &str, layout: GridLayout) -> Result<HeatmapGrid> {
        let mut g = HeatmapGrid::empty(statistic, layout);
        for (key, ge) in &self.bins {
            g.set(key.month, key.hour, CellStat::single(ge.h, ge.n_samples))?;
        }
        Ok(g)
    }
}
