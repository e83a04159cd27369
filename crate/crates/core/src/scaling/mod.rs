//! Entropy/volume coupling, marginal entropy gain, density clustering and
//! cluster-size scaling.

mod cluster;
mod gain;
mod pca;
mod powerlaw;

pub use cluster::{
    adjusted_rand_index, canonical_labels, cluster_growth, density_cluster, ClusterTrace, NOISE,
};
pub use gain::{
    central_gradient, gain_curve, marginal_gain, prefix_gain_curve, segment_fit, CellOrdering, EntropyMagnitude,
    GainPoint, MarginalGainCurve, SegmentFit, SplitBasis,
};
pub use pca::{pca_project, PcaProjection};
pub use powerlaw::{powerlaw_fit, PowerLawFit, DEFAULT_MIN_BIN_COUNT, DEFAULT_XMIN};

use crate::entropy::HeatmapGrid;
use crate::error::Result;
use crate::rhythm::{grid_correlation, CorrelationResult};

/// Correlation of per-cell post counts with per-cell global entropy.
pub fn volume_entropy_correlation(count_grid: &HeatmapGrid, entropy_grid: &HeatmapGrid) -> Result<CorrelationResult> {
    grid_correlation(count_grid, entropy_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{CellStat, GridLayout};
    use crate::rng::SeededRng;

    fn grid(values: &[f64]) -> HeatmapGrid {
        let mut g = HeatmapGrid::empty("x", GridLayout::MonthHour);
        for (i, &v) in values.iter().enumerate() {
            g.set(Some((i / 24 + 1) as u8), (i % 24) as u8, CellStat::single(v, 1)).unwrap();
        }
        g
    }

    #[test]
    fn affine_entropy_grid() {
        let counts: Vec<f64> = (0..288).map(|i| ((i * 37) % 101) as f64).collect();
        let ent: Vec<f64> = counts.iter().map(|c| 0.3 * c - 2.0).collect();
        let r = volume_entropy_correlation(&grid(&counts), &grid(&ent)).unwrap().r;
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_grids_are_uncorrelated() {
        let mut rng = SeededRng::new(99);
        let mut exceed = 0;
        for _ in 0..200 {
            let a: Vec<f64> = (0..288).map(|_| rng.normal()).collect();
            let b: Vec<f64> = (0..288).map(|_| rng.normal()).collect();
            if volume_entropy_correlation(&grid(&a), &grid(&b)).unwrap().r.abs() >= 0.2 {
                exceed += 1;
            }
        }
        // P(|r| >= 0.2) at n = 288 is about 6e-4.
        assert!(exceed <= 2, "{exceed} of 200");
    }
}
