//! Cosinor rhythms, significance testing, outlier rules and correlations.

mod correlation;
mod cosinor;
mod fdr;
mod iqr;
mod peaks;

pub use correlation::{
    compare_external, grid_correlation, pearson, read_reference_csv, t_test_two_sample, ConfidenceBand,
    CorrelationResult, TTestResult,
};
pub use cosinor::{cosinor_fit, lr_test, CosinorFit};
pub use fdr::bh_fdr;
pub use iqr::{iqr_fences, iqr_filter, quantile_sorted};
pub use peaks::{
    extract_peak_trough, seasonal_correlation, HourWindow, PeakTrough, PeakTroughTable, SeasonalCorrelation,
};

use crate::entropy::HeatmapGrid;
use crate::error::Result;

/// Cosinor fit of one grid row's cell means against their hour.
pub fn fit_grid_row(grid: &HeatmapGrid, row: usize) -> Result<CosinorFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = grid
        .row(row)
        .iter()
        .enumerate()
        .filter_map(|(h, c)| Some((h as f64, c.mean?)))
        .unzip();
    cosinor_fit(&t, &y)
}

/// Fills `p_fdr` across one family of fits.
pub fn apply_fdr(fits: &mut [CosinorFit]) -> Result<()> {
    let p: Vec<f64> = fits.iter().map(|f| f.p_lr).collect();
    for (f, adj) in fits.iter_mut().zip(bh_fdr(&p)?) {
        f.p_fdr = Some(adj);
    }
    Ok(())
}
