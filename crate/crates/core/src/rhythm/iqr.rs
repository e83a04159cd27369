/// Quantile of sorted data by linear interpolation at position `(n − 1)·q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Tukey fences `(Q1 − 1.5·IQR, Q3 + 1.5·IQR)`.
pub fn iqr_fences(values: &[f64]) -> Option<(f64, f64)> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&s, 0.25)?;
    let q3 = quantile_sorted(&s, 0.75)?;
    let iqr = q3 - q1;
    Some((q1 - 1.5 * iqr, q3 + 1.5 * iqr))
}

/// Values inside the inclusive Tukey fences, in input order. Fewer than four
/// values are returned unchanged.
pub fn iqr_filter(values: &[f64]) -> Vec<f64> {
    if values.len() < 4 {
        if !values.is_empty() {
            log::debug!("IQR filter skipped for {} values", values.len());
        }
        return values.to_vec();
    }
    let Some((lo, hi)) = iqr_fences(values) else {
        return values.to_vec();
    };
    values.iter().copied().filter(|v| (lo..=hi).contains(v)).collect()
}
