//! Sample summaries used across the crate.

/// Linear-interpolation quantile (Hyndman-Fan type 7, the R default) of an
/// ascending slice: `h = (n - 1) q`, interpolating between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    quantile_select(&mut s, q)
}

/// Same value as [`quantile_sorted`] on the sorted input, found by selection;
/// reorders `buf`.
pub(crate) fn quantile_select(buf: &mut [f64], q: f64) -> f64 {
    assert!(!buf.is_empty(), "quantile of empty sample");
    let h = (buf.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let (_, &mut a, upper) = buf.select_nth_unstable_by(lo, f64::total_cmp);
    if h == lo as f64 {
        return a;
    }
    let b = upper.iter().copied().fold(f64::INFINITY, f64::min);
    a + (h - lo as f64) * (b - a)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let (s, w) = values
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(s, t), (v, w)| (s + v * w, t + w));
    s / w
}
