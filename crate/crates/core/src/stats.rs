//! Small deterministic reductions shared by preprocessing and metrics.

/// Neumaier-compensated sum; the result depends only on the input order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Population mean and standard deviation (divisor N), two-pass.
/// Returns `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|&v| (v - mean) * (v - mean))) / n;
    Some((mean, var.sqrt()))
}

/// Percentile of ascending-sorted data by linear interpolation between
/// closest ranks: position `p * (n - 1) / 100`.
///
/// `p` is clamped to `[0, 100]`. Panics on empty input.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = p.clamp(0.0, 100.0) * (sorted.len() - 1) as f64 / 100.0;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Sorts a copy and returns the percentile. Panics on empty input.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(v), 1.0);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[2.0, 4.0]).unwrap();
        assert_eq!(m, 3.0);
        assert_eq!(s, 1.0);
        assert!(mean_std(&[]).is_none());
    }

    #[test]
    fn linear_percentiles() {
        let ramp: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile_sorted(&ramp, 2.0), 2.0);
        assert_eq!(percentile_sorted(&ramp, 98.0), 98.0);
        assert_eq!(percentile(&[3.0, 1.0], 50.0), 2.0);
        assert!((percentile(&[1.0, 2.0, 3.0, 4.0], 95.0) - 3.85).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 95.0), 7.0);
    }
}
