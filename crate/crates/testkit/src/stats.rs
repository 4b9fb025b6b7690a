/// Population mean and standard deviation, two passes, plain summation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Sample standard deviation (n - 1), 0 for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Percentile with linear interpolation between closest ranks:
/// rank `r = p/100 * (n-1)`, value `x[floor r] + frac(r) * (x[ceil r] - x[floor r])`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let r = p * (x.len() - 1) as f64 / 100.0;
    let lo = r.floor() as usize;
    let hi = r.ceil() as usize;
    x[lo] + (r - lo as f64) * (x[hi] - x[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        (x[n / 2 - 1] + x[n / 2]) / 2.0
    }
}
