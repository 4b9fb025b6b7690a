//! Binary STAPLE written out term by term: direct products, no log space.

#[derive(Debug, Clone)]
pub struct EmResult {
    pub weights: Vec<f64>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub iterations: usize,
}

/// `rows[j][i]` is rater j's decision at voxel i. The prior defaults to the
/// mean foreground fraction over raters. Stops once the mean absolute change
/// of W between consecutive E-steps drops below `tol` (checked from the
/// second iteration on), or after `max_iter` iterations.
pub fn em(rows: &[Vec<bool>], prior: Option<f64>, tol: f64, max_iter: usize) -> EmResult {
    let j = rows.len();
    let n = rows[0].len();
    let f = prior.unwrap_or_else(|| {
        let marked: usize = rows.iter().map(|r| r.iter().filter(|&&d| d).count()).sum();
        marked as f64 / (j * n) as f64
    });
    let clamp = |v: f64| v.clamp(1e-6, 1.0 - 1e-6);
    let mut p = vec![clamp(0.99999); j];
    let mut q = vec![clamp(0.99999); j];
    let mut w = vec![0.0; n];
    let mut iterations = 0;
    for it in 1..=max_iter {
        let mut w_new = vec![0.0; n];
        for i in 0..n {
            let mut a = f;
            let mut b = 1.0 - f;
            for r in 0..j {
                let d = if rows[r][i] { 1 } else { 0 };
                a *= p[r].powi(d) * (1.0 - p[r]).powi(1 - d);
                b *= (1.0 - q[r]).powi(d) * q[r].powi(1 - d);
            }
            w_new[i] = a / (a + b);
        }
        let sum_w: f64 = w_new.iter().sum();
        let sum_1w: f64 = w_new.iter().map(|x| 1.0 - x).sum();
        for r in 0..j {
            let mut num_p = 0.0;
            let mut num_q = 0.0;
            for i in 0..n {
                if rows[r][i] {
                    num_p += w_new[i];
                } else {
                    num_q += 1.0 - w_new[i];
                }
            }
            if sum_w > 0.0 {
                p[r] = clamp(num_p / sum_w);
            }
            if sum_1w > 0.0 {
                q[r] = clamp(num_q / sum_1w);
            }
        }
        let change: f64 = w_new.iter().zip(&w).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        w = w_new;
        iterations = it;
        if it > 1 && change < tol {
            break;
        }
    }
    EmResult {
        weights: w,
        sensitivity: p,
        specificity: q,
        iterations,
    }
}
