//! All-pairs surface distances.

use crate::idx;

/// Foreground voxels missing at least one of their six face neighbors.
pub fn surface(mask: &[bool], dims: [usize; 3]) -> Vec<[usize; 3]> {
    let inside = |i: i64, j: i64, k: i64| {
        i >= 0
            && j >= 0
            && k >= 0
            && (i as usize) < dims[0]
            && (j as usize) < dims[1]
            && (k as usize) < dims[2]
            && mask[idx(dims, i as usize, j as usize, k as usize)]
    };
    let mut out = Vec::new();
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                if !mask[idx(dims, i, j, k)] {
                    continue;
                }
                let (a, b, c) = (i as i64, j as i64, k as i64);
                let faces = [
                    (a - 1, b, c),
                    (a + 1, b, c),
                    (a, b - 1, c),
                    (a, b + 1, c),
                    (a, b, c - 1),
                    (a, b, c + 1),
                ];
                if faces.iter().any(|&(x, y, z)| !inside(x, y, z)) {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// For every point of `from`, the distance in mm to the nearest point of `to`.
pub fn directed(from: &[[usize; 3]], to: &[[usize; 3]], spacing: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| {
                    let mut s = 0.0;
                    for ax in 0..3 {
                        let d = (a[ax] as f64 - b[ax] as f64) * spacing[ax];
                        s += d * d;
                    }
                    s.sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `max(P_p(A→B), P_p(B→A))`, or `None` when either mask is empty.
pub fn hausdorff_percentile(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3], p: f64) -> Option<f64> {
    let sa = surface(a, dims);
    let sb = surface(b, dims);
    if sa.is_empty() || sb.is_empty() {
        return None;
    }
    let ab = crate::stats::percentile(&directed(&sa, &sb, spacing), p);
    let ba = crate::stats::percentile(&directed(&sb, &sa, spacing), p);
    Some(ab.max(ba))
}

pub fn dice(a: &[bool], b: &[bool]) -> Option<f64> {
    let na = a.iter().filter(|&&x| x).count();
    let nb = b.iter().filter(|&&x| x).count();
    let both = a.iter().zip(b).filter(|(&x, &y)| x && y).count();
    (na + nb > 0).then(|| 2.0 * both as f64 / (na + nb) as f64)
}
