//! Label-map reference logic: regions, reconstruction, post-processing and
//! per-case scoring, spelled out with the other oracles.

use crate::components;
use crate::staple;
use crate::surface;

pub const REGIONS: [&str; 3] = ["ET", "TC", "WT"];

pub fn region_mask(labels: &[u8], region: &str) -> Vec<bool> {
    labels
        .iter()
        .map(|&l| match region {
            "ET" => l == 3,
            "TC" => l == 1 || l == 3,
            "WT" => l == 1 || l == 2 || l == 3,
            other => panic!("region {other}"),
        })
        .collect()
}

/// ET wins over NCR, NCR over ED; ET outside TC or TC outside WT is dropped.
pub fn reconstruct(et: &[bool], tc: &[bool], wt: &[bool]) -> Vec<u8> {
    (0..wt.len())
        .map(|i| {
            if et[i] && tc[i] && wt[i] {
                3
            } else if tc[i] && wt[i] {
                1
            } else if wt[i] {
                2
            } else {
                0
            }
        })
        .collect()
}

fn touches_border(v: usize, dims: [usize; 3]) -> bool {
    let c = [v / (dims[1] * dims[2]), (v / dims[2]) % dims[1], v % dims[2]];
    (0..3).any(|a| c[a] == 0 || c[a] + 1 == dims[a])
}

/// Removes ET components (26-connected) of at most `min_volume` voxels, then
/// gives NCR to background voxels in 6-connected non-TC pockets that do not
/// reach the volume border.
pub fn postprocess(labels: &[u8], dims: [usize; 3], min_volume: usize) -> Vec<u8> {
    let mut out = labels.to_vec();
    let et = region_mask(&out, "ET");
    let ids = components::label(&et, dims, 26);
    let sizes = components::sizes(&ids);
    for (v, &id) in ids.iter().enumerate() {
        if id > 0 && sizes[id as usize - 1] <= min_volume {
            out[v] = 0;
        }
    }
    let outside_tc: Vec<bool> = region_mask(&out, "TC").iter().map(|&t| !t).collect();
    let ids = components::label(&outside_tc, dims, 6);
    let mut open = vec![false; components::sizes(&ids).len() + 1];
    for (v, &id) in ids.iter().enumerate() {
        if id > 0 && touches_border(v, dims) {
            open[id as usize] = true;
        }
    }
    for (v, &id) in ids.iter().enumerate() {
        if id > 0 && !open[id as usize] && out[v] == 0 {
            out[v] = 1;
        }
    }
    out
}

/// `(dice, hd95)` per region in ET, TC, WT order, with BraTS empty-mask
/// conventions.
pub fn score_case(pred: &[u8], truth: &[u8], dims: [usize; 3], spacing: [f64; 3], penalty: f64) -> [(f64, f64); 3] {
    REGIONS.map(|r| {
        let p = region_mask(pred, r);
        let t = region_mask(truth, r);
        let dice = surface::dice(&p, &t).unwrap_or(1.0);
        let p_empty = !p.iter().any(|&x| x);
        let t_empty = !t.iter().any(|&x| x);
        let hd = match (p_empty, t_empty) {
            (true, true) => 0.0,
            (false, false) => surface::hausdorff_percentile(&p, &t, dims, spacing, 95.0).unwrap(),
            _ => penalty,
        };
        (dice, hd)
    })
}

/// Per-region STAPLE (auto prior, W >= 0.5) followed by [`reconstruct`].
/// A region no member marks stays empty; one every member marks everywhere stays full.
pub fn fuse(members: &[Vec<u8>], tol: f64, max_iter: usize) -> Vec<u8> {
    let [et, tc, wt] = REGIONS.map(|r| {
        let rows: Vec<Vec<bool>> = members.iter().map(|m| region_mask(m, r)).collect();
        if rows.iter().all(|row| !row.iter().any(|&d| d)) {
            return vec![false; rows[0].len()];
        }
        if rows.iter().all(|row| row.iter().all(|&d| d)) {
            return vec![true; rows[0].len()];
        }
        staple::em(&rows, None, tol, max_iter).weights.iter().map(|&w| w >= 0.5).collect()
    });
    reconstruct(&et, &tc, &wt)
}
