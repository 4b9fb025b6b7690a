//! Flood-fill component labeling.

use std::collections::VecDeque;

use crate::idx;

/// Offsets whose squared length is at most 1 (6), 2 (18) or 3 (26).
fn adjacent(connectivity: u8, d: [i64; 3]) -> bool {
    let sq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let limit = match connectivity {
        6 => 1,
        18 => 2,
        26 => 3,
        other => panic!("connectivity {other}"),
    };
    sq > 0 && sq <= limit
}

/// Component ids (0 = background, components numbered from 1 in order of
/// their first voxel in scan order).
pub fn label(mask: &[bool], dims: [usize; 3], connectivity: u8) -> Vec<u32> {
    let mut ids = vec![0u32; mask.len()];
    let mut next = 0u32;
    for start in 0..mask.len() {
        if !mask[start] || ids[start] != 0 {
            continue;
        }
        next += 1;
        ids[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let c = [v / (dims[1] * dims[2]), (v / dims[2]) % dims[1], v % dims[2]];
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    for dk in -1i64..=1 {
                        if !adjacent(connectivity, [di, dj, dk]) {
                            continue;
                        }
                        let n = [c[0] as i64 + di, c[1] as i64 + dj, c[2] as i64 + dk];
                        if (0..3).any(|a| n[a] < 0 || n[a] >= dims[a] as i64) {
                            continue;
                        }
                        let u = idx(dims, n[0] as usize, n[1] as usize, n[2] as usize);
                        if mask[u] && ids[u] == 0 {
                            ids[u] = next;
                            queue.push_back(u);
                        }
                    }
                }
            }
        }
    }
    ids
}

pub fn sizes(ids: &[u32]) -> Vec<usize> {
    let max = ids.iter().copied().max().unwrap_or(0) as usize;
    let mut s = vec![0; max];
    for &id in ids {
        if id > 0 {
            s[id as usize - 1] += 1;
        }
    }
    s
}
