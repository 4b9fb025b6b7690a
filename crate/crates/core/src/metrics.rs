//! Dice similarity and 95th-percentile Hausdorff distance per region.
//!
//! Surface voxels are foreground voxels with at least one face neighbor
//! outside the mask; the volume border counts as outside. Surface-to-surface
//! distances are exact Euclidean distances in millimetres, computed with a
//! separable squared distance transform that honours anisotropic spacing.
//! HD95 is the larger of the two directed 95th percentiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{compensated_sum, percentile, percentile_sorted};
use crate::volume::{extract_region, CaseId, Geometry, LabelVolume, Region, RegionMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// HD95 when exactly one of the two masks is empty.
    pub empty_pred_penalty_mm: f64,
    /// Dice when both masks are empty.
    pub empty_empty_dice: f64,
    /// HD95 when both masks are empty.
    pub empty_empty_hd95: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            empty_pred_penalty_mm: 373.13,
            empty_empty_dice: 1.0,
            empty_empty_hd95: 0.0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.empty_pred_penalty_mm > 0.0 && self.empty_pred_penalty_mm.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "empty-prediction penalty must be positive, got {}",
                self.empty_pred_penalty_mm
            )));
        }
        if !(0.0..=1.0).contains(&self.empty_empty_dice) || !(self.empty_empty_hd95 >= 0.0) {
            return Err(Error::InvalidConfig("invalid empty-mask conventions".into()));
        }
        Ok(())
    }
}

/// `2|A ∩ B| / (|A| + |B|)`.
pub fn dice(a: &RegionMask, b: &RegionMask, config: &MetricConfig) -> Result<f64> {
    a.geometry().check_same_grid(b.geometry(), "dice")?;
    let mut size_a = 0usize;
    let mut size_b = 0usize;
    let mut both = 0usize;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        size_a += usize::from(x);
        size_b += usize::from(y);
        both += usize::from(x && y);
    }
    if size_a + size_b == 0 {
        return Ok(config.empty_empty_dice);
    }
    Ok(2.0 * both as f64 / (size_a + size_b) as f64)
}

/// Foreground voxels with a face neighbor outside the mask or the volume.
pub fn surface_voxels(mask: &RegionMask) -> Vec<bool> {
    let g = mask.geometry();
    let [ni, nj, nk] = g.dims();
    let d = mask.data();
    let mut out = vec![false; d.len()];
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                let v = g.index(i, j, k);
                if !d[v] {
                    continue;
                }
                out[v] = i == 0
                    || j == 0
                    || k == 0
                    || i + 1 == ni
                    || j + 1 == nj
                    || k + 1 == nk
                    || !d[v - nj * nk]
                    || !d[v + nj * nk]
                    || !d[v - nk]
                    || !d[v + nk]
                    || !d[v - 1]
                    || !d[v + 1];
            }
        }
    }
    out
}

/// Squared Euclidean distance (mm²) from every voxel to the nearest feature
/// voxel; `f64::INFINITY` everywhere when there are no features.
pub fn squared_distance_transform(geometry: &Geometry, features: &[bool]) -> Vec<f64> {
    let dims = geometry.dims();
    let spacing = geometry.spacing();
    let mut grid: Vec<f64> = features.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();
    let longest = *dims.iter().max().unwrap();
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut scratch = EnvelopeScratch::new(longest);

    for axis in (0..3).rev() {
        let n = dims[axis];
        let stride = match axis {
            0 => dims[1] * dims[2],
            1 => dims[2],
            _ => 1,
        };
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for a in 0..dims[o1] {
            for b in 0..dims[o2] {
                let mut c = [0usize; 3];
                c[o1] = a;
                c[o2] = b;
                let start = geometry.index(c[0], c[1], c[2]);
                for t in 0..n {
                    line[t] = grid[start + t * stride];
                }
                lower_envelope(&line[..n], spacing[axis], &mut out[..n], &mut scratch);
                for t in 0..n {
                    grid[start + t * stride] = out[t];
                }
            }
        }
    }
    grid
}

struct EnvelopeScratch {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl EnvelopeScratch {
    fn new(n: usize) -> Self {
        Self {
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }
}

/// One-dimensional pass: `out[q] = min_p ((q - p) s)² + f[p]`, via the lower
/// envelope of parabolas rooted at the finite samples.
fn lower_envelope(f: &[f64], s: f64, out: &mut [f64], scratch: &mut EnvelopeScratch) {
    let n = f.len();
    let Some(first) = f.iter().position(|v| v.is_finite()) else {
        out.fill(f64::INFINITY);
        return;
    };
    let v = &mut scratch.sites;
    let z = &mut scratch.bounds;
    let pos = |q: usize| q as f64 * s;
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let xq = pos(q);
        let mut cross;
        loop {
            let p = v[k];
            let xp = pos(p);
            cross = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
            if cross <= z[k] {
                // z[0] is -inf, so k never underflows
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = cross;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let xq = pos(q);
        while z[k + 1] < xq {
            k += 1;
        }
        let d = xq - pos(v[k]);
        *o = d * d + f[v[k]];
    }
}

/// Distances (mm) from each surface voxel of `from` to the surface of `to`,
/// in voxel scan order. Both masks must be non-empty.
pub fn directed_surface_distances(from: &RegionMask, to: &RegionMask) -> Result<Vec<f64>> {
    from.geometry().check_same_grid(to.geometry(), "surface distance")?;
    let target = surface_voxels(to);
    if !target.iter().any(|&t| t) {
        return Err(Error::InvalidVolume("target mask is empty".into()));
    }
    let dt = squared_distance_transform(to.geometry(), &target);
    Ok(surface_voxels(from)
        .iter()
        .zip(&dt)
        .filter(|&(&s, &_d2)| s).map(|(&_s, &d2)| d2.sqrt())
        .collect())
}

enum Emptiness {
    Both,
    One,
    Neither,
}

fn emptiness(a: &RegionMask, b: &RegionMask) -> Emptiness {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Emptiness::Both,
        (false, false) => Emptiness::Neither,
        _ => Emptiness::One,
    }
}

/// Symmetric surface distance at percentile `p`:
/// `max(P_p(d(A→B)), P_p(d(B→A)))`.
pub fn hausdorff_percentile(a: &RegionMask, b: &RegionMask, p: f64, config: &MetricConfig) -> Result<f64> {
    a.geometry().check_same_grid(b.geometry(), "hausdorff")?;
    match emptiness(a, b) {
        Emptiness::Both => return Ok(config.empty_empty_hd95),
        Emptiness::One => return Ok(config.empty_pred_penalty_mm),
        Emptiness::Neither => {}
    }
    let ab = directed_surface_distances(a, b)?;
    let ba = directed_surface_distances(b, a)?;
    Ok(percentile(&ab, p).max(percentile(&ba, p)))
}

/// 95th-percentile Hausdorff distance in millimetres.
pub fn hd95(a: &RegionMask, b: &RegionMask, config: &MetricConfig) -> Result<f64> {
    hausdorff_percentile(a, b, 95.0, config)
}

/// Classical (maximum) Hausdorff distance between the mask surfaces.
pub fn hausdorff(a: &RegionMask, b: &RegionMask, config: &MetricConfig) -> Result<f64> {
    hausdorff_percentile(a, b, 100.0, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionScore {
    pub region: Region,
    pub dice: f64,
    pub hd95_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: CaseId,
    /// ET, TC, WT in that order.
    pub scores: [RegionScore; 3],
}

impl CaseReport {
    pub fn score(&self, region: Region) -> &RegionScore {
        self.scores.iter().find(|s| s.region == region).expect("all regions present")
    }
}

pub fn evaluate_case(case: CaseId, pred: &LabelVolume, truth: &LabelVolume, config: &MetricConfig) -> Result<CaseReport> {
    config.validate()?;
    pred.geometry().check_same_grid(truth.geometry(), "prediction vs ground truth")?;
    let score = |region| -> Result<RegionScore> {
        let p = extract_region(pred, region);
        let t = extract_region(truth, region);
        Ok(RegionScore {
            region,
            dice: dice(&p, &t, config)?,
            hd95_mm: hd95(&p, &t, config)?,
        })
    };
    Ok(CaseReport {
        case,
        scores: [score(Region::Et)?, score(Region::Tc)?, score(Region::Wt)?],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (divisor n - 1); 0 for a single value.
    pub std: f64,
    pub median: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = compensated_sum(values.iter().copied()) / n;
        let std = if values.len() > 1 {
            (compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Stats {
            mean,
            std,
            median: percentile_sorted(&sorted, 50.0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionSummary {
    pub dice: Stats,
    pub hd95_mm: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub count: usize,
    pub regions: BTreeMap<Region, RegionSummary>,
}

pub fn aggregate(reports: &[CaseReport]) -> Result<CohortSummary> {
    if reports.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let regions = Region::ALL
        .iter()
        .map(|&r| {
            let dice: Vec<f64> = reports.iter().map(|c| c.score(r).dice).collect();
            let hd: Vec<f64> = reports.iter().map(|c| c.score(r).hd95_mm).collect();
            let summary = RegionSummary {
                dice: Stats::of(&dice).expect("non-empty"),
                hd95_mm: Stats::of(&hd).expect("non-empty"),
            };
            (r, summary)
        })
        .collect();
    Ok(CohortSummary {
        count: reports.len(),
        regions,
    })
}
