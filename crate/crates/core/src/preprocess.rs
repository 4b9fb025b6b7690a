//! Per-modality intensity preprocessing: z-score normalization and
//! percentile-window rescaling.
//!
//! Statistics are taken over an *included set* of voxels. By default exact
//! zeros (skull-stripped background) are excluded; excluded voxels are written
//! as 0 by the z-score step and as `out_min` by the rescale step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean_std, percentile_sorted};
use crate::volume::ScalarVolume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationPolicy {
    /// Whether zero-valued voxels enter the statistics.
    pub include_background: bool,
    /// Minimum standard deviation accepted by the z-score step.
    pub epsilon: f64,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            include_background: false,
            epsilon: 1e-8,
        }
    }
}

impl NormalizationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "normalization epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Voxels that participate in the statistics.
    pub fn included_mask(&self, volume: &ScalarVolume) -> Vec<bool> {
        volume
            .data()
            .iter()
            .map(|&v| self.include_background || v != 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RescaleSpec {
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    pub out_min: f64,
    pub out_max: f64,
}

impl Default for RescaleSpec {
    fn default() -> Self {
        Self {
            lo_percentile: 2.0,
            hi_percentile: 98.0,
            out_min: 0.0,
            out_max: 1.0,
        }
    }
}

impl RescaleSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.lo_percentile
            && self.lo_percentile < self.hi_percentile
            && self.hi_percentile <= 100.0
            && self.out_min < self.out_max
            && self.out_min.is_finite()
            && self.out_max.is_finite();
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid rescale spec {self:?}")));
        }
        Ok(())
    }
}

/// Order of the two steps inside [`normalize_modality`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOrder {
    #[default]
    ZscoreThenRescale,
    RescaleThenZscore,
    ZscoreOnly,
    RescaleOnly,
}

/// `(x - mean) / std` over the included set (population std).
pub fn zscore_normalize(volume: &ScalarVolume, policy: &NormalizationPolicy) -> Result<ScalarVolume> {
    policy.validate()?;
    zscore_normalize_masked(volume, &policy.included_mask(volume), policy.epsilon)
}

/// Z-score with an explicit included-voxel mask.
pub fn zscore_normalize_masked(
    volume: &ScalarVolume,
    included: &[bool],
    epsilon: f64,
) -> Result<ScalarVolume> {
    check_mask(volume, included)?;
    let values = gather(volume, included);
    if values.len() < 2 {
        return Err(Error::TooFewVoxels {
            found: values.len(),
            required: 2,
        });
    }
    let (mean, std) = mean_std(&values).expect("non-empty");
    if !(std > epsilon) {
        return Err(Error::DegenerateSpread(std));
    }
    let data = volume
        .data()
        .iter()
        .zip(included)
        .map(|(&v, &inc)| if inc { (v - mean) / std } else { 0.0 })
        .collect();
    ScalarVolume::new(volume.geometry().clone(), data)
}

/// Linear stretch of the `[P_lo, P_hi]` percentile window onto
/// `[out_min, out_max]`, clamping outside the window.
pub fn rescale_percentiles(
    volume: &ScalarVolume,
    spec: &RescaleSpec,
    policy: &NormalizationPolicy,
) -> Result<ScalarVolume> {
    rescale_percentiles_masked(volume, &policy.included_mask(volume), spec)
}

pub fn rescale_percentiles_masked(
    volume: &ScalarVolume,
    included: &[bool],
    spec: &RescaleSpec,
) -> Result<ScalarVolume> {
    spec.validate()?;
    check_mask(volume, included)?;
    let mut values = gather(volume, included);
    if values.is_empty() {
        return Err(Error::TooFewVoxels {
            found: 0,
            required: 1,
        });
    }
    values.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&values, spec.lo_percentile);
    let hi = percentile_sorted(&values, spec.hi_percentile);
    if !(hi > lo) {
        return Err(Error::DegenerateSpread(hi - lo));
    }
    let width = spec.out_max - spec.out_min;
    let data = volume
        .data()
        .iter()
        .zip(included)
        .map(|(&v, &inc)| {
            if inc {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * width + spec.out_min
            } else {
                spec.out_min
            }
        })
        .collect();
    ScalarVolume::new(volume.geometry().clone(), data)
}

/// Both steps in the configured order. The included set is fixed from the
/// raw input so the second step sees the same voxels as the first.
pub fn normalize_modality(
    volume: &ScalarVolume,
    policy: &NormalizationPolicy,
    spec: &RescaleSpec,
    order: StepOrder,
) -> Result<ScalarVolume> {
    policy.validate()?;
    let included = policy.included_mask(volume);
    let eps = policy.epsilon;
    match order {
        StepOrder::ZscoreThenRescale => {
            let z = zscore_normalize_masked(volume, &included, eps)?;
            rescale_percentiles_masked(&z, &included, spec)
        }
        StepOrder::RescaleThenZscore => {
            let r = rescale_percentiles_masked(volume, &included, spec)?;
            zscore_normalize_masked(&r, &included, eps)
        }
        StepOrder::ZscoreOnly => zscore_normalize_masked(volume, &included, eps),
        StepOrder::RescaleOnly => rescale_percentiles_masked(volume, &included, spec),
    }
}

fn check_mask(volume: &ScalarVolume, included: &[bool]) -> Result<()> {
    if included.len() != volume.data().len() {
        return Err(Error::GeometryMismatch(format!(
            "mask of {} voxels for a volume of {}",
            included.len(),
            volume.data().len()
        )));
    }
    Ok(())
}

fn gather(volume: &ScalarVolume, included: &[bool]) -> Vec<f64> {
    volume
        .data()
        .iter()
        .zip(included)
        .filter_map(|(&v, &inc)| inc.then_some(v))
        .collect()
}
