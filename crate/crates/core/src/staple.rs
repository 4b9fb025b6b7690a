//! Binary STAPLE label fusion, a majority-vote baseline, and per-region
//! fusion of whole BraTS label maps.
//!
//! STAPLE treats each ensemble member as a rater with unknown sensitivity
//! `p_j` and specificity `q_j` and alternates
//!
//! * E-step: `W_i = a_i / (a_i + b_i)` with
//!   `a_i = f ∏_j p_j^D_ij (1-p_j)^(1-D_ij)` and
//!   `b_i = (1-f) ∏_j (1-q_j)^D_ij q_j^(1-D_ij)`,
//! * M-step: `p_j = Σ W_i D_ij / Σ W_i`,
//!   `q_j = Σ (1-W_i)(1-D_ij) / Σ (1-W_i)`,
//!
//! until the mean absolute change of `W` falls below the tolerance. The
//! products are evaluated in log space with per-voxel max subtraction, and
//! `p`, `q` are clamped to `[1e-6, 1 - 1e-6]` after every M-step.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::volume::{extract_region, reconstruct_labels, Geometry, LabelVolume, Region, RegionMask};

/// Lower clamp for sensitivities and specificities.
pub const PERFORMANCE_MIN: f64 = 1e-6;
/// Upper clamp for sensitivities and specificities.
pub const PERFORMANCE_MAX: f64 = 1.0 - 1e-6;

/// Foreground prior `f`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Prior {
    /// Mean foreground fraction across raters.
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for Prior {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Prior::Auto => s.serialize_str("auto"),
            Prior::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Prior {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PriorVisitor;

        impl Visitor<'_> for PriorVisitor {
            type Value = Prior;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"auto\" or a number in (0, 1)")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Prior, E> {
                if v == "auto" {
                    Ok(Prior::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Prior, E> {
                Ok(Prior::Fixed(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Prior, E> {
                Ok(Prior::Fixed(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Prior, E> {
                Ok(Prior::Fixed(v as f64))
            }
        }

        d.deserialize_any(PriorVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StapleConfig {
    pub prior: Prior,
    /// Stop when the mean |ΔW| between consecutive E-steps drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Voxels with `W >= decision_threshold` are foreground.
    pub decision_threshold: f64,
    pub initial_sensitivity: f64,
    pub initial_specificity: f64,
}

impl Default for StapleConfig {
    fn default() -> Self {
        Self {
            prior: Prior::Auto,
            tolerance: 1e-7,
            max_iterations: 100,
            decision_threshold: 0.5,
            initial_sensitivity: 0.99999,
            initial_specificity: 0.99999,
        }
    }
}

impl StapleConfig {
    pub fn validate(&self) -> Result<()> {
        let unit_open = |v: f64| v > 0.0 && v < 1.0;
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!("STAPLE tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("STAPLE max_iterations must be at least 1".into()));
        }
        if !unit_open(self.decision_threshold) {
            return Err(Error::InvalidConfig(format!(
                "STAPLE decision threshold must lie in (0, 1), got {}",
                self.decision_threshold
            )));
        }
        if !unit_open(self.initial_sensitivity) || !unit_open(self.initial_specificity) {
            return Err(Error::InvalidConfig("initial sensitivity/specificity must lie in (0, 1)".into()));
        }
        if let Prior::Fixed(f) = self.prior {
            if !unit_open(f) {
                return Err(Error::InvalidConfig(format!("STAPLE prior must lie in (0, 1), got {f}")));
            }
        }
        Ok(())
    }
}

/// Binary decisions of `J` raters over `N` voxels, stored voxel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterDecisions {
    region: Region,
    geometry: Geometry,
    num_raters: usize,
    decisions: Vec<bool>,
}

impl RaterDecisions {
    /// One rater per mask; all masks must share a grid.
    pub fn from_masks(masks: &[RegionMask]) -> Result<Self> {
        let first = masks.first().ok_or(Error::NoRaters)?;
        for m in &masks[1..] {
            first.geometry().check_same_grid(m.geometry(), "rater masks")?;
        }
        let n = first.data().len();
        let j = masks.len();
        let mut decisions = vec![false; n * j];
        for (r, m) in masks.iter().enumerate() {
            for (i, &d) in m.data().iter().enumerate() {
                decisions[i * j + r] = d;
            }
        }
        Ok(Self {
            region: first.region(),
            geometry: first.geometry().clone(),
            num_raters: j,
            decisions,
        })
    }

    /// Raters given as equal-length rows on a `1 × 1 × N` grid.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::NoRaters)?;
        let geometry = Geometry::unit([1, 1, first.len()])?;
        let masks = rows
            .iter()
            .map(|r| RegionMask::new(Region::Wt, geometry.clone(), r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_masks(&masks)
    }

    pub fn num_raters(&self) -> usize {
        self.num_raters
    }

    pub fn num_voxels(&self) -> usize {
        self.decisions.len() / self.num_raters
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    #[inline]
    pub fn get(&self, voxel: usize, rater: usize) -> bool {
        self.decisions[voxel * self.num_raters + rater]
    }

    /// Decisions of every rater at one voxel.
    #[inline]
    pub fn voxel(&self, voxel: usize) -> &[bool] {
        &self.decisions[voxel * self.num_raters..(voxel + 1) * self.num_raters]
    }

    /// Mean over raters of each rater's foreground fraction.
    pub fn mean_foreground_fraction(&self) -> f64 {
        let positives = self.decisions.iter().filter(|&&d| d).count();
        positives as f64 / self.decisions.len() as f64
    }

    fn mask(&self, data: Vec<bool>) -> RegionMask {
        RegionMask::new(self.region, self.geometry.clone(), data).expect("length matches geometry")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaterPerformance {
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
}

/// Posterior foreground probability per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusWeights(pub Vec<f64>);

impl ConsensusWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StapleOutcome {
    pub mask: RegionMask,
    /// Estimates after the last M-step.
    pub performance: RaterPerformance,
    /// Posterior from the last E-step.
    pub weights: ConsensusWeights,
    pub prior: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Auto prior collapsed to 0 or 1 (every rater empty, or every rater
    /// full); the mask is that unanimous answer and no EM was run.
    pub degenerate: bool,
    /// Observed-data log-likelihood evaluated at each E-step.
    pub log_likelihood: Vec<f64>,
}

fn clamp_performance(v: f64) -> f64 {
    v.clamp(PERFORMANCE_MIN, PERFORMANCE_MAX)
}

/// Runs binary STAPLE on one region.
pub fn staple_binary(decisions: &RaterDecisions, config: &StapleConfig) -> Result<StapleOutcome> {
    config.validate()?;
    let n = decisions.num_voxels();
    let j = decisions.num_raters();
    if j == 0 {
        return Err(Error::NoRaters);
    }

    let prior = match config.prior {
        Prior::Fixed(f) => f,
        Prior::Auto => decisions.mean_foreground_fraction(),
    };
    let mut sensitivity = vec![clamp_performance(config.initial_sensitivity); j];
    let mut specificity = vec![clamp_performance(config.initial_specificity); j];

    if !(prior > 0.0 && prior < 1.0) {
        let full = prior >= 1.0;
        return Ok(StapleOutcome {
            mask: decisions.mask(vec![full; n]),
            performance: RaterPerformance {
                sensitivity,
                specificity,
            },
            weights: ConsensusWeights(vec![if full { 1.0 } else { 0.0 }; n]),
            prior,
            iterations: 0,
            converged: true,
            degenerate: true,
            log_likelihood: Vec::new(),
        });
    }

    let mut weights = vec![0.0f64; n];
    let mut previous = vec![0.0f64; n];
    let mut log_likelihood = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=config.max_iterations {
        let ll = e_step(decisions, prior, &sensitivity, &specificity, &mut weights);
        log_likelihood.push(ll);
        m_step(decisions, &weights, &mut sensitivity, &mut specificity);
        iterations = it;
        if it > 1 {
            let change: f64 = weights.iter().zip(&previous).map(|(a, b)| (a - b).abs()).sum();
            if change / (n as f64) < config.tolerance {
                converged = true;
                break;
            }
        }
        std::mem::swap(&mut weights, &mut previous);
    }
    if !converged {
        // the loop swapped after the final E-step
        std::mem::swap(&mut weights, &mut previous);
    }

    let mask = decisions.mask(weights.iter().map(|&w| w >= config.decision_threshold).collect());
    Ok(StapleOutcome {
        mask,
        performance: RaterPerformance {
            sensitivity,
            specificity,
        },
        weights: ConsensusWeights(weights),
        prior,
        iterations,
        converged,
        degenerate: false,
        log_likelihood,
    })
}

/// Fills `weights` with the posterior and returns the observed-data
/// log-likelihood `Σ_i ln(a_i + b_i)` at the given parameters.
fn e_step(
    decisions: &RaterDecisions,
    prior: f64,
    sensitivity: &[f64],
    specificity: &[f64],
    weights: &mut [f64],
) -> f64 {
    let ln_f = prior.ln();
    let ln_1f = (1.0 - prior).ln();
    let ln_p: Vec<f64> = sensitivity.iter().map(|p| p.ln()).collect();
    let ln_1p: Vec<f64> = sensitivity.iter().map(|p| (1.0 - p).ln()).collect();
    let ln_q: Vec<f64> = specificity.iter().map(|q| q.ln()).collect();
    let ln_1q: Vec<f64> = specificity.iter().map(|q| (1.0 - q).ln()).collect();

    // Terms are summed in sorted order so that relabeling the raters gives
    // bit-identical weights; symmetric instances otherwise drift apart.
    let mut terms_a = Vec::with_capacity(ln_p.len());
    let mut terms_b = Vec::with_capacity(ln_p.len());
    let mut ll = 0.0;
    for (i, w) in weights.iter_mut().enumerate() {
        terms_a.clear();
        terms_b.clear();
        for (r, &d) in decisions.voxel(i).iter().enumerate() {
            if d {
                terms_a.push(ln_p[r]);
                terms_b.push(ln_1q[r]);
            } else {
                terms_a.push(ln_1p[r]);
                terms_b.push(ln_q[r]);
            }
        }
        terms_a.sort_unstable_by(f64::total_cmp);
        terms_b.sort_unstable_by(f64::total_cmp);
        let la = terms_a.iter().fold(ln_f, |acc, t| acc + t);
        let lb = terms_b.iter().fold(ln_1f, |acc, t| acc + t);
        let m = la.max(lb);
        let ea = (la - m).exp();
        let eb = (lb - m).exp();
        *w = ea / (ea + eb);
        ll += m + (ea + eb).ln();
    }
    ll
}

fn m_step(decisions: &RaterDecisions, weights: &[f64], sensitivity: &mut [f64], specificity: &mut [f64]) {
    let j = decisions.num_raters();
    let mut tp = vec![0.0f64; j];
    let mut tn = vec![0.0f64; j];
    let mut sum_w = 0.0f64;
    let mut sum_1w = 0.0f64;
    for (i, &w) in weights.iter().enumerate() {
        sum_w += w;
        sum_1w += 1.0 - w;
        for (r, &d) in decisions.voxel(i).iter().enumerate() {
            if d {
                tp[r] += w;
            } else {
                tn[r] += 1.0 - w;
            }
        }
    }
    for r in 0..j {
        if sum_w > 0.0 {
            sensitivity[r] = clamp_performance(tp[r] / sum_w);
        }
        if sum_1w > 0.0 {
            specificity[r] = clamp_performance(tn[r] / sum_1w);
        }
    }
}

/// Observed-data log-likelihood of the decisions under the given rater
/// performance and prior.
pub fn observed_log_likelihood(decisions: &RaterDecisions, performance: &RaterPerformance, prior: f64) -> f64 {
    let mut scratch = vec![0.0; decisions.num_voxels()];
    e_step(
        decisions,
        prior,
        &performance.sensitivity,
        &performance.specificity,
        &mut scratch,
    )
}

/// Foreground where strictly more than half of the raters vote foreground.
pub fn majority_vote(decisions: &RaterDecisions) -> RegionMask {
    let j = decisions.num_raters();
    let data = (0..decisions.num_voxels())
        .map(|i| 2 * decisions.voxel(i).iter().filter(|&&d| d).count() > j)
        .collect();
    decisions.mask(data)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    #[default]
    Staple,
    Majority,
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "staple" => Ok(FusionMethod::Staple),
            "majority" => Ok(FusionMethod::Majority),
            _ => Err(Error::InvalidConfig(format!("unknown fusion method {s:?}"))),
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMethod::Staple => "staple",
            FusionMethod::Majority => "majority",
        })
    }
}

/// Fuses one region across all predictions.
pub fn fuse_region(
    predictions: &[LabelVolume],
    region: Region,
    config: &StapleConfig,
    method: FusionMethod,
) -> Result<RegionMask> {
    let masks: Vec<RegionMask> = predictions.iter().map(|p| extract_region(p, region)).collect();
    let decisions = RaterDecisions::from_masks(&masks)?;
    Ok(match method {
        FusionMethod::Staple => staple_binary(&decisions, config)?.mask,
        FusionMethod::Majority => majority_vote(&decisions),
    })
}

/// Fuses ET, TC and WT independently, then rebuilds a nested label map.
pub fn fuse_labels(predictions: &[LabelVolume], config: &StapleConfig, method: FusionMethod) -> Result<LabelVolume> {
    let first = predictions.first().ok_or(Error::NoPredictions)?;
    for p in &predictions[1..] {
        first.geometry().check_same_grid(p.geometry(), "predictions")?;
    }
    let [et, tc, wt] = [Region::Et, Region::Tc, Region::Wt];
    let et = fuse_region(predictions, et, config, method)?;
    let tc = fuse_region(predictions, tc, config, method)?;
    let wt = fuse_region(predictions, wt, config, method)?;
    reconstruct_labels(&et, &tc, &wt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(r: &[&[u8]]) -> RaterDecisions {
        let rows: Vec<Vec<bool>> = r.iter().map(|row| row.iter().map(|&v| v == 1).collect()).collect();
        RaterDecisions::from_rows(&rows).unwrap()
    }

    #[test]
    fn identical_raters_reproduce_consensus() {
        let d = rows(&[&[1, 1, 0, 0, 1, 0], &[1, 1, 0, 0, 1, 0], &[1, 1, 0, 0, 1, 0]]);
        let out = staple_binary(&d, &StapleConfig::default()).unwrap();
        assert_eq!(out.mask.data(), &[true, true, false, false, true, false]);
        assert!(out.converged);
        for r in 0..3 {
            assert_eq!(out.performance.sensitivity[r], PERFORMANCE_MAX);
            assert_eq!(out.performance.specificity[r], PERFORMANCE_MAX);
        }
        assert_eq!(majority_vote(&d), out.mask);
    }

    #[test]
    fn single_rater_is_returned_unchanged() {
        let d = rows(&[&[0, 1, 1, 0, 1, 0, 0, 0]]);
        let out = staple_binary(&d, &StapleConfig::default()).unwrap();
        let expected: Vec<bool> = (0..8).map(|i| d.get(i, 0)).collect();
        assert_eq!(out.mask.data(), &expected[..]);
    }

    #[test]
    fn all_empty_raters_are_degenerate_not_errors() {
        let d = rows(&[&[0, 0, 0], &[0, 0, 0]]);
        let out = staple_binary(&d, &StapleConfig::default()).unwrap();
        assert!(out.degenerate);
        assert!(out.mask.is_empty());
        assert_eq!(out.weights.as_slice(), &[0.0; 3]);

        let d = rows(&[&[1, 1], &[1, 1]]);
        let out = staple_binary(&d, &StapleConfig::default()).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.mask.count(), 2);
    }

    #[test]
    fn no_raters_is_an_error() {
        assert!(matches!(RaterDecisions::from_masks(&[]), Err(Error::NoRaters)));
        assert!(matches!(RaterDecisions::from_rows(&[]), Err(Error::NoRaters)));
    }

    #[test]
    fn config_validation() {
        let bad = [
            StapleConfig { tolerance: 0.0, ..Default::default() },
            StapleConfig { max_iterations: 0, ..Default::default() },
            StapleConfig { decision_threshold: 1.0, ..Default::default() },
            StapleConfig { prior: Prior::Fixed(1.0), ..Default::default() },
            StapleConfig { initial_sensitivity: 0.0, ..Default::default() },
        ];
        let d = rows(&[&[1, 0]]);
        for c in bad {
            assert!(matches!(staple_binary(&d, &c), Err(Error::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn prior_serde() {
        let c: StapleConfig = serde_json::from_str(r#"{"prior": "auto"}"#).unwrap();
        assert_eq!(c.prior, Prior::Auto);
        let c: StapleConfig = serde_json::from_str(r#"{"prior": 0.25, "tolerance": 1e-9}"#).unwrap();
        assert_eq!(c.prior, Prior::Fixed(0.25));
        assert_eq!(c.tolerance, 1e-9);
        assert_eq!(c.max_iterations, 100);
        assert!(serde_json::from_str::<StapleConfig>(r#"{"prior": "half"}"#).is_err());
        assert_eq!(serde_json::to_string(&Prior::Auto).unwrap(), "\"auto\"");
    }

    #[test]
    fn majority_ties_go_to_background() {
        let d = rows(&[&[1, 1, 0], &[1, 0, 0], &[0, 1, 0]]);
        assert_eq!(majority_vote(&d).data(), &[true, true, false]);
        let d = rows(&[&[1, 0], &[0, 1]]);
        assert_eq!(majority_vote(&d).data(), &[false, false]);
    }

    #[test]
    fn fuse_identical_predictions() {
        let g = Geometry::unit([2, 2, 2]).unwrap();
        let l = LabelVolume::new(g, vec![0, 1, 2, 3, 3, 2, 1, 0]).unwrap();
        let preds = vec![l.clone(), l.clone(), l.clone()];
        for m in [FusionMethod::Staple, FusionMethod::Majority] {
            assert_eq!(fuse_labels(&preds, &StapleConfig::default(), m).unwrap(), l);
        }
    }

    #[test]
    fn fuse_errors() {
        assert!(matches!(
            fuse_labels(&[], &StapleConfig::default(), FusionMethod::Staple),
            Err(Error::NoPredictions)
        ));
        let a = LabelVolume::zeros(Geometry::unit([2, 2, 2]).unwrap());
        let b = LabelVolume::zeros(Geometry::unit([2, 2, 1]).unwrap());
        assert!(matches!(
            fuse_labels(&[a, b], &StapleConfig::default(), FusionMethod::Majority),
            Err(Error::GeometryMismatch(_))
        ));
    }

    fn raters_strategy() -> impl Strategy<Value = Vec<Vec<bool>>> {
        (1usize..6, 2usize..80).prop_flat_map(|(j, n)| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), j)
        })
    }

    /// Raters that are noisy copies of a shared random truth.
    fn noisy_raters_strategy() -> impl Strategy<Value = Vec<Vec<bool>>> {
        (1usize..6, 4usize..80).prop_flat_map(|(j, n)| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(proptest::collection::vec(proptest::bool::weighted(0.15), n), j),
            )
                .prop_map(|(truth, flips)| {
                    flips
                        .iter()
                        .map(|f| truth.iter().zip(f).map(|(&t, &x)| t ^ x).collect())
                        .collect()
                })
        })
    }

    proptest! {
        #[test]
        fn log_likelihood_non_decreasing(raters in raters_strategy()) {
            let d = RaterDecisions::from_rows(&raters).unwrap();
            let out = staple_binary(&d, &StapleConfig::default()).unwrap();
            for w in out.log_likelihood.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
        }

        #[test]
        fn rater_order_invariance(raters in raters_strategy(), seed in any::<u64>()) {
            let mut perm: Vec<usize> = (0..raters.len()).collect();
            // deterministic Fisher-Yates from the seed
            let mut s = seed;
            for i in (1..perm.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let shuffled: Vec<Vec<bool>> = perm.iter().map(|&p| raters[p].clone()).collect();
            let a = staple_binary(&RaterDecisions::from_rows(&raters).unwrap(), &StapleConfig::default()).unwrap();
            let b = staple_binary(&RaterDecisions::from_rows(&shuffled).unwrap(), &StapleConfig::default()).unwrap();
            for (i, &p) in perm.iter().enumerate() {
                prop_assert_eq!(a.performance.sensitivity[p], b.performance.sensitivity[i]);
                prop_assert_eq!(a.performance.specificity[p], b.performance.specificity[i]);
            }
            prop_assert_eq!(&a.weights, &b.weights);
            prop_assert_eq!(&a.mask, &b.mask);
        }

        #[test]
        fn unanimous_voxels_keep_their_value(raters in noisy_raters_strategy()) {
            let d = RaterDecisions::from_rows(&raters).unwrap();
            let out = staple_binary(&d, &StapleConfig::default()).unwrap();
            let perf = &out.performance;
            let better_than_chance = (0..d.num_raters())
                .all(|r| perf.sensitivity[r] > 0.5 && perf.specificity[r] > 0.5);
            prop_assume!(better_than_chance && !out.degenerate);
            for i in 0..d.num_voxels() {
                let votes = d.voxel(i);
                if votes.iter().all(|&v| v) {
                    prop_assert!(out.mask.data()[i], "voxel {} unanimous foreground", i);
                } else if votes.iter().all(|&v| !v) {
                    prop_assert!(!out.mask.data()[i], "voxel {} unanimous background", i);
                }
            }
        }

        #[test]
        fn deterministic(raters in raters_strategy()) {
            let d = RaterDecisions::from_rows(&raters).unwrap();
            let a = staple_binary(&d, &StapleConfig::default()).unwrap();
            let b = staple_binary(&d, &StapleConfig::default()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn weights_in_unit_interval(raters in raters_strategy()) {
            let d = RaterDecisions::from_rows(&raters).unwrap();
            let out = staple_binary(&d, &StapleConfig::default()).unwrap();
            prop_assert!(out.weights.as_slice().iter().all(|w| (0.0..=1.0).contains(w)));
            for r in 0..d.num_raters() {
                prop_assert!((PERFORMANCE_MIN..=PERFORMANCE_MAX).contains(&out.performance.sensitivity[r]));
                prop_assert!((PERFORMANCE_MIN..=PERFORMANCE_MAX).contains(&out.performance.specificity[r]));
            }
        }
    }
}
