use gliofuse_core::preprocess::{
    normalize_modality, rescale_percentiles, zscore_normalize, NormalizationPolicy, RescaleSpec, StepOrder,
};
use gliofuse_core::{Error, Geometry, ScalarVolume};
use gliofuse_testkit::stats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brain_like(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> ScalarVolume {
    let g = Geometry::unit(dims).unwrap();
    let data = (0..g.voxel_count())
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(50.0..3000.0) })
        .collect();
    ScalarVolume::new(g, data).unwrap()
}

#[test]
fn zscore_against_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let policy = NormalizationPolicy::default();
    for _ in 0..10 {
        let v = brain_like(&mut rng, [8, 8, 8]);
        let included: Vec<f64> = v.data().iter().copied().filter(|&x| x != 0.0).collect();
        let (mean, std) = stats::mean_std(&included);
        let out = zscore_normalize(&v, &policy).unwrap();
        for (x, y) in v.data().iter().zip(out.data()) {
            if *x == 0.0 {
                assert_eq!(*y, 0.0);
            } else {
                assert!((y - (x - mean) / std).abs() < 1e-9);
            }
        }
        let normalized: Vec<f64> = v
            .data()
            .iter()
            .zip(out.data())
            .filter(|(x, _)| **x != 0.0)
            .map(|(_, y)| *y)
            .collect();
        let (m, s) = stats::mean_std(&normalized);
        assert!(m.abs() < 1e-6 && (s - 1.0).abs() < 1e-6);
    }
}

#[test]
fn rescale_against_percentile_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let policy = NormalizationPolicy::default();
    let spec = RescaleSpec::default();
    for _ in 0..10 {
        let v = brain_like(&mut rng, [9, 7, 5]);
        let included: Vec<f64> = v.data().iter().copied().filter(|&x| x != 0.0).collect();
        let lo = stats::percentile(&included, 2.0);
        let hi = stats::percentile(&included, 98.0);
        let out = rescale_percentiles(&v, &spec, &policy).unwrap();
        for (x, y) in v.data().iter().zip(out.data()) {
            assert!((0.0..=1.0).contains(y));
            if *x == 0.0 {
                assert_eq!(*y, 0.0);
            } else {
                let expected = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
                assert!((y - expected).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn ramp_percentiles() {
    let g = Geometry::unit([1, 1, 101]).unwrap();
    let v = ScalarVolume::new(g, (0..=100).map(f64::from).collect()).unwrap();
    let policy = NormalizationPolicy {
        include_background: true,
        ..NormalizationPolicy::default()
    };
    let out = rescale_percentiles(&v, &RescaleSpec::default(), &policy).unwrap();
    assert!(out.data()[2].abs() < 1e-12);
    assert!((out.data()[98] - 1.0).abs() < 1e-12);
    assert_eq!(out.data()[100], 1.0);
    assert_eq!(out.data()[0], 0.0);
    assert!((out.data()[50] - 0.5).abs() < 1e-12);
}

#[test]
fn pipeline_orders() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let v = brain_like(&mut rng, [6, 6, 6]);
    let policy = NormalizationPolicy::default();
    let spec = RescaleSpec::default();
    let both = normalize_modality(&v, &policy, &spec, StepOrder::ZscoreThenRescale).unwrap();
    assert!(both.data().iter().all(|x| (0.0..=1.0).contains(x)));
    // Rescaling is invariant to the preceding affine z-score step.
    let direct = normalize_modality(&v, &policy, &spec, StepOrder::RescaleOnly).unwrap();
    for (a, b) in both.data().iter().zip(direct.data()) {
        assert!((a - b).abs() < 1e-9);
    }
    let z = normalize_modality(&v, &policy, &spec, StepOrder::ZscoreOnly).unwrap();
    assert_eq!(z, zscore_normalize(&v, &policy).unwrap());

    let flat = ScalarVolume::new(Geometry::unit([2, 2, 2]).unwrap(), vec![5.0; 8]).unwrap();
    assert!(matches!(zscore_normalize(&flat, &policy), Err(Error::DegenerateSpread(_))));
}
