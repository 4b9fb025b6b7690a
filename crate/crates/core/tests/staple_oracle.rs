use gliofuse_core::staple::{fuse_labels, staple_binary, FusionMethod, Prior, RaterDecisions, StapleConfig};
use gliofuse_core::{Geometry, LabelVolume};
use gliofuse_testkit::{labels, staple as oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn three_raters_eight_voxels() {
    let mark = |range: std::ops::Range<usize>| (0..8).map(|i| range.contains(&i)).collect::<Vec<_>>();
    let rows = vec![mark(0..4), mark(0..4), mark(2..6)];
    let config = StapleConfig::default();
    let out = staple_binary(&RaterDecisions::from_rows(&rows).unwrap(), &config).unwrap();
    assert!(out.converged);

    let reference = oracle::em(&rows, None, config.tolerance, 10 * config.max_iterations);
    assert!(max_abs_diff(out.weights.as_slice(), &reference.weights) < 1e-9);
    let expected_mask: Vec<bool> = reference.weights.iter().map(|&w| w >= 0.5).collect();
    assert_eq!(out.mask.data(), &expected_mask[..]);
    // The two agreeing raters carry the decision.
    assert_eq!(out.mask.data(), &rows[0][..]);
    for r in 0..3 {
        assert!((out.performance.sensitivity[r] - reference.sensitivity[r]).abs() < 1e-9);
        assert!((out.performance.specificity[r] - reference.specificity[r]).abs() < 1e-9);
    }
}

#[test]
fn random_instances_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let config = StapleConfig::default();
    for _ in 0..60 {
        let n = rng.gen_range(1..=400);
        let j = rng.gen_range(1..=6);
        let density = rng.gen_range(0.05..0.6);
        let flip = rng.gen_range(0.0..0.3);
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(density)).collect();
        let rows: Vec<Vec<bool>> = (0..j)
            .map(|_| truth.iter().map(|&t| t ^ rng.gen_bool(flip)).collect())
            .collect();
        let out = staple_binary(&RaterDecisions::from_rows(&rows).unwrap(), &config).unwrap();
        if out.degenerate {
            continue;
        }
        let reference = oracle::em(&rows, None, config.tolerance, config.max_iterations);
        assert_eq!(out.iterations, reference.iterations);
        let diff = max_abs_diff(out.weights.as_slice(), &reference.weights);
        assert!(diff < 1e-9, "n={n} j={j}: {diff}");
    }
}

#[test]
fn fixed_prior_matches_the_oracle() {
    let rows = vec![
        vec![true, true, false, false, true, false],
        vec![true, false, false, false, true, true],
        vec![true, true, true, false, false, false],
    ];
    let config = StapleConfig {
        prior: Prior::Fixed(0.3),
        ..StapleConfig::default()
    };
    let out = staple_binary(&RaterDecisions::from_rows(&rows).unwrap(), &config).unwrap();
    let reference = oracle::em(&rows, Some(0.3), config.tolerance, config.max_iterations);
    assert!(max_abs_diff(out.weights.as_slice(), &reference.weights) < 1e-9);
}

#[test]
fn two_agreeing_predictions_win() {
    let dims = [4, 4, 4];
    let g = Geometry::unit(dims).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let majority: Vec<u8> = (0..64).map(|_| rng.gen_range(0..4)).collect();
    let outlier: Vec<u8> = majority
        .iter()
        .map(|&l| if rng.gen_bool(0.3) { rng.gen_range(0..4) } else { l })
        .collect();
    let preds = [majority.clone(), majority.clone(), outlier]
        .map(|d| LabelVolume::new(g.clone(), d).unwrap());
    let config = StapleConfig::default();
    let fused = fuse_labels(&preds, &config, FusionMethod::Staple).unwrap();

    let region = |r: &str| -> Vec<bool> {
        let rows: Vec<Vec<bool>> = preds.iter().map(|p| labels::region_mask(p.data(), r)).collect();
        oracle::em(&rows, None, config.tolerance, 10 * config.max_iterations)
            .weights
            .iter()
            .map(|&w| w >= 0.5)
            .collect()
    };
    let expected = labels::reconstruct(&region("ET"), &region("TC"), &region("WT"));
    assert_eq!(fused.data(), &expected[..]);
    assert_eq!(fused.data(), &majority[..]);

    let voted = fuse_labels(&preds, &config, FusionMethod::Majority).unwrap();
    assert_eq!(voted.data(), &majority[..]);
}
