mod common;

use common::{noisy_copy, white};
use paperprint_core::rng;
use paperprint_studies::covariance::{
    pair_correlations, shuffled_control, subblock_covariance_test, PairCorrelations,
};
use rand::Rng;

/// Pairs whose noise level varies from pair to pair, so all four quadrant
/// correlations of a pair move together.
fn heterogeneous_pairs(n: usize, seed: u64) -> Vec<PairCorrelations> {
    let mut r = rng::stream(seed, &[rng::tag("noise-levels")]);
    let mut roots = Vec::new();
    for i in 0..n {
        let x = white(32, 32, seed * 1000 + i as u64);
        let noise = r.random_range(0.3..2.0);
        roots.push(noisy_copy(&x, noise, seed * 1000 + 500 + i as u64));
        roots.push(x);
    }
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (2 * i, 2 * i + 1)).collect();
    pair_correlations(&roots, &pairs).unwrap()
}

#[test]
fn shared_noise_level_is_detected() {
    let pcs = heterogeneous_pairs(60, 1);
    let t = subblock_covariance_test(&pcs, true).unwrap();
    assert!(t.mean_corr > 0.5);
    assert!(t.test.p_value < 1e-3);
    assert_eq!(t.pairs, 60);
}

#[test]
fn independent_pairs_are_not_rejected() {
    let roots: Vec<_> = (0..400).map(|i| white(32, 32, 9000 + i)).collect();
    let pairs: Vec<(usize, usize)> = (0..200).map(|i| (2 * i, 2 * i + 1)).collect();
    let t = subblock_covariance_test(&pair_correlations(&roots, &pairs).unwrap(), false).unwrap();
    assert!(t.test.p_value > 0.01, "{t:?}");
    // quadrants hold a quarter of the pixels, so their correlations spread about twice as wide
    assert!((t.var_ratio - 4.0).abs() < 1.5, "{}", t.var_ratio);
}

#[test]
fn shuffled_control_rarely_rejects() {
    let pcs = heterogeneous_pairs(40, 2);
    let kept = (0..100)
        .filter(|&s| shuffled_control(&pcs, s).unwrap().test.p_value >= 1e-3)
        .count();
    assert!(kept >= 95, "{kept}/100");
}

#[test]
fn too_few_pairs_is_an_error() {
    let pcs = heterogeneous_pairs(10, 3);
    assert!(subblock_covariance_test(&pcs, true).is_err());
}
