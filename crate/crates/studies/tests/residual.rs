mod common;

use common::{noisy_copy, white};
use paperprint_core::{Error, Grid};
use paperprint_studies::residual::{
    quadrant_correlations, residual_table, residuals_at, subblock_residual,
};

#[test]
fn identical_grids_have_zero_residual() {
    let x = white(40, 40, 1);
    assert!(subblock_residual(&x, &x).unwrap().abs() <= 4.0 * f64::EPSILON);
    let y = x.map(|v| 3.0 * v - 2.0);
    assert!(subblock_residual(&x, &y).unwrap().abs() <= 4.0 * f64::EPSILON);
}

#[test]
fn quadrants_are_row_major() {
    let x = white(8, 8, 2);
    let mut y = x.clone();
    // corrupt only the top-right quadrant
    for r in 0..4 {
        for c in 4..8 {
            y.set(r, c, -x.get(r, c));
        }
    }
    let q = quadrant_correlations(&x, &y).unwrap();
    assert!((q[1] + 1.0).abs() < 1e-12);
    for i in [0, 2, 3] {
        assert!((q[i] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn odd_and_constant_inputs_are_rejected() {
    let x = white(9, 10, 3);
    assert!(subblock_residual(&x, &x).is_err());
    let mut c = white(10, 10, 4);
    for r in 0..5 {
        for col in 0..5 {
            c.set(r, col, 1.0);
        }
    }
    assert!(matches!(
        subblock_residual(&c, &white(10, 10, 5)),
        Err(Error::ZeroVariance(_))
    ));
}

#[test]
fn residual_equals_direct_formula() {
    let x = white(12, 16, 6);
    let y = noisy_copy(&x, 0.8, 7);
    let pearson = |a: &[f64], b: &[f64]| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb)).sum();
        let va: f64 = a.iter().map(|p| (p - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|q| (q - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    let quad = |g: &Grid, i: usize| -> Vec<f64> {
        let (r0, c0) = ((i / 2) * 6, (i % 2) * 8);
        (r0..r0 + 6)
            .flat_map(|r| (c0..c0 + 8).map(move |c| (r, c)))
            .map(|(r, c)| g.get(r, c))
            .collect()
    };
    let mean_q = (0..4)
        .map(|i| pearson(&quad(&x, i), &quad(&y, i)))
        .sum::<f64>()
        / 4.0;
    let expect = pearson(x.data(), y.data()) - mean_q;
    assert!((subblock_residual(&x, &y).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn residual_spread_shrinks_with_subblock_size() {
    let pairs: Vec<Grid> = (0..24).map(|i| white(200, 200, 100 + i)).collect();
    let mut features = pairs.clone();
    features.extend(
        pairs
            .iter()
            .enumerate()
            .map(|(i, x)| noisy_copy(x, 1.0, 500 + i as u64)),
    );
    let design: Vec<(usize, usize)> = (0..24).map(|i| (i, 24 + i)).collect();
    let r = residual_table(&features, &design, &[25, 50, 100], 0).unwrap();
    let stds = r.column("std_r").unwrap();
    assert!(stds[0] > stds[1] && stds[1] > stds[2], "{stds:?}");
    assert_eq!(
        r.column("count").unwrap(),
        vec![24.0 * 16.0, 24.0 * 4.0, 24.0]
    );
    // equal-variance quadrants leave no systematic offset
    let means = r.column("mean_r").unwrap();
    assert!(means[2].abs() < 3.0 * stds[2] / 24f64.sqrt());
}

#[test]
fn oversized_subblocks_are_rejected() {
    let f = vec![white(40, 40, 1), white(40, 40, 2)];
    assert!(residuals_at(&f, &[(0, 1)], 21).is_err());
    assert_eq!(residuals_at(&f, &[(0, 1)], 10).unwrap().len(), 4);
}

proptest::proptest! {
    #[test]
    fn residual_ignores_positive_affine_maps(seed in 0u64..1000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let x = white(16, 16, seed);
        let y = noisy_copy(&x, 1.0, seed + 7);
        let r = subblock_residual(&x, &y).unwrap();
        let moved = subblock_residual(&x.map(|v| a * v + b), &y).unwrap();
        proptest::prop_assert!((r - moved).abs() < 1e-9);
        proptest::prop_assert!(r.abs() <= 2.0);
    }
}
