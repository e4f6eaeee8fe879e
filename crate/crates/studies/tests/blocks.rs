mod common;

use common::{noisy_copy, white};
use paperprint_core::acquisition::AcquisitionId;
use paperprint_studies::blocks::{block_cut_study, design_by_name, level_scores, root_crops};

#[test]
fn level_scores_count_and_level_zero() {
    let g: Vec<_> = (0..3).map(|i| white(32, 32, i)).collect();
    let pairs = [(0, 1), (1, 2)];
    assert_eq!(level_scores(&g, &pairs, 2).unwrap().len(), 2 * 16);
    let l0 = level_scores(&g, &pairs, 0).unwrap();
    assert_eq!(
        l0[0],
        paperprint_core::matching::correlation(&g[0], &g[1]).unwrap()
    );
}

#[test]
fn root_crop_is_centered_and_divisible() {
    let g = white(200, 200, 1);
    let r = root_crops(&[g.clone()], 0.8, 3).unwrap();
    assert_eq!(r[0].shape(), (160, 160));
    assert_eq!(r[0].get(0, 0), g.get(20, 20));
    let r = root_crops(&[white(100, 100, 2)], 0.8, 3).unwrap();
    assert_eq!(r[0].shape(), (80, 80));
}

/// Independent white-noise blocks: the correlation of an `m`-pixel block has
/// standard deviation `1/sqrt(m)`, so each cut doubles it.
#[test]
fn white_noise_unmatched_ratio_is_two() {
    let n = 40;
    let mut features: Vec<_> = (0..n).map(|i| white(128, 128, 10 + i as u64)).collect();
    let copies: Vec<_> = (0..n)
        .map(|i| noisy_copy(&features[i], 1.0, 900 + i as u64))
        .collect();
    features.extend(copies);
    let design = paperprint_core::acquisition::PairDesign {
        matched: (0..n).map(|i| (i, n + i)).collect(),
        unmatched: (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
    };
    let r = block_cut_study(&features, &design, 3, 1.0, 0).unwrap();
    assert_eq!(r.rows.len(), 4);
    let ratios = r.column("std_ratio0").unwrap();
    for v in &ratios[1..] {
        assert!((v - 2.0).abs() < 0.15, "{ratios:?}");
    }
    let mu1 = r.column("mu1").unwrap();
    assert!(
        mu1.iter().all(|m| (m - 1.0 / 2f64.sqrt()).abs() < 0.03),
        "{mu1:?}"
    );
    assert!(r.summary["max_abs_dmu0"] < 0.02);
}

#[test]
fn small_blocks_stop_subdividing() {
    let features: Vec<_> = (0..3)
        .flat_map(|i| {
            let x = white(64, 64, i);
            [noisy_copy(&x, 0.5, 10 + i), x]
        })
        .collect();
    let design = paperprint_core::acquisition::PairDesign {
        matched: vec![(0, 1), (2, 3), (4, 5)],
        unmatched: vec![(0, 2), (1, 4), (3, 5)],
    };
    // 64 -> 32 -> 16 -> (8 is below the minimum)
    let r = block_cut_study(&features, &design, 3, 1.0, 0).unwrap();
    assert_eq!(r.column("edge_px").unwrap(), vec![64.0, 32.0, 16.0]);
}

#[test]
fn designs_by_name() {
    let ids: Vec<AcquisitionId> = (0..3)
        .flat_map(|p| {
            (0..2).map(move |r| AcquisitionId {
                patch: p,
                scanner: 0,
                repeat: r,
            })
        })
        .collect();
    let all = design_by_name("all_patch_pairs", &ids, 0).unwrap();
    assert_eq!(all.matched.len(), 3);
    // same-slot pairs: 3 patch pairs x 2 slots
    assert_eq!(all.unmatched.len(), 6);
    assert_eq!(
        design_by_name("one_partner", &ids, 0)
            .unwrap()
            .unmatched
            .len(),
        3 * 4
    );
    assert!(design_by_name("everything", &ids, 0).is_err());
}
