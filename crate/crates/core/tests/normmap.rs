use paperprint_core::grid::{convolve_same, gaussian_blur};
use paperprint_core::matching::correlation;
use paperprint_core::normmap::*;
use paperprint_core::optics::{
    render_scan, Orientation, ReflectanceParams, ScanImage, ScannerGeometry, Vec3,
};
use paperprint_core::synth::{NormalField, PITCH_300PPI};
use paperprint_core::{rng, Error, Grid};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn noise(rows: usize, cols: usize, seed: u64) -> Grid {
    let mut r = rng::stream(seed, &[rng::tag("normmap-test")]);
    Grid::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}

fn scans_of(nf: &NormalField) -> Vec<ScanImage> {
    let geom = ScannerGeometry::default();
    Orientation::ALL
        .iter()
        .map(|&o| render_scan(nf, &geom, &ReflectanceParams::diffuse(), o, PITCH_300PPI).unwrap())
        .collect()
}

#[test]
fn identical_constant_scans_give_zero() {
    let scans: Vec<ScanImage> = Orientation::ALL
        .iter()
        .map(|&o| ScanImage {
            intensities: Grid::filled(6, 6, 0.4),
            orientation: o,
            pixel_pitch: 1.0,
        })
        .collect();
    let nm = estimate_normmap(&scans).unwrap();
    assert_eq!(nm.nx_scaled.max_abs(), 0.0);
    assert_eq!(nm.ny_scaled.max_abs(), 0.0);
}

#[test]
fn missing_orientation_is_reported() {
    let scans = scans_of(&NormalField::uniform(4, 4, Vec3::z()));
    assert!(matches!(
        estimate_normmap(&scans[..3]),
        Err(Error::MissingOrientation(270))
    ));
}

/// Constant tilted field: the difference is `s n_y` with
/// `s = 2 l o_y ∫_{-a}^{a} (x² + c²)^{-3/2} dx = 2 l o_y · 2a / (c² √(a² + c²))`.
#[test]
fn constant_field_matches_closed_form_gain() {
    let ny = 0.12;
    let n = Vec3::new(0.0, ny, (1.0 - ny * ny).sqrt());
    for (rows, cols) in [(8, 8), (6, 10)] {
        let nm = estimate_normmap(&scans_of(&NormalField::uniform(rows, cols, n))).unwrap();
        assert_eq!(nm.shape(), (rows, cols));
        let g = ScannerGeometry::default();
        let c2 = g.light_offset_y.powi(2) + g.light_offset_z.powi(2);
        let a = g.light_span_near;
        let s = 2.0 * g.light_strength * g.light_offset_y * 2.0 * a / (c2 * (a * a + c2).sqrt());
        for &v in nm.ny_scaled.data() {
            assert!((v - s * ny).abs() <= 1e-9 * s * ny, "{v} vs {}", s * ny);
        }
        assert!(nm.nx_scaled.max_abs() <= 1e-12);
    }
}

fn scan_set(data: &[Vec<f64>; 4], n: usize) -> Vec<ScanImage> {
    Orientation::ALL
        .iter()
        .zip(data)
        .map(|(&o, d)| ScanImage {
            intensities: Grid::new(n, n, d.clone()).unwrap(),
            orientation: o,
            pixel_pitch: 1.0,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimator_is_linear(
        i in prop::array::uniform4(prop::collection::vec(-1.0f64..1.0, 25)),
        j in prop::array::uniform4(prop::collection::vec(-1.0f64..1.0, 25)),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mix: [Vec<f64>; 4] = std::array::from_fn(|k| {
            i[k].iter().zip(&j[k]).map(|(x, y)| a * x + b * y).collect()
        });
        let (ei, ej) = (estimate_normmap(&scan_set(&i, 5)).unwrap(), estimate_normmap(&scan_set(&j, 5)).unwrap());
        let em = estimate_normmap(&scan_set(&mix, 5)).unwrap();
        let want_x = ei.nx_scaled.scale(a).add(&ej.nx_scaled.scale(b)).unwrap();
        let want_y = ei.ny_scaled.scale(a).add(&ej.ny_scaled.scale(b)).unwrap();
        prop_assert!(em.nx_scaled.max_abs_diff(&want_x).unwrap() < 1e-12);
        prop_assert!(em.ny_scaled.max_abs_diff(&want_y).unwrap() < 1e-12);
    }
}

#[test]
fn alpha_round_trip() {
    let confocal = NormMap::new(
        noise(30, 30, 1).scale(0.05),
        noise(30, 30, 2).scale(0.04),
        NormSource::Confocal,
    )
    .unwrap();
    let scanner = confocal.scaled(0.37);
    let (sx_c, sy_c) = confocal.component_stds();
    let (sx_s, sy_s) = scanner.component_stds();
    assert!((estimate_alpha(sx_s, sy_s, sx_c, sy_c).unwrap() - 0.37).abs() < 1e-12);
    assert!(estimate_alpha(0.0, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn completion_round_trip() {
    let p = noise(20, 20, 3).scale(0.2);
    let q = noise(20, 20, 4).scale(0.2);
    let nf = NormalField::from_gradients(&p, &q).unwrap();
    let alpha = 0.61;
    let done = complete_z(
        &NormMap::from_normals(&nf, NormSource::Confocal).scaled(alpha),
        alpha,
    )
    .unwrap();
    assert_eq!(done.clamped, 0);
    for (got, want) in [
        (&done.normals.nx, &nf.nx),
        (&done.normals.ny, &nf.ny),
        (&done.normals.nz, &nf.nz),
    ] {
        assert!(got.max_abs_diff(want).unwrap() < 1e-12);
    }
}

#[test]
fn deblur_of_identity_is_a_delta() {
    let c = noise(64, 64, 5);
    let fit = fit_deblur_filter(&c, &c, 7, &[1e-8], 5, 0).unwrap();
    let k = &fit.kernel.coefficients;
    assert!(k.get(3, 3) >= 0.99);
    for i in 0..7 {
        for j in 0..7 {
            if (i, j) != (3, 3) {
                assert!(k.get(i, j).abs() <= 0.01);
            }
        }
    }
}

/// A one-pixel shift is a blur whose inverse is again a 7×7 kernel, so the
/// unregularized fit has to undo it exactly.
#[test]
fn deblur_inverts_an_invertible_blur() {
    let c = noise(64, 64, 6);
    let mut shift = Grid::zeros(7, 7);
    shift.set(3, 4, 1.0);
    let s = convolve_same(&c, &shift).unwrap();
    let fit = fit_deblur_filter(&s, &c, 7, &[1e-12], 5, 0).unwrap();
    let back = fit.kernel.apply(&s).unwrap();
    let (mut err, mut norm) = (0.0, 0.0);
    for r in 8..56 {
        for col in 8..56 {
            err += (back.get(r, col) - c.get(r, col)).powi(2);
            norm += c.get(r, col).powi(2);
        }
    }
    assert!((err / norm).sqrt() <= 1e-6, "{}", (err / norm).sqrt());
}

#[test]
fn deblur_improves_noisy_blurred_maps() {
    let c = gaussian_blur(&noise(96, 96, 7), 0.7, 0.7);
    let blurred = gaussian_blur(&c, 0.6, 1.2);
    let s = blurred
        .add(&noise(96, 96, 8).scale(0.05 * blurred.std()))
        .unwrap();
    let fit = fit_deblur_filter(&s, &c, 7, &default_lambda_grid(), 5, 1).unwrap();
    assert!(fit.kernel.center_dominates());
    let before = correlation(&s, &c).unwrap();
    let after = correlation(&fit.kernel.apply(&s).unwrap(), &c).unwrap();
    assert!(after > before, "{before} -> {after}");
}

#[test]
fn nnls_recovers_delta_and_gaussian() {
    let c = noise(80, 80, 9);
    let delta = fit_blur_filter_nnls(&c, &c, 3).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = if (i, j) == (1, 1) { 1.0 } else { 0.0 };
            assert!((delta.coefficients.get(i, j) - want).abs() <= 1e-6);
        }
    }
    let g = gaussian_kernel_2d(0.0, 0.0, 0.8, 1.5, 9);
    let s = convolve_same(&c, &g).unwrap();
    let k = fit_blur_filter_nnls(&c, &s, 9).unwrap();
    assert!(k.coefficients.data().iter().all(|&v| v >= 0.0));
    assert!(k.coefficients.max_abs_diff(&g).unwrap() <= 0.02);
}

#[test]
fn gaussian_fit_recovers_parameters() {
    let c = noise(80, 80, 10);
    let s = convolve_same(&c, &gaussian_kernel_2d(0.0, 0.0, 0.8, 1.5, 9)).unwrap();
    let fit = fit_blur_gaussian(&c, &s, 9, 4, 0).unwrap();
    assert!(
        (fit.sigma_x - 0.8).abs() <= 0.1 && (fit.sigma_y - 1.5).abs() <= 0.1,
        "{fit:?}"
    );

    let id = fit_blur_gaussian(&c, &c, 9, 4, 0).unwrap();
    assert!(id.sigma_x >= SIGMA_FLOOR && id.sigma_y >= SIGMA_FLOOR);
    assert!(id.sigma_x < 0.3 && id.sigma_y < 0.3, "{id:?}");

    // y-component data blurred less along y than along x
    let s = gaussian_blur(&c, 1.2, 0.6)
        .add(&noise(80, 80, 11).scale(0.02))
        .unwrap();
    let fit = fit_blur_gaussian(&c, &s, 9, 4, 0).unwrap();
    assert!(fit.sigma_y < fit.sigma_x, "{fit:?}");
}
