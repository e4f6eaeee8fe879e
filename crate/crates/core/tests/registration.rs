use paperprint_core::grid::Grid;
use paperprint_core::matching::correlation;
use paperprint_core::registration::*;
use paperprint_core::spectral::{fft2, ifft2_real, Complex64, Spectrum};
use paperprint_core::Error;

fn layout() -> FiducialLayout {
    FiducialLayout::from_spec(&LayoutSpec::default()).unwrap()
}

/// Shift of `b` relative to `a`: integer part from the phase-correlation peak,
/// fractional part from the residual phase at the fundamental frequency of each axis.
fn phase_shift(a: &Grid, b: &Grid, background: f64) -> (f64, f64) {
    use std::f64::consts::TAU;
    // zero background makes the translation circular as long as ink stays inside
    let (fa, fb) = (
        fft2(&a.map(|v| v - background)),
        fft2(&b.map(|v| v - background)),
    );
    let (rows, cols) = a.shape();
    let q: Vec<Complex64> = fb
        .data
        .iter()
        .zip(&fa.data)
        .map(|(x, y)| {
            let z = x * y.conj();
            if z.norm() > 1e-12 {
                z / z.norm()
            } else {
                Complex64::default()
            }
        })
        .collect();
    let surf = ifft2_real(Spectrum {
        rows,
        cols,
        data: q.clone(),
    });
    let best = (0..surf.len())
        .max_by(|&i, &j| surf.data()[i].total_cmp(&surf.data()[j]))
        .unwrap();
    let wrap = |v: usize, n: usize| {
        if v > n / 2 {
            v as f64 - n as f64
        } else {
            v as f64
        }
    };
    let (r0, c0) = (wrap(best / cols, rows), wrap(best % cols, cols));
    // remove the integer shift, then read the leftover linear phase
    let residual = |k: usize, l: usize| {
        let phase = TAU * (wrap(k, rows) * r0 / rows as f64 + wrap(l, cols) * c0 / cols as f64);
        q[k * cols + l] * Complex64::from_polar(1.0, phase)
    };
    (
        c0 - residual(0, 1).arg() * cols as f64 / TAU,
        r0 - residual(1, 0).arg() * rows as f64 / TAU,
    )
}

#[test]
fn identity_render_has_contrast() {
    let l = layout();
    let img = render_fiducial(&l, &Homography::identity(), &RenderParams::for_layout(&l)).unwrap();
    let seg = l.guide_lines[0];
    let (x, y) = ((seg.from[0] + seg.to[0]) / 2.0, seg.from[1]);
    let line_px = img.get(y as usize, x as usize);
    let bg = img.get(2, 2);
    assert!(
        bg - line_px >= 0.5 * (img.max() - img.min()),
        "{bg} {line_px}"
    );
}

#[test]
fn render_is_deterministic() {
    let l = layout();
    let mut p = RenderParams::for_layout(&l);
    p.noise_std = 0.02;
    p.seed = 11;
    let a = render_fiducial(&l, &Homography::identity(), &p).unwrap();
    let b = render_fiducial(&l, &Homography::identity(), &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn translation_shifts_rendering() {
    let l = layout();
    let p = RenderParams::for_layout(&l);
    let a = render_fiducial(&l, &Homography::identity(), &p).unwrap();
    let b = render_fiducial(&l, &Homography::translation(3.25, -1.5), &p).unwrap();
    let (dx, dy) = phase_shift(&a, &b, p.paper_level);
    assert!(
        (dx - 3.25).abs() < 0.1 && (dy + 1.5).abs() < 0.1,
        "{dx} {dy}"
    );
}

#[test]
fn degenerate_transform_is_an_error() {
    let l = layout();
    let h = Homography([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(render_fiducial(&l, &h, &RenderParams::for_layout(&l)).is_err());
}

#[test]
fn detects_clean_identity_target() {
    let l = layout();
    let img = render_fiducial(&l, &Homography::identity(), &RenderParams::for_layout(&l)).unwrap();
    let found = detect_fiducial(&img).unwrap();
    assert!(found.max_distance(&l.patch_square) <= 0.5, "{found:?}");
}

#[test]
fn detects_rotated_target() {
    let l = layout();
    let (rows, cols) = l.canvas;
    let center = [cols as f64 / 2.0, rows as f64 / 2.0];
    let h = Homography::rotation_about(7.0, center, 4.0, 6.0);
    let mut p = RenderParams::for_layout(&l);
    p.rows += 40;
    p.cols += 40;
    let img = render_fiducial(&l, &h, &p).unwrap();
    let truth = l.patch_square.transformed(&h).unwrap();
    let found = detect_fiducial(&img).unwrap();
    assert!(found.max_distance(&truth) <= 0.8, "{found:?} vs {truth:?}");
}

#[test]
fn detects_degraded_target() {
    let l = layout();
    let mut p = RenderParams::for_layout(&l);
    p.blur_sigma = 0.8;
    p.noise_std = 0.03;
    p.seed = 5;
    let img = render_fiducial(&l, &Homography::identity(), &p).unwrap();
    let found = detect_fiducial(&img).unwrap();
    assert!(found.max_distance(&l.patch_square) <= 0.5, "{found:?}");
}

#[test]
fn detection_is_translation_equivariant() {
    let l = layout();
    let mut p = RenderParams::for_layout(&l);
    p.rows += 10;
    p.cols += 10;
    let a = detect_fiducial(&render_fiducial(&l, &Homography::identity(), &p).unwrap()).unwrap();
    let b = detect_fiducial(&render_fiducial(&l, &Homography::translation(5.0, 3.0), &p).unwrap())
        .unwrap();
    assert!(b.max_distance(&a.translated(5.0, 3.0)) <= 0.2);
}

#[test]
fn blank_image_has_no_fiducial() {
    let img = Grid::filled(120, 120, 0.9);
    assert!(matches!(detect_fiducial(&img), Err(Error::NoFiducial(_))));
}

#[test]
fn axis_aligned_rectify_is_identity() {
    let img = Grid::from_fn(40, 40, |r, c| ((r * 13 + c * 7) % 11) as f64);
    let corners = CornerSet::axis_aligned(8.0, 8.0, 24.0, 24.0);
    let out = rectify(&img, &corners, 24).unwrap();
    let expect = img.crop(8, 8, 24, 24).unwrap();
    assert!(out.max_abs_diff(&expect).unwrap() < 1e-9);
}

#[test]
fn rectify_rejects_non_convex() {
    let img = Grid::filled(10, 10, 1.0);
    let bow = CornerSet([[0.0, 0.0], [8.0, 8.0], [8.0, 0.0], [0.0, 8.0]]);
    assert!(rectify(&img, &bow, 8).is_err());
}

fn smooth_source(n: usize) -> Grid {
    Grid::from_fn(n, n, |r, c| {
        let (x, y) = (c as f64, r as f64);
        (x / 3.1).sin() * (y / 4.3).cos() + (0.37 * x + 0.21 * y).sin()
    })
}

/// Warps `src` onto a canvas so that its square lands on `corners`.
fn warp_into(src: &Grid, corners: &CornerSet, rows: usize, cols: usize) -> Grid {
    let n = src.rows() as f64;
    let h = square_to_corners(corners, n).unwrap().inverse().unwrap();
    Grid::from_fn(rows, cols, |r, c| {
        let [u, v] = h.apply([c as f64 + 0.5, r as f64 + 0.5]).unwrap();
        sample_bilinear(src, u, v)
    })
}

#[test]
fn warp_then_rectify_round_trip() {
    let src = smooth_source(64);
    let corners = CornerSet([[12.0, 9.0], [78.0, 14.0], [74.0, 80.0], [9.0, 75.0]]);
    let canvas = warp_into(&src, &corners, 90, 90);
    let back = rectify(&canvas, &corners, 64).unwrap();
    let inner = |g: &Grid| g.crop(4, 4, 56, 56).unwrap();
    assert!(correlation(&inner(&back), &inner(&src)).unwrap() >= 0.99);
}

#[test]
fn perturbed_corners_degrade_rectification() {
    let src = Grid::from_fn(64, 64, |r, c| {
        ((r * 31 + c * 17) % 13) as f64 + (c as f64 / 2.0).sin()
    });
    let corners = CornerSet::axis_aligned(10.0, 10.0, 64.0, 64.0);
    let canvas = warp_into(&src, &corners, 84, 84);
    let exact = rectify(&canvas, &corners, 64).unwrap();
    let jittered = rectify(&canvas, &perturb_corners(&corners, 1.0, 3).unwrap(), 64).unwrap();
    let r0 = correlation(&exact, &src).unwrap();
    let r1 = correlation(&jittered, &src).unwrap();
    assert!(r1 < r0, "{r1} !< {r0}");
}

#[test]
fn perturbation_contract() {
    let c = CornerSet::axis_aligned(1.0, 2.0, 30.0, 30.0);
    assert_eq!(perturb_corners(&c, 0.0, 9).unwrap(), c);
    let a = perturb_corners(&c, 0.5, 1).unwrap();
    let b = perturb_corners(&c, 0.5, 2).unwrap();
    assert_ne!(a, b);
    assert!(perturb_corners(&c, -1.0, 0).is_err());

    let mut offsets = vec![Vec::new(); 8];
    for seed in 0..10_000 {
        let p = perturb_corners(&c, 0.5, seed).unwrap();
        for k in 0..4 {
            offsets[2 * k].push(p.0[k][0] - c.0[k][0]);
            offsets[2 * k + 1].push(p.0[k][1] - c.0[k][1]);
        }
    }
    for o in offsets {
        let n = o.len() as f64;
        let m = o.iter().sum::<f64>() / n;
        let sd = (o.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.5).abs() <= 0.02, "{sd}");
    }
}
