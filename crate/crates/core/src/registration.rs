//! Printed registration target: rendering, corner detection and rectification.
//!
//! Coordinates are `(x, y)` in pixels with `y` pointing down; pixel `(r, c)`
//! covers `[c, c+1) × [r, r+1)`, so its center sits at `(c + 0.5, r + 0.5)`.

use nalgebra::{Matrix3, SMatrix, SVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{gaussian_blur, Grid};
use crate::rng;

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: Point,
    pub to: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0
            && p[0] < self.x0 + self.width
            && p[1] >= self.y0
            && p[1] < self.y0 + self.height
    }
}

/// Four corners ordered top-left, top-right, bottom-right, bottom-left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerSet(pub [Point; 4]);

impl CornerSet {
    pub fn axis_aligned(x0: f64, y0: f64, width: f64, height: f64) -> Self {
        Self([
            [x0, y0],
            [x0 + width, y0],
            [x0 + width, y0 + height],
            [x0, y0 + height],
        ])
    }

    /// Strictly convex with a consistent winding.
    pub fn is_convex(&self) -> bool {
        let p = &self.0;
        let mut sign = 0.0;
        for i in 0..4 {
            let (a, b, c) = (p[i], p[(i + 1) % 4], p[(i + 2) % 4]);
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross == 0.0 || !cross.is_finite() {
                return false;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }

    pub fn max_distance(&self, other: &CornerSet) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self(self.0.map(|p| [p[0] + dx, p[1] + dy]))
    }

    pub fn transformed(&self, h: &Homography) -> Result<Self> {
        let mut out = self.0;
        for p in &mut out {
            *p = h.apply(*p)?;
        }
        Ok(Self(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homography(pub [[f64; 3]; 3]);

impl Homography {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])
    }

    /// Rotation by `deg` degrees about `center`, then a translation.
    pub fn rotation_about(deg: f64, center: Point, dx: f64, dy: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        let (cx, cy) = (center[0], center[1]);
        Self([
            [c, -s, cx - c * cx + s * cy + dx],
            [s, c, cy - s * cx - c * cy + dy],
            [0.0, 0.0, 1.0],
        ])
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.0[i][j])
    }

    fn from_matrix(m: Matrix3<f64>) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])))
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = self.matrix();
        let det = m.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::Singular("degenerate projective transform".into()));
        }
        m.try_inverse()
            .map(Self::from_matrix)
            .ok_or_else(|| Error::Singular("degenerate projective transform".into()))
    }

    pub fn apply(&self, p: Point) -> Result<Point> {
        let h = &self.0;
        let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
        if w.abs() < 1e-12 {
            return Err(Error::Domain("point maps to infinity".into()));
        }
        Ok([
            (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
            (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w,
        ])
    }

    /// Exact homography taking four source points to four destinations.
    pub fn from_correspondences(src: &[Point; 4], dst: &[Point; 4]) -> Result<Self> {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for i in 0..4 {
            let ([x, y], [u, v]) = (src[i], dst[i]);
            let r = 2 * i;
            a.set_row(
                r,
                &SMatrix::<f64, 1, 8>::from_row_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]),
            );
            a.set_row(
                r + 1,
                &SMatrix::<f64, 1, 8>::from_row_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]),
            );
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("corner correspondences are degenerate".into()))?;
        Ok(Self([
            [h[0], h[1], h[2]],
            [h[3], h[4], h[5]],
            [h[6], h[7], 1.0],
        ]))
    }
}

/// Physical layout in millimetres, converted to pixels by `px_per_mm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub px_per_mm: f64,
    pub patch_mm: f64,
    pub line_extension_mm: f64,
    pub line_width_mm: f64,
    pub circle_radius_mm: f64,
    pub qr_size_mm: f64,
    pub qr_gap_mm: f64,
    pub margin_mm: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            px_per_mm: 300.0 / 25.4,
            patch_mm: 200.0 * 25.4 / 300.0,
            line_extension_mm: 3.0,
            line_width_mm: 0.2,
            circle_radius_mm: 1.0,
            qr_size_mm: 10.0,
            qr_gap_mm: 5.0,
            margin_mm: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiducialLayout {
    pub patch_square: CornerSet,
    pub guide_lines: Vec<Segment>,
    pub line_width: f64,
    pub circles: Vec<Circle>,
    pub qr_region: Rect,
    /// Canvas `(rows, cols)` that holds the whole target at identity.
    pub canvas: (usize, usize),
}

impl FiducialLayout {
    pub fn from_spec(spec: &LayoutSpec) -> Result<Self> {
        let k = spec.px_per_mm;
        let values = [
            spec.px_per_mm,
            spec.patch_mm,
            spec.line_width_mm,
            spec.circle_radius_mm,
            spec.qr_size_mm,
        ];
        if values.iter().any(|&v| !(v > 0.0)) {
            return Err(invalid("layout", "dimensions must be positive"));
        }
        let (s, ext, r) = (
            spec.patch_mm * k,
            spec.line_extension_mm * k,
            spec.circle_radius_mm * k,
        );
        if ext < 1.5 * r {
            return Err(invalid(
                "layout",
                "guide lines must extend past the circle search window",
            ));
        }
        let x0 = spec.margin_mm * k + ext;
        let y0 = x0;
        let square = CornerSet::axis_aligned(x0, y0, s, s);
        let mut lines = Vec::new();
        for y in [y0, y0 + s] {
            lines.push(Segment {
                from: [x0 - ext, y],
                to: [x0 + s + ext, y],
            });
        }
        for x in [x0, x0 + s] {
            lines.push(Segment {
                from: [x, y0 - ext],
                to: [x, y0 + s + ext],
            });
        }
        let circles = square
            .0
            .iter()
            .map(|&c| Circle {
                center: c,
                radius: r,
            })
            .collect();
        let q = spec.qr_size_mm * k;
        let qr = Rect {
            x0: x0 + s + ext + spec.qr_gap_mm * k,
            y0,
            width: q,
            height: q,
        };
        let cols = (qr.x0 + q + spec.margin_mm * k).ceil() as usize;
        let rows = (y0 + s + ext + spec.margin_mm * k).ceil() as usize;
        Ok(Self {
            patch_square: square,
            guide_lines: lines,
            line_width: spec.line_width_mm * k,
            circles,
            qr_region: qr,
            canvas: (rows, cols),
        })
    }

    /// Ink coverage at a layout point: 1 for printed ink, 0 for bare paper.
    fn ink(&self, p: Point, qr_bits: &QrTexture) -> f64 {
        let half = self.line_width / 2.0;
        for seg in &self.guide_lines {
            if distance_to_segment(p, seg) <= half {
                return 1.0;
            }
        }
        for c in &self.circles {
            if (p[0] - c.center[0]).hypot(p[1] - c.center[1]) <= c.radius {
                return 1.0;
            }
        }
        if self.qr_region.contains(p) {
            return qr_bits.at(&self.qr_region, p);
        }
        0.0
    }
}

fn distance_to_segment(p: Point, s: &Segment) -> f64 {
    let (dx, dy) = (s.to[0] - s.from[0], s.to[1] - s.from[1]);
    let len2 = dx * dx + dy * dy;
    let t = (((p[0] - s.from[0]) * dx + (p[1] - s.from[1]) * dy) / len2).clamp(0.0, 1.0);
    (p[0] - s.from[0] - t * dx).hypot(p[1] - s.from[1] - t * dy)
}

/// Opaque random module pattern standing in for a printed code.
struct QrTexture {
    modules: usize,
    bits: Vec<bool>,
}

impl QrTexture {
    fn new(modules: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, &[rng::tag("qr")]);
        Self {
            modules,
            bits: (0..modules * modules)
                .map(|_| rng.random::<bool>())
                .collect(),
        }
    }

    fn at(&self, rect: &Rect, p: Point) -> f64 {
        let i = (((p[1] - rect.y0) / rect.height) * self.modules as f64) as usize;
        let j = (((p[0] - rect.x0) / rect.width) * self.modules as f64) as usize;
        let (i, j) = (i.min(self.modules - 1), j.min(self.modules - 1));
        if self.bits[i * self.modules + j] {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub rows: usize,
    pub cols: usize,
    pub supersample: usize,
    pub paper_level: f64,
    pub ink_level: f64,
    pub blur_sigma: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl RenderParams {
    pub fn for_layout(layout: &FiducialLayout) -> Self {
        Self {
            rows: layout.canvas.0,
            cols: layout.canvas.1,
            supersample: 4,
            paper_level: 0.9,
            ink_level: 0.1,
            blur_sigma: 0.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

/// Anti-aliased target warped by `transform` (layout → image), then degraded.
pub fn render_fiducial(
    layout: &FiducialLayout,
    transform: &Homography,
    params: &RenderParams,
) -> Result<Grid> {
    let inv = transform.inverse()?;
    if params.supersample == 0 {
        return Err(invalid("supersample", "must be at least 1"));
    }
    let qr = QrTexture::new(21, params.seed);
    let n = params.supersample;
    let step = 1.0 / n as f64;
    let contrast = params.ink_level - params.paper_level;
    let data: Vec<f64> = {
        use rayon::prelude::*;
        (0..params.rows * params.cols)
            .into_par_iter()
            .map(|i| {
                let (r, c) = ((i / params.cols) as f64, (i % params.cols) as f64);
                let mut ink = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let p = [c + (b as f64 + 0.5) * step, r + (a as f64 + 0.5) * step];
                        if let Ok(q) = inv.apply(p) {
                            ink += layout.ink(q, &qr);
                        }
                    }
                }
                params.paper_level + contrast * ink / (n * n) as f64
            })
            .collect()
    };
    let mut img = Grid::new(params.rows, params.cols, data)?;
    if params.blur_sigma > 0.0 {
        img = gaussian_blur(&img, params.blur_sigma, params.blur_sigma);
    }
    if params.noise_std > 0.0 {
        let mut rng = rng::stream(params.seed, &[rng::tag("fiducial-noise")]);
        for v in img.data_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += params.noise_std * e;
        }
    }
    Ok(img)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub angle_step_deg: f64,
    pub rho_step: f64,
    pub peak_fraction: f64,
    /// Expected disk radius in pixels; the refinement window is 1.5 times this.
    pub circle_radius: f64,
    pub refine_iterations: usize,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            angle_step_deg: 1.0,
            rho_step: 1.0,
            peak_fraction: 0.6,
            circle_radius: LayoutSpec::default().circle_radius_mm * LayoutSpec::default().px_per_mm,
            refine_iterations: 5,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct HoughLine {
    theta: f64,
    rho: f64,
    votes: u32,
}

impl HoughLine {
    fn intersect(&self, other: &HoughLine) -> Option<Point> {
        let (s1, c1) = self.theta.sin_cos();
        let (s2, c2) = other.theta.sin_cos();
        let det = c1 * s2 - s1 * c2;
        if det.abs() < 1e-6 {
            return None;
        }
        Some([
            (self.rho * s2 - other.rho * s1) / det,
            (c1 * other.rho - c2 * self.rho) / det,
        ])
    }
}

pub fn detect_fiducial(img: &Grid) -> Result<CornerSet> {
    detect_fiducial_with(img, &DetectParams::default())
}

/// Hough lines through dark pixels, pairwise intersections, then disk-centroid
/// refinement of each corner.
pub fn detect_fiducial_with(img: &Grid, params: &DetectParams) -> Result<CornerSet> {
    let (lo, hi) = (img.min(), img.max());
    if !(hi - lo > 0.2) {
        return Err(Error::NoFiducial("image has no contrast".into()));
    }
    let cut = 0.5 * (lo + hi);
    let (rows, cols) = img.shape();
    let dark: Vec<Point> = (0..rows * cols)
        .filter(|&i| img.data()[i] < cut)
        .map(|i| [(i % cols) as f64 + 0.5, (i / cols) as f64 + 0.5])
        .collect();
    if dark.is_empty() {
        return Err(Error::NoFiducial("no dark pixels".into()));
    }

    let n_theta = (180.0 / params.angle_step_deg).round() as usize;
    let rho_max = (rows as f64).hypot(cols as f64);
    let n_rho = (2.0 * rho_max / params.rho_step).ceil() as usize + 1;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| (t as f64 * params.angle_step_deg).to_radians().sin_cos())
        .collect();
    let mut acc = vec![0u32; n_theta * n_rho];
    for p in &dark {
        for (t, &(s, c)) in trig.iter().enumerate() {
            let rho = p[0] * c + p[1] * s;
            let bin = ((rho + rho_max) / params.rho_step).round() as usize;
            acc[t * n_rho + bin] += 1;
        }
    }
    let max = *acc.iter().max().unwrap_or(&0);
    let floor = (params.peak_fraction * max as f64).ceil() as u32;
    let (nms_t, nms_r) = (5isize, (4.0 / params.rho_step).ceil() as isize);
    let mut peaks = Vec::new();
    for t in 0..n_theta {
        for r in 0..n_rho {
            let v = acc[t * n_rho + r];
            if v < floor.max(1) {
                continue;
            }
            let mut is_max = true;
            'nbr: for dt in -nms_t..=nms_t {
                // theta wraps with a flip of rho
                let tt = t as isize + dt;
                let (tw, flip) = if tt < 0 {
                    (tt + n_theta as isize, true)
                } else if tt >= n_theta as isize {
                    (tt - n_theta as isize, true)
                } else {
                    (tt, false)
                };
                for dr in -nms_r..=nms_r {
                    let rr = if flip {
                        n_rho as isize - 1 - (r as isize + dr)
                    } else {
                        r as isize + dr
                    };
                    if rr < 0 || rr >= n_rho as isize || (dt == 0 && dr == 0) {
                        continue;
                    }
                    let w = acc[tw as usize * n_rho + rr as usize];
                    let before = (tw as usize, rr as usize) < (t, r);
                    if w > v || (w == v && before) {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                peaks.push(HoughLine {
                    theta: (t as f64 * params.angle_step_deg).to_radians(),
                    rho: r as f64 * params.rho_step - rho_max,
                    votes: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.votes.cmp(&a.votes));
    let Some(lead) = peaks.first().copied() else {
        return Err(Error::NoFiducial("no Hough peaks".into()));
    };
    let angle_gap = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(std::f64::consts::PI);
        d.min(std::f64::consts::PI - d)
    };
    let tol = 20f64.to_radians();
    let family_a: Vec<HoughLine> = peaks
        .iter()
        .copied()
        .filter(|l| angle_gap(l.theta, lead.theta) < tol)
        .collect();
    let family_b: Vec<HoughLine> = peaks
        .iter()
        .copied()
        .filter(|l| angle_gap(l.theta, lead.theta + std::f64::consts::FRAC_PI_2) < tol)
        .collect();
    if family_a.len() < 2 || family_b.len() < 2 {
        return Err(Error::NoFiducial(format!(
            "found {} and {} lines in the two directions",
            family_a.len(),
            family_b.len()
        )));
    }
    for fam in [&family_a, &family_b] {
        if fam.len() > 2 && fam[2].votes as f64 >= 0.9 * fam[1].votes as f64 {
            return Err(Error::AmbiguousFiducial(
                "more than two competing guide lines".into(),
            ));
        }
    }
    let mut points = Vec::with_capacity(4);
    for a in &family_a[..2] {
        for b in &family_b[..2] {
            points.push(
                a.intersect(b)
                    .ok_or_else(|| Error::AmbiguousFiducial("parallel lines".into()))?,
            );
        }
    }
    let refined: Vec<Point> = points
        .iter()
        .map(|&p| refine_disk_center(img, p, params))
        .collect();
    let corners = order_corners(&refined)?;
    if !corners.is_convex() {
        return Err(Error::AmbiguousFiducial(
            "detected corners are not convex".into(),
        ));
    }
    Ok(corners)
}

/// Iterated darkness-weighted centroid inside `1.5 r` of the estimate.
fn refine_disk_center(img: &Grid, start: Point, params: &DetectParams) -> Point {
    let (rows, cols) = img.shape();
    let window = 1.5 * params.circle_radius;
    let paper = percentile(img.data(), 0.9);
    let mut p = start;
    for _ in 0..params.refine_iterations {
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        let r0 = (p[1] - window - 1.0).floor().max(0.0) as usize;
        let r1 = ((p[1] + window + 1.0).ceil() as usize).min(rows);
        let c0 = (p[0] - window - 1.0).floor().max(0.0) as usize;
        let c1 = ((p[0] + window + 1.0).ceil() as usize).min(cols);
        for r in r0..r1 {
            for c in c0..c1 {
                let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
                if (x - p[0]).hypot(y - p[1]) > window {
                    continue;
                }
                let w = (paper - img.get(r, c)).max(0.0);
                sw += w;
                sx += w * x;
                sy += w * y;
            }
        }
        if sw <= 0.0 {
            break;
        }
        let next = [sx / sw, sy / sw];
        let moved = (next[0] - p[0]).hypot(next[1] - p[1]);
        p = next;
        if moved < 1e-4 {
            break;
        }
    }
    p
}

fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).round() as usize]
}

fn order_corners(points: &[Point]) -> Result<CornerSet> {
    if points.len() != 4 {
        return Err(Error::AmbiguousFiducial(format!(
            "{} corners",
            points.len()
        )));
    }
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    let mut sorted = points.to_vec();
    // clockwise on screen starting from the upper-left quadrant
    sorted.sort_by(|a, b| {
        let ang = |p: &Point| {
            let a = (p[1] - cy).atan2(p[0] - cx);
            (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
        };
        ang(a).total_cmp(&ang(b))
    });
    Ok(CornerSet([sorted[0], sorted[1], sorted[2], sorted[3]]))
}

/// Bilinear sample at continuous pixel coordinates, clamped at the borders.
pub fn sample_bilinear(img: &Grid, x: f64, y: f64) -> f64 {
    let (rows, cols) = img.shape();
    let fx = (x - 0.5).clamp(0.0, (cols - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (rows - 1) as f64);
    let (c0, r0) = (fx.floor() as usize, fy.floor() as usize);
    let (c1, r1) = ((c0 + 1).min(cols - 1), (r0 + 1).min(rows - 1));
    let (tx, ty) = (fx - c0 as f64, fy - r0 as f64);
    let top = img.get(r0, c0) * (1.0 - tx) + img.get(r0, c1) * tx;
    let bottom = img.get(r1, c0) * (1.0 - tx) + img.get(r1, c1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Projective warp of the corner quadrilateral onto an `out_size²` grid.
pub fn rectify(img: &Grid, corners: &CornerSet, out_size: usize) -> Result<Grid> {
    if !corners.is_convex() {
        return Err(Error::Domain("corner set is not convex".into()));
    }
    if out_size == 0 {
        return Err(invalid("out_size", "must be positive"));
    }
    let s = out_size as f64;
    let square = [[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]];
    let h = Homography::from_correspondences(&square, &corners.0)?;
    let mut out = Grid::zeros(out_size, out_size);
    for r in 0..out_size {
        for c in 0..out_size {
            let [x, y] = h.apply([c as f64 + 0.5, r as f64 + 0.5])?;
            out.set(r, c, sample_bilinear(img, x, y));
        }
    }
    Ok(out)
}

/// Adds i.i.d. `N(0, L²)` offsets to all eight coordinates.
pub fn perturb_corners(corners: &CornerSet, l: f64, seed: u64) -> Result<CornerSet> {
    if !(l >= 0.0) {
        return Err(invalid("L", "must be non-negative"));
    }
    if l == 0.0 {
        return Ok(*corners);
    }
    let normal = Normal::new(0.0, l).map_err(|e| invalid("L", e.to_string()))?;
    let mut rng = rng::stream(seed, &[rng::tag("corner-jitter")]);
    Ok(CornerSet(corners.0.map(|p| {
        [
            p[0] + normal.sample(&mut rng),
            p[1] + normal.sample(&mut rng),
        ]
    })))
}

/// Homography that maps the unit-free square `[0, s]²` to `corners`.
pub fn square_to_corners(corners: &CornerSet, s: f64) -> Result<Homography> {
    Homography::from_correspondences(&[[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]], &corners.0)
}
