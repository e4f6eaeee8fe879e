//! Synthetic paper surfaces, plane-fit normals and scanner degradation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{gaussian_blur, Grid};
use crate::optics::{Orientation, ScanImage, Vec3};
use crate::rng;

/// 300 ppi in µm per pixel.
pub const PITCH_300PPI: f64 = 25_400.0 / 300.0;

/// Converts a resolution in pixels per inch to a pitch in µm/px.
pub fn ppi_to_pitch(ppi: f64) -> f64 {
    25_400.0 / ppi
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightMap {
    /// Heights in µm.
    pub heights: Grid,
    /// µm per pixel.
    pub pixel_pitch: f64,
}

impl HeightMap {
    pub fn new(heights: Grid, pixel_pitch: f64) -> Result<Self> {
        if !(pixel_pitch > 0.0) {
            return Err(invalid("pixel_pitch", "must be positive"));
        }
        if !heights.all_finite() {
            return Err(Error::Domain("heightmap contains non-finite values".into()));
        }
        Ok(Self {
            heights,
            pixel_pitch,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.heights.shape()
    }

    /// Block-averages heights over `factor × factor` pixels.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        Ok(Self {
            heights: self.heights.block_average(factor)?,
            pixel_pitch: self.pixel_pitch * factor as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalField {
    pub nx: Grid,
    pub ny: Grid,
    pub nz: Grid,
}

impl NormalField {
    pub fn from_components(nx: Grid, ny: Grid, nz: Grid) -> Result<Self> {
        nx.ensure_same_shape(&ny)?;
        nx.ensure_same_shape(&nz)?;
        for i in 0..nx.len() {
            let n = Vec3::new(nx.data()[i], ny.data()[i], nz.data()[i]);
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("normal {i} has length {}", n.norm())));
            }
            if n.z < 0.0 {
                return Err(Error::Domain(format!("normal {i} points downward")));
            }
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn uniform(rows: usize, cols: usize, n: Vec3) -> Self {
        let n = n.normalize();
        Self {
            nx: Grid::filled(rows, cols, n.x),
            ny: Grid::filled(rows, cols, n.y),
            nz: Grid::filled(rows, cols, n.z),
        }
    }

    /// Normals of the surface `z = f(x, y)` from its gradient field.
    pub fn from_gradients(p: &Grid, q: &Grid) -> Result<Self> {
        p.ensure_same_shape(q)?;
        let (rows, cols) = p.shape();
        let mut out = Self::uniform(rows, cols, Vec3::z());
        for i in 0..p.len() {
            let n = Vec3::new(-p.data()[i], -q.data()[i], 1.0).normalize();
            out.nx.data_mut()[i] = n.x;
            out.ny.data_mut()[i] = n.y;
            out.nz.data_mut()[i] = n.z;
        }
        Ok(out)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.nx.shape()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Vec3 {
        Vec3::new(self.nx.get(r, c), self.ny.get(r, c), self.nz.get(r, c))
    }

    /// Rotates the patch: the grid turns spatially and every vector is turned
    /// about `z` by the same angle.
    pub fn rotate(&self, orientation: Orientation) -> Self {
        let k = orientation.quarter_turns();
        let (nx, ny, nz) = (
            self.nx.rotate_quarter_turns(k),
            self.ny.rotate_quarter_turns(k),
            self.nz.rotate_quarter_turns(k),
        );
        let (x, y) = match orientation {
            Orientation::Deg0 => (nx, ny),
            Orientation::Deg90 => (ny.scale(-1.0), nx),
            Orientation::Deg180 => (nx.scale(-1.0), ny.scale(-1.0)),
            Orientation::Deg270 => (ny, nx.scale(-1.0)),
        };
        Self { nx: x, ny: y, nz }
    }

    /// Per-pixel `sin θ = sqrt(n_x² + n_y²)`.
    pub fn sin_theta(&self) -> Grid {
        self.nx
            .zip_map(&self.ny, |x, y| x.hypot(y))
            .expect("components share a shape")
    }

    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<Self> {
        Ok(Self {
            nx: self.nx.crop(r0, c0, rows, cols)?,
            ny: self.ny.crop(r0, c0, rows, cols)?,
            nz: self.nz.crop(r0, c0, rows, cols)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiberModelParams {
    /// Fiber centers per mm² of surface.
    pub fiber_density: f64,
    pub fiber_width_um: f64,
    pub fiber_length_um: f64,
    pub ridge_height_um: f64,
    /// Standard deviation of the fine grain texture.
    pub noise_floor_um: f64,
    /// Standard deviation of the log fiber amplitude across the sheet (flocs).
    pub formation_contrast: f64,
    /// Spectral exponent of the formation field: power ∝ |k|^-exponent.
    pub formation_exponent: f64,
    pub seed: u64,
}

impl Default for FiberModelParams {
    fn default() -> Self {
        Self {
            fiber_density: 90.0,
            fiber_width_um: 100.0,
            fiber_length_um: 1200.0,
            ridge_height_um: 4.6,
            noise_floor_um: 1.85,
            formation_contrast: FORMATION_CONTRAST,
            formation_exponent: FORMATION_EXPONENT,
            seed: 0,
        }
    }
}

impl FiberModelParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("fiber_density", self.fiber_density),
            ("ridge_height_um", self.ridge_height_um),
            ("noise_floor_um", self.noise_floor_um),
            ("formation_contrast", self.formation_contrast),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..2.0).contains(&self.formation_exponent) {
            return Err(invalid("formation_exponent", "must lie in [0, 2)"));
        }
        if !(self.fiber_width_um > 0.0) || !(self.fiber_length_um > 0.0) {
            return Err(invalid("fiber size", "width and length must be positive"));
        }
        Ok(())
    }
}

/// Default floc contrast.
pub const FORMATION_CONTRAST: f64 = 0.6;
pub const FORMATION_EXPONENT: f64 = 1.3;

/// Finest pitch the fiber texture is evaluated at before block averaging.
const MAX_INTERNAL_PITCH_UM: f64 = 11.0;
/// Correlation length of the grain texture.
const GRAIN_SIGMA_UM: f64 = 8.0;
const BAND_ROWS: usize = 32;

struct Fiber {
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
    amp: f64,
}

/// Random fiber mat plus grain, sampled on a `rows × cols` grid at `pitch` µm/px.
///
/// Coarse pitches are rendered on a finer internal grid and block-averaged, so a
/// surface generated at 84.7 µm/px has the statistics of a 2400 ppi surface
/// downsampled by 8.
pub fn generate_surface(
    params: &FiberModelParams,
    rows: usize,
    cols: usize,
    pitch: f64,
) -> Result<HeightMap> {
    params.validate()?;
    if rows < 32 || cols < 32 {
        return Err(invalid(
            "shape",
            format!("need at least 32x32, got {rows}x{cols}"),
        ));
    }
    if !(pitch > 0.0) {
        return Err(invalid("pitch", "must be positive"));
    }
    let factor = (pitch / MAX_INTERNAL_PITCH_UM).ceil().max(1.0) as usize;
    let fine = pitch / factor as f64;
    let (fr, fc) = (rows * factor, cols * factor);

    let mut heights = Grid::zeros(fr, fc);
    if params.fiber_density > 0.0 && params.ridge_height_um > 0.0 {
        let formation = if params.formation_contrast > 0.0 {
            Some(formation_field(
                rows,
                cols,
                params.formation_exponent,
                params.seed,
            )?)
        } else {
            None
        };
        render_fibers(&mut heights, params, fine, factor, formation.as_ref());
    }
    if params.noise_floor_um > 0.0 {
        let mut rng = rng::stream(params.seed, &[rng::tag("grain")]);
        let white = Grid::from_fn(fr, fc, |_, _| StandardNormal.sample(&mut rng));
        let s = GRAIN_SIGMA_UM / fine;
        let grain = gaussian_blur(&white, s, s);
        let k = params.noise_floor_um / grain.std().max(f64::MIN_POSITIVE);
        heights = heights.add(&grain.scale(k))?;
    }
    HeightMap::new(heights.block_average(factor)?, pitch)
}

/// Zero-mean, unit-variance random field with power spectrum ∝ |k|^-exponent
/// (the DC bin is dropped). Long-range correlated for small exponents.
pub fn formation_field(rows: usize, cols: usize, exponent: f64, seed: u64) -> Result<Grid> {
    if rows < 2 || cols < 2 {
        return Err(invalid("shape", "formation field needs at least 2x2"));
    }
    let mut rng = rng::stream(seed, &[rng::tag("formation")]);
    let white = Grid::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let mut spec = crate::spectral::fft2(&white);
    for r in 0..rows {
        let fy = crate::spectral::signed_bin(r, rows) / rows as f64;
        for c in 0..cols {
            let fx = crate::spectral::signed_bin(c, cols) / cols as f64;
            let k = fx.hypot(fy);
            let w = if k == 0.0 {
                0.0
            } else {
                k.powf(-exponent / 2.0)
            };
            spec.data[r * cols + c] *= w;
        }
    }
    let field = crate::spectral::ifft2_real(spec).mean_centered();
    let sd = field.std();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("formation field"));
    }
    Ok(field.scale(1.0 / sd))
}

fn render_fibers(
    heights: &mut Grid,
    params: &FiberModelParams,
    fine: f64,
    factor: usize,
    formation: Option<&Grid>,
) {
    let (fr, fc) = heights.shape();
    let sigma_perp = params.fiber_width_um / 2.0 / fine;
    let sigma_par = params.fiber_length_um / 4.0 / fine;
    let reach_perp = 4.0 * sigma_perp;
    let reach_par = 2.5 * sigma_par;
    let margin = reach_par;

    let width_mm = (fc as f64 + 2.0 * margin) * fine / 1000.0;
    let height_mm = (fr as f64 + 2.0 * margin) * fine / 1000.0;
    let count = (params.fiber_density * width_mm * height_mm).round() as usize;

    let mut rng = rng::stream(params.seed, &[rng::tag("fibers")]);
    let fibers: Vec<Fiber> = (0..count)
        .map(|_| {
            let cx = rng.random::<f64>() * (fc as f64 + 2.0 * margin) - margin;
            let cy = rng.random::<f64>() * (fr as f64 + 2.0 * margin) - margin;
            let theta = rng.random::<f64>() * std::f64::consts::PI;
            let mut amp = params.ridge_height_um * rng.random_range(0.5..1.5);
            if let Some(f) = formation {
                let (rows, cols) = f.shape();
                let r = ((cy / factor as f64).floor().max(0.0) as usize).min(rows - 1);
                let c = ((cx / factor as f64).floor().max(0.0) as usize).min(cols - 1);
                let g = params.formation_contrast;
                amp *= (g * f.get(r, c) - 0.5 * g * g).exp();
            }
            Fiber {
                cx,
                cy,
                cos: theta.cos(),
                sin: theta.sin(),
                amp,
            }
        })
        .collect();

    let inv_perp = 1.0 / (2.0 * sigma_perp * sigma_perp);
    let inv_par = 1.0 / (2.0 * sigma_par * sigma_par);
    heights
        .data_mut()
        .par_chunks_mut(BAND_ROWS * fc)
        .enumerate()
        .for_each(|(band, chunk)| {
            let r0 = band * BAND_ROWS;
            let nrows = chunk.len() / fc;
            for f in &fibers {
                let half_extent = reach_par * f.sin.abs() + reach_perp * f.cos.abs();
                if f.cy + half_extent < r0 as f64 || f.cy - half_extent > (r0 + nrows) as f64 {
                    continue;
                }
                for lr in 0..nrows {
                    let dy = (r0 + lr) as f64 - f.cy;
                    // d_par = dx cos + dy sin, d_perp = -dx sin + dy cos; both linear in dx
                    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                    for (slope, offset, reach) in [
                        (f.cos, dy * f.sin, reach_par),
                        (-f.sin, dy * f.cos, reach_perp),
                    ] {
                        if slope.abs() < 1e-12 {
                            if offset.abs() > reach {
                                lo = f64::INFINITY;
                            }
                        } else {
                            let a = (-reach - offset) / slope;
                            let b = (reach - offset) / slope;
                            lo = lo.max(a.min(b));
                            hi = hi.min(a.max(b));
                        }
                    }
                    if lo > hi {
                        continue;
                    }
                    let c_lo = (f.cx + lo).ceil().max(0.0) as usize;
                    let c_hi = (f.cx + hi).floor().min(fc as f64 - 1.0);
                    if c_hi < 0.0 {
                        continue;
                    }
                    let row = &mut chunk[lr * fc..(lr + 1) * fc];
                    for c in c_lo..=c_hi as usize {
                        let dx = c as f64 - f.cx;
                        let par = dx * f.cos + dy * f.sin;
                        let perp = -dx * f.sin + dy * f.cos;
                        row[c] += f.amp * (-(perp * perp) * inv_perp - par * par * inv_par).exp();
                    }
                }
            }
        });
}

/// Least-squares plane over a `window × window` neighbourhood (truncated at the
/// borders); the normal is the plane's upward unit normal in physical units.
pub fn normals_from_heightmap(hm: &HeightMap, window: usize) -> Result<NormalField> {
    if window < 3 || window % 2 == 0 {
        return Err(invalid(
            "window",
            format!("must be odd and >= 3, got {window}"),
        ));
    }
    let (rows, cols) = hm.shape();
    let h = (window / 2) as isize;
    let pitch = hm.pixel_pitch;
    let z = &hm.heights;
    let grads: Vec<(f64, f64)> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (r, c) = ((i / cols) as isize, (i % cols) as isize);
            let mut s = [0.0f64; 9];
            for dr in -h..=h {
                let rr = r + dr;
                if rr < 0 || rr >= rows as isize {
                    continue;
                }
                for dc in -h..=h {
                    let cc = c + dc;
                    if cc < 0 || cc >= cols as isize {
                        continue;
                    }
                    let (x, y) = (dc as f64, dr as f64);
                    let v = z.get(rr as usize, cc as usize);
                    s[0] += 1.0;
                    s[1] += x;
                    s[2] += y;
                    s[3] += x * x;
                    s[4] += x * y;
                    s[5] += y * y;
                    s[6] += v;
                    s[7] += x * v;
                    s[8] += y * v;
                }
            }
            plane_slopes(&s)
        })
        .collect();
    let mut out = NormalField::uniform(rows, cols, Vec3::z());
    for (i, (gx, gy)) in grads.into_iter().enumerate() {
        let n = Vec3::new(-gx / pitch, -gy / pitch, 1.0).normalize();
        out.nx.data_mut()[i] = n.x;
        out.ny.data_mut()[i] = n.y;
        out.nz.data_mut()[i] = n.z;
    }
    Ok(out)
}

/// Slopes `(b, c)` of `z = a + b x + c y` from accumulated moments.
fn plane_slopes(s: &[f64; 9]) -> (f64, f64) {
    let n = s[0];
    let (mx, my, mz) = (s[1] / n, s[2] / n, s[6] / n);
    let sxx = s[3] - n * mx * mx;
    let sxy = s[4] - n * mx * my;
    let syy = s[5] - n * my * my;
    let sxz = s[7] - n * mx * mz;
    let syz = s[8] - n * my * mz;
    let det = sxx * syy - sxy * sxy;
    if det.abs() < 1e-12 {
        return (0.0, 0.0);
    }
    ((syy * sxz - sxy * syz) / det, (sxx * syz - sxy * sxz) / det)
}

/// Anisotropic Gaussian blur in the scanner frame followed by white noise.
pub fn degrade_scan(
    img: &ScanImage,
    sigma_x: f64,
    sigma_y: f64,
    noise_std: f64,
    seed: u64,
) -> Result<ScanImage> {
    if sigma_x < 0.0 || sigma_y < 0.0 || noise_std < 0.0 {
        return Err(invalid("degradation", "sigmas and noise must be >= 0"));
    }
    let mut out = gaussian_blur(&img.intensities, sigma_x, sigma_y);
    if noise_std > 0.0 {
        let mut rng = rng::stream(seed, &[rng::tag("scan-noise")]);
        for v in out.data_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += noise_std * e;
        }
    }
    Ok(ScanImage {
        intensities: out,
        orientation: img.orientation,
        pixel_pitch: img.pixel_pitch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(rows: usize, cols: usize, a: f64, b: f64) -> HeightMap {
        HeightMap::new(
            Grid::from_fn(rows, cols, |r, c| a * c as f64 + b * r as f64),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn plane_fit_recovers_plane_everywhere() {
        let nf = normals_from_heightmap(&plane(9, 11, 0.1, 0.2), 3).unwrap();
        let expect = Vec3::new(-0.1, -0.2, 1.0).normalize();
        for r in 0..9 {
            for c in 0..11 {
                assert!((nf.at(r, c) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_heightmap_gives_vertical_normals() {
        let hm = HeightMap::new(Grid::filled(6, 6, 3.5), 10.0).unwrap();
        let nf = normals_from_heightmap(&hm, 5).unwrap();
        assert!(nf.nz.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pitch_scales_slopes() {
        let mut hm = plane(8, 8, 2.0, 0.0);
        hm.pixel_pitch = 20.0;
        let nf = normals_from_heightmap(&hm, 3).unwrap();
        let expect = Vec3::new(-0.1, 0.0, 1.0).normalize();
        assert!((nf.at(4, 4) - expect).norm() < 1e-12);
    }

    #[test]
    fn empty_model_is_flat() {
        let p = FiberModelParams {
            fiber_density: 0.0,
            noise_floor_um: 0.0,
            ..FiberModelParams::default()
        };
        let hm = generate_surface(&p, 40, 32, PITCH_300PPI).unwrap();
        assert!(hm.heights.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_tiny_grids_and_even_windows() {
        let p = FiberModelParams::default();
        assert!(generate_surface(&p, 16, 64, PITCH_300PPI).is_err());
        assert!(normals_from_heightmap(&plane(8, 8, 0.0, 0.0), 4).is_err());
    }

    #[test]
    fn rotated_field_matches_vector_rotation() {
        let hm = plane(6, 7, 0.3, -0.1);
        let nf = normals_from_heightmap(&hm, 3).unwrap();
        for o in Orientation::ALL {
            let rot = nf.rotate(o);
            let n = o.rotate_vector(nf.at(0, 0));
            let k = o.quarter_turns();
            let grid = Grid::from_fn(6, 7, |r, c| (r * 7 + c) as f64).rotate_quarter_turns(k);
            let pos = grid.data().iter().position(|&v| v == 0.0).unwrap();
            let got = rot.at(pos / grid.cols(), pos % grid.cols());
            assert!((got - n).norm() < 1e-15);
        }
    }

    #[test]
    fn degrade_identity_and_constants() {
        let img = ScanImage {
            intensities: Grid::from_fn(10, 12, |r, c| (r * c) as f64),
            orientation: Orientation::Deg0,
            pixel_pitch: 1.0,
        };
        assert_eq!(degrade_scan(&img, 0.0, 0.0, 0.0, 1).unwrap(), img);
        let flat = ScanImage {
            intensities: Grid::filled(10, 12, 0.25),
            ..img.clone()
        };
        let out = degrade_scan(&flat, 1.3, 0.4, 0.0, 1).unwrap();
        assert!(out.intensities.max_abs_diff(&flat.intensities).unwrap() < 1e-15);
    }
}
