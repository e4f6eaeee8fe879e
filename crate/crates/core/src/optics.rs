//! Reflection model and flatbed-scanner light transport.
//!
//! The paper surface lies in the `xy`-plane with the point of interest at the
//! origin. A linear light parallel to the `x`-axis sits at height `o_z` and
//! offset `o_y`; each point `o = (o_x, o_y, o_z)` on it contributes a Phong
//! term, and the pixel intensity is the integral of those contributions over
//! `o_x`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::synth::NormalField;

pub type Vec3 = Vector3<f64>;

const UNIT_TOL: f64 = 1e-9;

/// Acquisition orientation of the paper on the scanner bed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Deg0,
    Deg90,
    Deg180,
    Deg270,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Deg0,
        Orientation::Deg90,
        Orientation::Deg180,
        Orientation::Deg270,
    ];

    pub fn from_degrees(deg: u16) -> Result<Self> {
        match deg {
            0 => Ok(Self::Deg0),
            90 => Ok(Self::Deg90),
            180 => Ok(Self::Deg180),
            270 => Ok(Self::Deg270),
            other => Err(invalid(
                "orientation",
                format!("{other} is not one of 0/90/180/270"),
            )),
        }
    }

    pub fn degrees(self) -> u16 {
        self.quarter_turns() as u16 * 90
    }

    pub fn quarter_turns(self) -> u8 {
        match self {
            Self::Deg0 => 0,
            Self::Deg90 => 1,
            Self::Deg180 => 2,
            Self::Deg270 => 3,
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            Self::Deg90 => Self::Deg270,
            Self::Deg270 => Self::Deg90,
            other => other,
        }
    }

    /// `R_z(theta) n`, exact for quarter turns.
    pub fn rotate_vector(self, n: Vec3) -> Vec3 {
        match self {
            Self::Deg0 => n,
            Self::Deg90 => Vec3::new(-n.y, n.x, n.z),
            Self::Deg180 => Vec3::new(-n.x, -n.y, n.z),
            Self::Deg270 => Vec3::new(n.y, -n.x, n.z),
        }
    }
}

/// Which part of the linear light is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LightSpan {
    /// `o_x` in `[-a, a]`; the far segment is dropped.
    #[default]
    Symmetric,
    /// `o_x` in `[-a, b]`.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScannerGeometry {
    /// `a` in mm.
    pub light_span_near: f64,
    /// `b` in mm, only read when `span` is [`LightSpan::Full`].
    pub light_span_far: f64,
    pub light_offset_y: f64,
    pub light_offset_z: f64,
    pub sensor_dir: [f64; 3],
    pub light_strength: f64,
    pub quadrature_steps: usize,
    #[serde(default)]
    pub span: LightSpan,
}

impl Default for ScannerGeometry {
    fn default() -> Self {
        Self::with_sensor(10.0, 0.0)
    }
}

impl ScannerGeometry {
    /// Default light placement with the sensor tilted by `tilt_deg` inside the
    /// `yz`-plane and an optional out-of-plane component `v_cx`.
    pub fn with_sensor(tilt_deg: f64, v_cx: f64) -> Self {
        let phi = tilt_deg.to_radians();
        let rest = (1.0 - v_cx * v_cx).sqrt();
        Self {
            light_span_near: 20.0,
            light_span_far: 40.0,
            light_offset_y: 2.0,
            light_offset_z: 2.0,
            sensor_dir: [v_cx, rest * phi.sin(), rest * phi.cos()],
            light_strength: 1.0,
            quadrature_steps: 1024,
            span: LightSpan::Symmetric,
        }
    }

    pub fn sensor(&self) -> Vec3 {
        Vec3::from(self.sensor_dir)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.light_span_near, self.light_span_far);
        if !(a > 0.0 && a <= b) {
            return Err(invalid(
                "light_span",
                format!("need 0 < a <= b, got a={a}, b={b}"),
            ));
        }
        if !(self.light_offset_z > 0.0) {
            return Err(invalid("light_offset_z", "must be positive"));
        }
        if self.light_offset_y == 0.0 {
            return Err(invalid("light_offset_y", "must be nonzero"));
        }
        if (self.sensor().norm() - 1.0).abs() > 1e-12 {
            return Err(invalid("sensor_dir", "must be a unit vector"));
        }
        if self.quadrature_steps < 64 {
            return Err(invalid("quadrature_steps", "must be at least 64"));
        }
        Ok(())
    }

    /// True when the sensor direction has no `x` component.
    pub fn is_scanner_faithful(&self) -> bool {
        self.sensor_dir[0].abs() <= 1e-12
    }

    fn bounds(&self) -> (f64, f64) {
        match self.span {
            LightSpan::Symmetric => (-self.light_span_near, self.light_span_near),
            LightSpan::Full => (-self.light_span_near, self.light_span_far),
        }
    }

    fn offset_sq(&self) -> f64 {
        self.light_offset_y.powi(2) + self.light_offset_z.powi(2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectanceParams {
    pub w_d: f64,
    pub w_s: f64,
    pub k_e: f64,
    /// Clamp negative diffuse and specular cosines to zero. The closed forms
    /// assume the clamp never fires; disabling it gives the linearized model.
    #[serde(default = "default_clamp")]
    pub clamp: bool,
}

fn default_clamp() -> bool {
    true
}

impl Default for ReflectanceParams {
    fn default() -> Self {
        Self::diffuse()
    }
}

impl ReflectanceParams {
    pub fn diffuse() -> Self {
        Self {
            w_d: 1.0,
            w_s: 0.0,
            k_e: 1.0,
            clamp: true,
        }
    }

    pub fn with_specular(w_s: f64) -> Self {
        Self {
            w_s,
            ..Self::diffuse()
        }
    }

    pub fn linearized(mut self) -> Self {
        self.clamp = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_d < 0.0 || self.w_s < 0.0 || self.w_d + self.w_s <= 0.0 {
            return Err(invalid("weights", "need w_d, w_s >= 0 and w_d + w_s > 0"));
        }
        if !(self.k_e > 0.0) {
            return Err(invalid("k_e", "must be positive"));
        }
        Ok(())
    }

    fn shade_diffuse(&self, cos: f64) -> f64 {
        if self.clamp {
            cos.max(0.0)
        } else {
            cos
        }
    }

    fn shade_specular(&self, cos: f64) -> f64 {
        if !self.clamp && self.k_e == 1.0 {
            cos
        } else if self.k_e == 1.0 {
            cos.max(0.0)
        } else {
            cos.max(0.0).powf(self.k_e)
        }
    }
}

/// Intensity reflected at the origin from a point light at `light`.
pub fn reflect_point(
    n: Vec3,
    light: Vec3,
    sensor: Vec3,
    params: &ReflectanceParams,
    strength: f64,
) -> Result<f64> {
    if (n.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!("normal has length {}", n.norm())));
    }
    let dist_sq = light.norm_squared();
    if dist_sq == 0.0 {
        return Err(Error::Domain(
            "light coincides with the surface point".into(),
        ));
    }
    Ok(reflect_unchecked(
        n, light, dist_sq, sensor, params, strength,
    ))
}

#[inline]
fn reflect_unchecked(
    n: Vec3,
    light: Vec3,
    dist_sq: f64,
    sensor: Vec3,
    params: &ReflectanceParams,
    strength: f64,
) -> f64 {
    let v_i = light / dist_sq.sqrt();
    let cos_i = n.dot(&v_i);
    let mut out = params.w_d * params.shade_diffuse(cos_i);
    if params.w_s != 0.0 {
        let v_r = n * (2.0 * cos_i) - v_i;
        out += params.w_s * params.shade_specular(sensor.dot(&v_r));
    }
    strength * out / dist_sq
}

fn simpson(lo: f64, hi: f64, steps: usize, f: impl Fn(f64) -> f64) -> f64 {
    let steps = steps + steps % 2;
    let h = (hi - lo) / steps as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Composite-Simpson integral of the reflected intensity over the linear light.
pub fn line_integral_intensity(
    n: Vec3,
    geom: &ScannerGeometry,
    params: &ReflectanceParams,
) -> Result<f64> {
    geom.validate()?;
    params.validate()?;
    if (n.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!("normal has length {}", n.norm())));
    }
    let (lo, hi) = geom.bounds();
    let (oy, oz) = (geom.light_offset_y, geom.light_offset_z);
    let sensor = geom.sensor();
    let l = geom.light_strength;
    Ok(simpson(lo, hi, geom.quadrature_steps, |x| {
        let o = Vec3::new(x, oy, oz);
        reflect_unchecked(n, o, o.norm_squared(), sensor, params, l)
    }))
}

/// `∫ ||o||^-3 do_x` over the symmetric span, by quadrature.
pub fn inverse_cube_integral(geom: &ScannerGeometry) -> f64 {
    let a = geom.light_span_near;
    let c2 = geom.offset_sq();
    simpson(-a, a, geom.quadrature_steps, |x| (x * x + c2).powf(-1.5))
}

/// The diffuse and specular gains `(s, s')` of the opposed-scan difference.
pub fn difference_scales(geom: &ScannerGeometry, params: &ReflectanceParams) -> (f64, f64) {
    let j = inverse_cube_integral(geom);
    let base = 2.0 * geom.light_strength * geom.light_offset_y * j;
    (base * params.w_d, base * params.w_s)
}

fn faithful_checks(geom: &ScannerGeometry, params: &ReflectanceParams) -> Result<()> {
    geom.validate()?;
    params.validate()?;
    if !geom.is_scanner_faithful() {
        return Err(Error::Domain(format!(
            "closed form requires v_cx = 0, got {}",
            geom.sensor_dir[0]
        )));
    }
    if params.k_e != 1.0 {
        return Err(Error::Domain("closed form requires k_e = 1".into()));
    }
    Ok(())
}

/// Gain `s + 2 (v_cz + v_cy o_z / o_y) s'` relating `I_0 - I_180` to `n_y`
/// once `n_z ≈ 1`.
pub fn difference_gain(geom: &ScannerGeometry, params: &ReflectanceParams) -> Result<f64> {
    faithful_checks(geom, params)?;
    let (s, s_spec) = difference_scales(geom, params);
    let v = geom.sensor();
    Ok(s + 2.0 * (v.z + v.y * geom.light_offset_z / geom.light_offset_y) * s_spec)
}

/// Closed-form `I_0 - I_180` for a faithful scanner:
/// `s n_y + 2 s' n_z n_y (v_cz + v_cy o_z / o_y)`.
///
/// The `n_z` factor is kept; replacing it by one gives [`difference_gain`]` * n_y`.
pub fn predicted_difference(
    n: Vec3,
    geom: &ScannerGeometry,
    params: &ReflectanceParams,
) -> Result<f64> {
    faithful_checks(geom, params)?;
    let (s, s_spec) = difference_scales(geom, params);
    let v = geom.sensor();
    let cross = v.z + v.y * geom.light_offset_z / geom.light_offset_y;
    Ok((s + 2.0 * s_spec * n.z * cross) * n.y)
}

/// Strategy for evaluating the line-light integral at one normal.
pub trait LineIntegrator: Send + Sync {
    fn name(&self) -> &'static str;
    fn intensity(&self, n: Vec3, geom: &ScannerGeometry, params: &ReflectanceParams) -> f64;
}

/// Composite Simpson quadrature, valid for any gloss exponent.
pub struct SimpsonIntegrator;

impl LineIntegrator for SimpsonIntegrator {
    fn name(&self) -> &'static str {
        "simpson"
    }

    fn intensity(&self, n: Vec3, geom: &ScannerGeometry, params: &ReflectanceParams) -> f64 {
        let (lo, hi) = geom.bounds();
        let (oy, oz) = (geom.light_offset_y, geom.light_offset_z);
        let sensor = geom.sensor();
        let l = geom.light_strength;
        simpson(lo, hi, geom.quadrature_steps, |x| {
            let o = Vec3::new(x, oy, oz);
            reflect_unchecked(n, o, o.norm_squared(), sensor, params, l)
        })
    }
}

/// Exact antiderivative for `k_e = 1`, including the clamp.
///
/// Both terms reduce to `∫ max(0, α + β x) / (x² + c²)^{3/2} dx`, whose
/// antiderivative is `α x / (c² r) - β / r`.
pub struct AnalyticIntegrator;

impl AnalyticIntegrator {
    fn linear_over_cube(alpha: f64, beta: f64, lo: f64, hi: f64, c2: f64, clamp: bool) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        if clamp {
            if beta == 0.0 {
                if alpha < 0.0 {
                    return 0.0;
                }
            } else {
                let root = -alpha / beta;
                if beta > 0.0 {
                    lo = lo.max(root);
                } else {
                    hi = hi.min(root);
                }
                if lo >= hi {
                    return 0.0;
                }
            }
        }
        let anti = |x: f64| {
            let r = (x * x + c2).sqrt();
            alpha * x / (c2 * r) - beta / r
        };
        anti(hi) - anti(lo)
    }
}

impl LineIntegrator for AnalyticIntegrator {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn intensity(&self, n: Vec3, geom: &ScannerGeometry, params: &ReflectanceParams) -> f64 {
        debug_assert!(params.k_e == 1.0);
        let (lo, hi) = geom.bounds();
        let (oy, oz) = (geom.light_offset_y, geom.light_offset_z);
        let c2 = geom.offset_sq();
        // n·o = n_x x + alpha
        let alpha = n.y * oy + n.z * oz;
        let diffuse = Self::linear_over_cube(alpha, n.x, lo, hi, c2, params.clamp);
        let mut total = params.w_d * diffuse;
        if params.w_s != 0.0 {
            let v = geom.sensor();
            let vn = v.dot(&n);
            let beta_s = 2.0 * vn * n.x - v.x;
            let alpha_s = 2.0 * vn * alpha - (v.y * oy + v.z * oz);
            total += params.w_s * Self::linear_over_cube(alpha_s, beta_s, lo, hi, c2, params.clamp);
        }
        geom.light_strength * total
    }
}

/// Picks the exact integrator when it applies, quadrature otherwise.
pub fn default_integrator(params: &ReflectanceParams) -> &'static dyn LineIntegrator {
    if params.k_e == 1.0 {
        &AnalyticIntegrator
    } else {
        &SimpsonIntegrator
    }
}

pub fn integrator_by_name(name: &str) -> Result<&'static dyn LineIntegrator> {
    match name {
        "simpson" => Ok(&SimpsonIntegrator),
        "analytic" => Ok(&AnalyticIntegrator),
        other => Err(Error::UnknownName {
            kind: "line integrator",
            name: other.to_string(),
        }),
    }
}

/// One scanner acquisition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanImage {
    pub intensities: Grid,
    pub orientation: Orientation,
    pub pixel_pitch: f64,
}

impl ScanImage {
    /// Undo the acquisition rotation, returning intensities in the paper frame.
    pub fn to_paper_frame(&self) -> Grid {
        self.intensities
            .rotate_quarter_turns(self.orientation.inverse().quarter_turns())
    }
}

/// Simulate a scan of the paper lying at `orientation`.
pub fn render_scan(
    normals: &NormalField,
    geom: &ScannerGeometry,
    params: &ReflectanceParams,
    orientation: Orientation,
    pixel_pitch: f64,
) -> Result<ScanImage> {
    render_scan_with(
        normals,
        geom,
        params,
        orientation,
        pixel_pitch,
        default_integrator(params),
    )
}

pub fn render_scan_with(
    normals: &NormalField,
    geom: &ScannerGeometry,
    params: &ReflectanceParams,
    orientation: Orientation,
    pixel_pitch: f64,
    integrator: &dyn LineIntegrator,
) -> Result<ScanImage> {
    geom.validate()?;
    params.validate()?;
    if integrator.name() == "analytic" && params.k_e != 1.0 {
        return Err(Error::Domain("analytic integrator requires k_e = 1".into()));
    }
    let rotated = normals.rotate(orientation);
    let (rows, cols) = rotated.shape();
    let data: Vec<f64> = {
        use rayon::prelude::*;
        (0..rows * cols)
            .into_par_iter()
            .map(|i| integrator.intensity(rotated.at(i / cols, i % cols), geom, params))
            .collect()
    };
    Ok(ScanImage {
        intensities: Grid::new(rows, cols, data)?,
        orientation,
        pixel_pitch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(x: f64, y: f64) -> Vec3 {
        Vec3::new(x, y, (1.0 - x * x - y * y).sqrt())
    }

    #[test]
    fn vertical_normal_overhead_light() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let v = reflect_point(
            n,
            Vec3::new(0.0, 0.0, 1.0),
            n,
            &ReflectanceParams::diffuse(),
            1.0,
        );
        assert_eq!(v.unwrap(), 1.0);
    }

    #[test]
    fn light_below_surface_is_dark() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let v = reflect_point(
            n,
            Vec3::new(0.0, 0.0, -1.0),
            n,
            &ReflectanceParams::diffuse(),
            1.0,
        );
        assert_eq!(v.unwrap(), 0.0);
    }

    #[test]
    fn phong_matches_hand_expansion() {
        let n = Vec3::new(0.1, 0.2, 0.95f64.sqrt()).normalize();
        let o = Vec3::new(1.0, 2.0, 2.0);
        let vc = Vec3::new(0.0, 0.3, 0.91f64.sqrt());
        let params = ReflectanceParams {
            w_d: 0.8,
            w_s: 0.2,
            k_e: 1.0,
            clamp: true,
        };
        let got = reflect_point(n, o, vc, &params, 1.0).unwrap();

        // Term-by-term: |o| = 3, v_i = o / 3.
        let (nx, ny, nz) = (n.x, n.y, n.z);
        let (vix, viy, viz) = (1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0);
        let ndotv = nx * vix + ny * viy + nz * viz;
        let vrx = 2.0 * ndotv * nx - vix;
        let vry = 2.0 * ndotv * ny - viy;
        let vrz = 2.0 * ndotv * nz - viz;
        let spec = 0.0 * vrx + 0.3 * vry + 0.91f64.sqrt() * vrz;
        let expected = (0.8 * ndotv.max(0.0) + 0.2 * spec.max(0.0)) / 9.0;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn reflect_point_rejects_bad_inputs() {
        let p = ReflectanceParams::diffuse();
        let z = Vec3::new(0.0, 0.0, 1.0);
        assert!(matches!(
            reflect_point(Vec3::new(0.0, 0.0, 2.0), z, z, &p, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            reflect_point(z, Vec3::zeros(), z, &p, 1.0),
            Err(Error::Domain(_))
        ));
    }

    fn reference_geometry() -> ScannerGeometry {
        ScannerGeometry {
            light_span_near: 10.0,
            light_span_far: 10.0,
            light_offset_y: 1.0,
            light_offset_z: 1.0,
            ..ScannerGeometry::default()
        }
    }

    #[test]
    fn line_integral_against_fine_quadrature() {
        let geom = reference_geometry();
        let n = Vec3::new(0.0, 0.0, 1.0);
        let got = line_integral_intensity(n, &geom, &ReflectanceParams::diffuse()).unwrap();
        // 10^6-step midpoint reference of ∫ o_z / ||o||^3 over [-10, 10].
        let steps = 1_000_000;
        let h = 20.0 / steps as f64;
        let reference: f64 = (0..steps)
            .map(|i| {
                let x = -10.0 + (i as f64 + 0.5) * h;
                1.0 / (x * x + 2.0).powf(1.5)
            })
            .sum::<f64>()
            * h;
        assert!(
            ((got - reference) / reference).abs() < 1e-8,
            "{got} vs {reference}"
        );
    }

    #[test]
    fn flipping_nx_leaves_diffuse_intensity_unchanged() {
        let geom = ScannerGeometry::default();
        let p = ReflectanceParams::diffuse();
        for nx in [0.05, 0.2, 0.4] {
            let a = line_integral_intensity(unit(nx, 0.0), &geom, &p).unwrap();
            let b = line_integral_intensity(unit(-nx, 0.0), &geom, &p).unwrap();
            assert!((a - b).abs() < 1e-13 * a.abs());
        }
    }

    #[test]
    fn intensity_is_linear_in_light_strength() {
        let mut geom = ScannerGeometry::default();
        let n = unit(0.1, -0.05);
        let p = ReflectanceParams::with_specular(0.2);
        let one = line_integral_intensity(n, &geom, &p).unwrap();
        geom.light_strength = 2.0;
        let two = line_integral_intensity(n, &geom, &p).unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn inverse_cube_integral_matches_antiderivative() {
        let geom = ScannerGeometry::default();
        let a = geom.light_span_near;
        let c2: f64 = 8.0;
        let exact = 2.0 * a / (c2 * (a * a + c2).sqrt());
        assert!((inverse_cube_integral(&geom) - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn predicted_difference_edge_cases() {
        let geom = ScannerGeometry::default();
        let p = ReflectanceParams::with_specular(0.2);
        assert_eq!(
            predicted_difference(unit(0.3, 0.0), &geom, &p).unwrap(),
            0.0
        );

        let diffuse = ReflectanceParams::diffuse();
        let (s, _) = difference_scales(&geom, &diffuse);
        let n = unit(0.1, 0.07);
        let got = predicted_difference(n, &geom, &diffuse).unwrap();
        assert!((got - s * n.y).abs() < 1e-15);

        let tilted = ScannerGeometry::with_sensor(10.0, 0.3);
        assert!(matches!(
            predicted_difference(n, &tilted, &p),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn predicted_difference_matches_linearized_quadrature() {
        let geom = ScannerGeometry::default();
        let p = ReflectanceParams::with_specular(0.2).linearized();
        let n = unit(0.05, 0.1);
        let flipped = Vec3::new(-n.x, -n.y, n.z);
        let quad = line_integral_intensity(n, &geom, &p).unwrap()
            - line_integral_intensity(flipped, &geom, &p).unwrap();
        let closed = predicted_difference(n, &geom, &p).unwrap();
        assert!(((quad - closed) / quad).abs() < 1e-9, "{quad} vs {closed}");
        // the n_z ~ 1 gain stays within the tilt-induced gap
        let gain = difference_gain(&geom, &p).unwrap() * n.y;
        assert!(((gain - quad) / quad).abs() < 5e-3);
    }

    #[test]
    fn analytic_and_simpson_integrators_agree() {
        let mut geom = ScannerGeometry::default();
        geom.quadrature_steps = 1 << 16;
        for clamp in [true, false] {
            for (nx, ny) in [(0.0, 0.0), (0.3, 0.1), (-0.35, -0.2), (0.05, 0.3)] {
                for w_s in [0.0, 0.3] {
                    let p = ReflectanceParams {
                        clamp,
                        ..ReflectanceParams::with_specular(w_s)
                    };
                    let n = unit(nx, ny);
                    let a = AnalyticIntegrator.intensity(n, &geom, &p);
                    let s = SimpsonIntegrator.intensity(n, &geom, &p);
                    assert!((a - s).abs() < 1e-8 * a.abs().max(1e-3), "{a} vs {s}");
                }
            }
        }
        geom.span = LightSpan::Full;
        let n = unit(0.2, 0.1);
        let p = ReflectanceParams::with_specular(0.2);
        let a = AnalyticIntegrator.intensity(n, &geom, &p);
        let s = SimpsonIntegrator.intensity(n, &geom, &p);
        assert!((a - s).abs() < 1e-8 * a.abs());
    }

    #[test]
    fn far_segment_contribution_is_small() {
        let mut geom = ScannerGeometry::default();
        let p = ReflectanceParams::diffuse();
        let n = unit(0.05, 0.05);
        let near = line_integral_intensity(n, &geom, &p).unwrap();
        geom.span = LightSpan::Full;
        let full = line_integral_intensity(n, &geom, &p).unwrap();
        assert!(full > near);
        assert!((full - near) / near < 0.01);
    }

    #[test]
    fn orientation_rotation_matches_quarter_turn_group() {
        let n = Vec3::new(0.1, -0.2, 0.97);
        for o in Orientation::ALL {
            let back = o.inverse().rotate_vector(o.rotate_vector(n));
            assert_eq!(back, n);
        }
        let twice = Orientation::Deg90.rotate_vector(Orientation::Deg90.rotate_vector(n));
        assert_eq!(twice, Orientation::Deg180.rotate_vector(n));
        assert!(Orientation::from_degrees(45).is_err());
    }
}
