//! Normal-field integration, detrending and difference-of-Gaussians subbands.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{gaussian_blur, Grid};
use crate::normmap::NormMap;
use crate::spectral::{fft2, ifft2_real, signed_bin, symmetric_extension};
use crate::synth::{normals_from_heightmap, HeightMap, NormalField};

/// Recovers a height field (in pixel units) from its gradients `p = ∂z/∂x`, `q = ∂z/∂y`.
pub trait SurfaceIntegrator: Send + Sync {
    fn name(&self) -> &'static str;
    fn integrate(&self, p: &Grid, q: &Grid) -> Result<Grid>;
}

/// Discrete least squares with free (Neumann) boundaries.
///
/// Forward differences are matched to edge-averaged gradients; the normal
/// equations are a Neumann Poisson problem, solved exactly by an FFT of the
/// mirrored divergence.
pub struct PoissonIntegrator;

impl SurfaceIntegrator for PoissonIntegrator {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn integrate(&self, p: &Grid, q: &Grid) -> Result<Grid> {
        p.ensure_same_shape(q)?;
        let (rows, cols) = p.shape();
        let mut div = Grid::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols.saturating_sub(1) {
                let d = 0.5 * (p.get(r, c) + p.get(r, c + 1));
                div.add_at(r, c, d);
                div.add_at(r, c + 1, -d);
            }
        }
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols {
                let d = 0.5 * (q.get(r, c) + q.get(r + 1, c));
                div.add_at(r, c, d);
                div.add_at(r + 1, c, -d);
            }
        }
        // Normal equations: L z = div, L the Neumann Laplacian with eigenvalues -(lx + ly).
        let ext = symmetric_extension(&div);
        let (er, ec) = ext.shape();
        let mut spec = fft2(&ext);
        for k in 0..er {
            let ly = 2.0 - 2.0 * (2.0 * PI * k as f64 / er as f64).cos();
            for l in 0..ec {
                let lx = 2.0 - 2.0 * (2.0 * PI * l as f64 / ec as f64).cos();
                let eig = lx + ly;
                let z = &mut spec.data[k * ec + l];
                *z = if eig == 0.0 {
                    Complex64::default()
                } else {
                    -*z / eig
                };
            }
        }
        ifft2_real(spec)
            .crop(0, 0, rows, cols)
            .map(|g| g.mean_centered())
    }
}

/// Frankot–Chellappa projection onto periodic integrable fields, with the mean
/// gradient integrated separately as a plane.
pub struct FrankotChellappa;

impl SurfaceIntegrator for FrankotChellappa {
    fn name(&self) -> &'static str {
        "frankot-chellappa"
    }

    fn integrate(&self, p: &Grid, q: &Grid) -> Result<Grid> {
        p.ensure_same_shape(q)?;
        let (rows, cols) = p.shape();
        let (mp, mq) = (p.mean(), q.mean());
        let sp = fft2(&p.map(|v| v - mp));
        let sq = fft2(&q.map(|v| v - mq));
        let mut out = sp;
        for k in 0..rows {
            let wy = 2.0 * PI * signed_bin(k, rows) / rows as f64;
            for l in 0..cols {
                let wx = 2.0 * PI * signed_bin(l, cols) / cols as f64;
                let denom = wx * wx + wy * wy;
                let i = k * cols + l;
                out.data[i] = if denom == 0.0 {
                    Complex64::default()
                } else {
                    (Complex64::new(0.0, -wx) * out.data[i] + Complex64::new(0.0, -wy) * sq.data[i])
                        / denom
                };
            }
        }
        let residual = ifft2_real(out);
        let plane = Grid::from_fn(rows, cols, |r, c| mp * c as f64 + mq * r as f64);
        Ok(residual.add(&plane)?.mean_centered())
    }
}

pub fn integrator_by_name(name: &str) -> Result<Box<dyn SurfaceIntegrator>> {
    match name {
        "poisson" => Ok(Box::new(PoissonIntegrator)),
        "frankot-chellappa" | "fc" => Ok(Box::new(FrankotChellappa)),
        other => Err(Error::UnknownName {
            kind: "surface integrator",
            name: other.to_string(),
        }),
    }
}

pub const INTEGRATORS: &[&str] = &["poisson", "frankot-chellappa"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationParams {
    pub method: String,
    /// Cap on `|∂z/∂x|`, `|∂z/∂y|` for near-horizontal normals.
    pub max_slope: f64,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self {
            method: "poisson".into(),
            max_slope: 5.0,
        }
    }
}

/// Integrates a normal field into a mean-centered heightmap in µm.
pub fn integrate_surface(
    nf: &NormalField,
    pixel_pitch: f64,
    params: &IntegrationParams,
) -> Result<HeightMap> {
    if !(params.max_slope > 0.0) {
        return Err(invalid("max_slope", "must be positive"));
    }
    let integrator = integrator_by_name(&params.method)?;
    let cap = params.max_slope;
    let slope = |n: f64, nz: f64| {
        let v = if nz > 0.0 {
            -n / nz
        } else {
            -n.signum() * f64::INFINITY
        };
        v.clamp(-cap, cap)
    };
    let p = nf.nx.zip_map(&nf.nz, slope)?;
    let q = nf.ny.zip_map(&nf.nz, slope)?;
    let z = integrator.integrate(&p, &q)?;
    HeightMap::new(z.scale(pixel_pitch), pixel_pitch)
}

pub const DEFAULT_TREND_SIGMA: f64 = 25.0;

/// Removes the Gaussian-blurred trend.
pub fn detrend(hm: &HeightMap, trend_sigma: f64) -> Result<HeightMap> {
    Ok(HeightMap {
        heights: detrend_grid(&hm.heights, trend_sigma)?,
        pixel_pitch: hm.pixel_pitch,
    })
}

pub fn detrend_grid(g: &Grid, trend_sigma: f64) -> Result<Grid> {
    if !(trend_sigma > 0.0) {
        return Err(invalid("trend_sigma", "must be positive"));
    }
    g.sub(&gaussian_blur(g, trend_sigma, trend_sigma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubbandStack {
    /// `L_1 … L_N`; index 0 holds the finest subband.
    pub levels: Vec<Grid>,
    pub dog_base_sigma: f64,
}

impl SubbandStack {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `n`, counted from 1.
    pub fn level(&self, n: usize) -> Result<&Grid> {
        if n == 0 || n > self.levels.len() {
            return Err(invalid(
                "subband",
                format!("index {n} outside 1..={}", self.levels.len()),
            ));
        }
        Ok(&self.levels[n - 1])
    }

    pub fn sum(&self) -> Grid {
        let mut acc = self.levels[0].clone();
        for l in &self.levels[1..] {
            acc = acc.add(l).expect("levels share a shape");
        }
        acc
    }
}

pub const DEFAULT_DOG_SIGMA: f64 = 1.6;
pub const DEFAULT_DOG_LEVELS: usize = 10;

/// `L_n = G_n − G_{n+1}` with `G_1` the input, `G_n` blurred by `σ^{n−1}`,
/// and `G_{N+1} = 0`.
pub fn dog_decompose(map: &Grid, levels: usize, sigma: f64) -> Result<SubbandStack> {
    if levels < 2 {
        return Err(invalid("levels", "need at least 2"));
    }
    if !(sigma > 1.0) {
        return Err(invalid("sigma", "must exceed 1"));
    }
    let mut blurred = Vec::with_capacity(levels);
    blurred.push(map.clone());
    for n in 2..=levels {
        let s = sigma.powi(n as i32 - 1);
        blurred.push(gaussian_blur(map, s, s));
    }
    let mut out = Vec::with_capacity(levels);
    for n in 0..levels {
        out.push(if n + 1 < levels {
            blurred[n].sub(&blurred[n + 1])?
        } else {
            blurred[n].clone()
        });
    }
    Ok(SubbandStack {
        levels: out,
        dog_base_sigma: sigma,
    })
}

/// Level `n` (from 1) of [`dog_decompose`] without computing the others.
pub fn dog_level(map: &Grid, levels: usize, sigma: f64, n: usize) -> Result<Grid> {
    if levels < 2 {
        return Err(invalid("levels", "need at least 2"));
    }
    if !(sigma > 1.0) {
        return Err(invalid("sigma", "must exceed 1"));
    }
    if n == 0 || n > levels {
        return Err(invalid(
            "subband",
            format!("index {n} outside 1..={levels}"),
        ));
    }
    let g = |k: usize| {
        if k == 1 {
            map.clone()
        } else {
            let s = sigma.powi(k as i32 - 1);
            gaussian_blur(map, s, s)
        }
    };
    if n == levels {
        Ok(g(n))
    } else {
        g(n).sub(&g(n + 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureKind {
    NormMapX,
    NormMapY,
    Heightmap,
    Detrended,
    Subband(usize),
}

impl FeatureKind {
    pub fn subband_index(self) -> Option<usize> {
        match self {
            Self::Subband(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NormMapX => f.write_str("norm_map_x"),
            Self::NormMapY => f.write_str("norm_map_y"),
            Self::Heightmap => f.write_str("heightmap"),
            Self::Detrended => f.write_str("detrended"),
            Self::Subband(n) => write!(f, "subband({n})"),
        }
    }
}

impl From<FeatureKind> for String {
    fn from(k: FeatureKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for FeatureKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || invalid("feature kind", format!("unrecognized '{s}'"));
        Ok(match s {
            "norm_map_x" => Self::NormMapX,
            "norm_map_y" => Self::NormMapY,
            "heightmap" => Self::Heightmap,
            "detrended" => Self::Detrended,
            _ => {
                let digits = s
                    .strip_prefix("subband")
                    .map(|rest| {
                        rest.trim_start_matches(['(', ':', '-'])
                            .trim_end_matches(')')
                    })
                    .ok_or_else(bad)?;
                let n: usize = digits.parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(bad());
                }
                Self::Subband(n)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub trend_sigma: f64,
    pub dog_sigma: f64,
    pub dog_levels: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            trend_sigma: DEFAULT_TREND_SIGMA,
            dog_sigma: DEFAULT_DOG_SIGMA,
            dog_levels: DEFAULT_DOG_LEVELS,
        }
    }
}

/// Feature map of a heightmap. Norm-map kinds use the plane-fit normals of
/// `hm`; subbands decompose the heightmap as given, without detrending.
pub fn feature_from_heightmap(
    hm: &HeightMap,
    kind: FeatureKind,
    params: &FeatureParams,
) -> Result<Grid> {
    match kind {
        FeatureKind::Heightmap => Ok(hm.heights.clone()),
        FeatureKind::Detrended => detrend_grid(&hm.heights, params.trend_sigma),
        FeatureKind::Subband(n) => dog_level(&hm.heights, params.dog_levels, params.dog_sigma, n),
        FeatureKind::NormMapX | FeatureKind::NormMapY => {
            let nf = normals_from_heightmap(hm, 3)?;
            Ok(if kind == FeatureKind::NormMapX {
                nf.nx
            } else {
                nf.ny
            })
        }
    }
}

/// Feature from an estimated norm map and its reconstruction.
pub fn feature_from_estimate(
    nm: &NormMap,
    hm: &HeightMap,
    kind: FeatureKind,
    params: &FeatureParams,
) -> Result<Grid> {
    match kind {
        FeatureKind::NormMapX => Ok(nm.nx_scaled.clone()),
        FeatureKind::NormMapY => Ok(nm.ny_scaled.clone()),
        other => feature_from_heightmap(hm, other, params),
    }
}
