//! Simulated acquisition campaigns: scanners, handling, and the scan-to-feature chain.
//!
//! A patch is acquired by laying it on a scanner in all four orientations. Every
//! acquisition bends the sheet slightly differently (a smooth height warp), and
//! every pass sees its own illumination gain field, blur and sensor noise.

use rand::seq::IndexedRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::matching::correlation;
use crate::normmap::{complete_z, estimate_alpha, estimate_normmap, NormMap};
use crate::optics::{render_scan, Orientation, ReflectanceParams, ScanImage, ScannerGeometry};
use crate::reconstruct::{
    feature_from_estimate, integrate_surface, FeatureKind, FeatureParams, IntegrationParams,
};
use crate::rng;
use crate::spectral::{fft2, ifft2_real, signed_bin};
use crate::synth::{
    generate_surface, normals_from_heightmap, FiberModelParams, HeightMap, NormalField,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScannerProfile {
    pub name: String,
    pub geometry: ScannerGeometry,
    pub reflectance: ReflectanceParams,
    /// Blur in the scanner frame, px. `x` runs along the sensor line.
    pub blur_sigma_x: f64,
    pub blur_sigma_y: f64,
    /// Additive white sensor noise, in intensity units.
    pub noise_std: f64,
    /// Relative std of the smooth multiplicative illumination field of one pass.
    pub gain_std: f64,
    pub gain_scale_px: f64,
}

impl ScannerProfile {
    /// Same optics with blur, noise and gain variation switched off.
    pub fn clean(&self) -> Self {
        Self {
            blur_sigma_x: 0.0,
            blur_sigma_y: 0.0,
            noise_std: 0.0,
            gain_std: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.reflectance.validate()?;
        for (name, v) in [
            ("blur_sigma_x", self.blur_sigma_x),
            ("blur_sigma_y", self.blur_sigma_y),
            ("noise_std", self.noise_std),
            ("gain_std", self.gain_std),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.gain_std > 0.0 && !(self.gain_scale_px > 0.0) {
            return Err(invalid("gain_scale_px", "must be positive"));
        }
        Ok(())
    }
}

fn scanner(
    name: &str,
    offset_y: f64,
    offset_z: f64,
    blur: (f64, f64),
    noise: f64,
) -> ScannerProfile {
    let mut geometry = ScannerGeometry::default();
    geometry.light_offset_y = offset_y;
    geometry.light_offset_z = offset_z;
    ScannerProfile {
        name: name.into(),
        geometry,
        reflectance: ReflectanceParams::with_specular(0.1),
        blur_sigma_x: blur.0,
        blur_sigma_y: blur.1,
        noise_std: noise,
        gain_std: 0.01,
        gain_scale_px: 20.0,
    }
}

/// Three desk scanners with different light placement, blur and noise.
pub fn default_scanners() -> Vec<ScannerProfile> {
    vec![
        scanner("scanner-1", 2.0, 2.0, (1.2, 0.6), 0.032),
        scanner("scanner-2", 1.8, 2.3, (1.0, 0.7), 0.040),
        scanner("scanner-3", 2.2, 1.8, (1.4, 0.5), 0.050),
    ]
}

/// How the sheet is bent when it is placed on the glass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandlingParams {
    /// Std of the added smooth height field, µm.
    pub warp_amplitude_um: f64,
    pub warp_scale_px: f64,
}

impl Default for HandlingParams {
    fn default() -> Self {
        Self {
            warp_amplitude_um: 15.0,
            warp_scale_px: 30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionModel {
    pub scanners: Vec<ScannerProfile>,
    /// Acquisitions per patch and scanner.
    pub repeats: usize,
    pub handling: HandlingParams,
}

impl Default for AcquisitionModel {
    fn default() -> Self {
        Self {
            scanners: default_scanners(),
            repeats: 3,
            handling: HandlingParams::default(),
        }
    }
}

impl AcquisitionModel {
    /// Noise-free scanners; the handling warp is kept.
    pub fn clean() -> Self {
        let mut m = Self::default();
        m.scanners = m.scanners.iter().map(ScannerProfile::clean).collect();
        m
    }

    pub fn per_patch(&self) -> usize {
        self.scanners.len() * self.repeats
    }

    pub fn validate(&self) -> Result<()> {
        if self.scanners.is_empty() || self.repeats == 0 {
            return Err(invalid(
                "acquisition model",
                "needs at least one scanner and one repeat",
            ));
        }
        self.scanners.iter().try_for_each(ScannerProfile::validate)
    }
}

/// Smooth zero-mean field with unit std: white noise under a periodic Gaussian
/// blur of `sigma` px, applied in the frequency domain.
pub fn smooth_field(rows: usize, cols: usize, sigma: f64, seed: u64) -> Grid {
    let mut rng = rng::stream(seed, &[rng::tag("smooth-field")]);
    let white = Grid::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let mut spec = fft2(&white);
    let k = -2.0 * (std::f64::consts::PI * sigma).powi(2);
    for r in 0..rows {
        let fy = signed_bin(r, rows) / rows as f64;
        for c in 0..cols {
            let fx = signed_bin(c, cols) / cols as f64;
            spec.data[r * cols + c] *= (k * (fx * fx + fy * fy)).exp();
        }
    }
    let field = ifft2_real(spec).mean_centered();
    let sd = field.std();
    if sd > 0.0 {
        field.scale(1.0 / sd)
    } else {
        field
    }
}

/// Heights as they lie on the glass for one acquisition.
pub fn handled_surface(
    surface: &HeightMap,
    handling: &HandlingParams,
    seed: u64,
) -> Result<HeightMap> {
    if handling.warp_amplitude_um <= 0.0 {
        return Ok(surface.clone());
    }
    let (rows, cols) = surface.shape();
    let warp = smooth_field(
        rows,
        cols,
        handling.warp_scale_px,
        rng::derive_seed(seed, &[rng::tag("warp")]),
    );
    HeightMap::new(
        surface
            .heights
            .add(&warp.scale(handling.warp_amplitude_um))?,
        surface.pixel_pitch,
    )
}

/// Four scans of already-handled normals.
pub fn scan_normals(
    normals: &NormalField,
    scanner: &ScannerProfile,
    pitch: f64,
    seed: u64,
) -> Result<Vec<ScanImage>> {
    scanner.validate()?;
    Orientation::ALL
        .iter()
        .map(|&o| {
            let pass = rng::derive_seed(seed, &[rng::tag("pass"), o.degrees() as u64]);
            let mut scan = render_scan(normals, &scanner.geometry, &scanner.reflectance, o, pitch)?;
            if scanner.gain_std > 0.0 {
                let (rows, cols) = scan.intensities.shape();
                let g = smooth_field(rows, cols, scanner.gain_scale_px, pass);
                scan.intensities = scan
                    .intensities
                    .zip_map(&g, |v, f| v * (1.0 + scanner.gain_std * f))?;
            }
            crate::synth::degrade_scan(
                &scan,
                scanner.blur_sigma_x,
                scanner.blur_sigma_y,
                scanner.noise_std,
                pass,
            )
        })
        .collect()
}

/// One acquisition: handle the sheet, then scan it in all four orientations.
pub fn acquire(
    surface: &HeightMap,
    scanner: &ScannerProfile,
    handling: &HandlingParams,
    seed: u64,
) -> Result<Vec<ScanImage>> {
    let handled = handled_surface(surface, handling, seed)?;
    let normals = normals_from_heightmap(&handled, 3)?;
    scan_normals(&normals, scanner, surface.pixel_pitch, seed)
}

/// Mean `(σ_x, σ_y)` of the true normal components, the reference the scale
/// estimator matches scanner norm maps against.
pub fn reference_component_std(surfaces: &[HeightMap]) -> Result<(f64, f64)> {
    if surfaces.is_empty() {
        return Err(invalid("surfaces", "need at least one reference surface"));
    }
    let mut acc = (0.0, 0.0);
    for s in surfaces {
        let nf = normals_from_heightmap(s, 3)?;
        acc.0 += nf.nx.std();
        acc.1 += nf.ny.std();
    }
    let n = surfaces.len() as f64;
    Ok((acc.0 / n, acc.1 / n))
}

/// Scan set → norm map → completed normals → heightmap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub reference_std: (f64, f64),
    pub integration: IntegrationParams,
    pub features: FeatureParams,
}

impl FeaturePipeline {
    pub fn new(reference_std: (f64, f64)) -> Self {
        Self {
            reference_std,
            integration: IntegrationParams::default(),
            features: FeatureParams::default(),
        }
    }

    pub fn estimate(&self, scans: &[ScanImage]) -> Result<Estimate> {
        let normmap = estimate_normmap(scans)?;
        self.estimate_from(normmap, scans[0].pixel_pitch)
    }

    /// Scale estimate, z-completion and integration of an existing norm map.
    pub fn estimate_from(&self, normmap: NormMap, pitch: f64) -> Result<Estimate> {
        let (sx, sy) = normmap.component_stds();
        let alpha = estimate_alpha(sx, sy, self.reference_std.0, self.reference_std.1)?;
        let completion = complete_z(&normmap, alpha)?;
        let heightmap = integrate_surface(&completion.normals, pitch, &self.integration)?;
        Ok(Estimate {
            normmap,
            alpha,
            clamped: completion.clamped,
            heightmap,
        })
    }

    pub fn feature(&self, est: &Estimate, kind: FeatureKind) -> Result<Grid> {
        feature_from_estimate(&est.normmap, &est.heightmap, kind, &self.features)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub normmap: NormMap,
    pub alpha: f64,
    pub clamped: usize,
    pub heightmap: HeightMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub patches: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixel_pitch: f64,
    pub surface: FiberModelParams,
    pub model: AcquisitionModel,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            patches: 9,
            rows: 200,
            cols: 200,
            pixel_pitch: crate::synth::PITCH_300PPI,
            surface: FiberModelParams::default(),
            model: AcquisitionModel::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionId {
    pub patch: usize,
    pub scanner: usize,
    pub repeat: usize,
}

impl CorpusSpec {
    pub fn surface_seed(&self, patch: usize) -> u64 {
        rng::derive_seed(self.seed, &[rng::tag("patch"), patch as u64])
    }

    pub fn acquisition_seed(&self, id: AcquisitionId) -> u64 {
        rng::derive_seed(
            self.seed,
            &[
                rng::tag("acquisition"),
                id.patch as u64,
                id.scanner as u64,
                id.repeat as u64,
            ],
        )
    }

    /// Acquisition ids, patch-major.
    pub fn acquisition_ids(&self) -> Vec<AcquisitionId> {
        let mut ids = Vec::with_capacity(self.patches * self.model.per_patch());
        for patch in 0..self.patches {
            for scanner in 0..self.model.scanners.len() {
                for repeat in 0..self.model.repeats {
                    ids.push(AcquisitionId {
                        patch,
                        scanner,
                        repeat,
                    });
                }
            }
        }
        ids
    }

    pub fn surfaces(&self) -> Result<Vec<HeightMap>> {
        (0..self.patches)
            .into_par_iter()
            .map(|p| {
                let params = FiberModelParams {
                    seed: self.surface_seed(p),
                    ..self.surface.clone()
                };
                generate_surface(&params, self.rows, self.cols, self.pixel_pitch)
            })
            .collect()
    }
}

/// Surfaces and every acquisition's estimate.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub surfaces: Vec<HeightMap>,
    pub pipeline: FeaturePipeline,
    pub ids: Vec<AcquisitionId>,
    pub estimates: Vec<Estimate>,
}

pub fn build_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    build_corpus_from(spec, spec.surfaces()?)
}

/// Acquires pre-generated surfaces; `surfaces.len()` overrides `spec.patches`.
pub fn build_corpus_from(spec: &CorpusSpec, surfaces: Vec<HeightMap>) -> Result<Corpus> {
    spec.model.validate()?;
    if surfaces.len() < 2 {
        return Err(invalid("patches", "need at least two patches"));
    }
    let spec = CorpusSpec {
        patches: surfaces.len(),
        ..spec.clone()
    };
    let pipeline = FeaturePipeline::new(reference_component_std(&surfaces)?);
    let ids = spec.acquisition_ids();
    let estimates = ids
        .par_iter()
        .map(|&id| {
            let scans = acquire(
                &surfaces[id.patch],
                &spec.model.scanners[id.scanner],
                &spec.model.handling,
                spec.acquisition_seed(id),
            )?;
            pipeline.estimate(&scans)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        spec,
        surfaces,
        pipeline,
        ids,
        estimates,
    })
}

impl Corpus {
    pub fn features(&self, kind: FeatureKind) -> Result<Vec<Grid>> {
        self.estimates
            .par_iter()
            .map(|e| self.pipeline.feature(e, kind))
            .collect()
    }

    pub fn pair_design(&self) -> PairDesign {
        PairDesign::new(
            &self.ids,
            rng::derive_seed(self.spec.seed, &[rng::tag("pairs")]),
        )
    }
}

/// Index pairs into an acquisition list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDesign {
    /// Every unordered pair of acquisitions of the same patch.
    pub matched: Vec<(usize, usize)>,
    /// For each patch, all acquisitions against all acquisitions of one other
    /// randomly chosen patch.
    pub unmatched: Vec<(usize, usize)>,
}

impl PairDesign {
    pub fn new(ids: &[AcquisitionId], seed: u64) -> Self {
        let patches = ids.iter().map(|i| i.patch).max().map_or(0, |m| m + 1);
        let members: Vec<Vec<usize>> = (0..patches)
            .map(|p| (0..ids.len()).filter(|&i| ids[i].patch == p).collect())
            .collect();
        let mut matched = Vec::new();
        for m in &members {
            for (k, &a) in m.iter().enumerate() {
                for &b in &m[k + 1..] {
                    matched.push((a, b));
                }
            }
        }
        let mut rng = rng::stream(seed, &[rng::tag("unmatched")]);
        let mut unmatched = Vec::new();
        for p in 0..patches {
            let others: Vec<usize> = (0..patches).filter(|&q| q != p).collect();
            let Some(&q) = others.choose(&mut rng) else {
                continue;
            };
            for &a in &members[p] {
                for &b in &members[q] {
                    unmatched.push((a, b));
                }
            }
        }
        Self { matched, unmatched }
    }

    /// Matched pairs as in [`PairDesign::new`]; unmatched pairs take every
    /// patch pair and compare acquisitions in the same slot (k-th of one patch
    /// against k-th of the other), so unmatched scores span many surface pairs.
    pub fn all_patch_pairs(ids: &[AcquisitionId]) -> Self {
        Self::patch_pairs(ids, false)
    }

    /// One unmatched pair per patch pair, cycling through acquisition slots.
    pub fn patch_pair_representatives(ids: &[AcquisitionId]) -> Self {
        Self::patch_pairs(ids, true)
    }

    fn patch_pairs(ids: &[AcquisitionId], single: bool) -> Self {
        let matched = Self::new(ids, 0).matched;
        let patches = ids.iter().map(|i| i.patch).max().map_or(0, |m| m + 1);
        let members: Vec<Vec<usize>> = (0..patches)
            .map(|p| (0..ids.len()).filter(|&i| ids[i].patch == p).collect())
            .collect();
        let mut unmatched = Vec::new();
        for p in 0..patches {
            for q in p + 1..patches {
                let slots = members[p].len().min(members[q].len());
                if slots == 0 {
                    continue;
                }
                if single {
                    let k = (p + q) % slots;
                    unmatched.push((members[p][k], members[q][k]));
                } else {
                    unmatched.extend((0..slots).map(|k| (members[p][k], members[q][k])));
                }
            }
        }
        Self { matched, unmatched }
    }

    /// Correlation scores `(matched, unmatched)` of `features` under this design.
    pub fn scores(&self, features: &[Grid]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.scores_with(features, |a, b| correlation(a, b))
    }

    pub fn scores_with<F>(&self, features: &[Grid], score: F) -> Result<(Vec<f64>, Vec<f64>)>
    where
        F: Fn(&Grid, &Grid) -> Result<f64> + Sync,
    {
        let run = |pairs: &[(usize, usize)]| -> Result<Vec<f64>> {
            pairs
                .par_iter()
                .map(|&(a, b)| score(&features[a], &features[b]))
                .collect()
        };
        Ok((run(&self.matched)?, run(&self.unmatched)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(patches: usize, per: usize) -> Vec<AcquisitionId> {
        (0..patches)
            .flat_map(|p| {
                (0..per).map(move |r| AcquisitionId {
                    patch: p,
                    scanner: 0,
                    repeat: r,
                })
            })
            .collect()
    }

    #[test]
    fn pair_counts_follow_the_design() {
        let d = PairDesign::new(&ids(9, 9), 3);
        assert_eq!(d.matched.len(), 9 * 36);
        assert_eq!(d.unmatched.len(), 729);
        let id = ids(9, 9);
        assert!(d
            .matched
            .iter()
            .all(|&(a, b)| id[a].patch == id[b].patch && a != b));
        assert!(d.unmatched.iter().all(|&(a, b)| id[a].patch != id[b].patch));
    }

    #[test]
    fn patch_pair_designs_cover_every_patch_pair() {
        let id = ids(5, 4);
        let all = PairDesign::all_patch_pairs(&id);
        assert_eq!(all.unmatched.len(), 10 * 4);
        let reps = PairDesign::patch_pair_representatives(&id);
        assert_eq!(reps.unmatched.len(), 10);
        for (a, b) in all.unmatched {
            assert!(id[a].patch < id[b].patch);
            assert_eq!(a % 4, b % 4);
        }
        assert_eq!(reps.matched.len(), 5 * 6);
    }

    #[test]
    fn smooth_field_is_standardized() {
        let f = smooth_field(64, 48, 5.0, 1);
        assert!(f.mean().abs() < 1e-12);
        assert!((f.std() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clean_profile_drops_degradations() {
        let s = default_scanners()[0].clean();
        assert_eq!((s.blur_sigma_x, s.noise_std, s.gain_std), (0.0, 0.0, 0.0));
        assert!(s.validate().is_ok());
    }
}
