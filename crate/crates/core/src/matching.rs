//! Correlation scores, hypothesis statistics and equal error rates.
//!
//! Index 0 is the unmatched hypothesis and index 1 the matched one. EERs are
//! carried as `log10` so separations of many standard deviations stay finite.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// Pearson correlation of two equally shaped grids.
pub fn correlation(a: &Grid, b: &Grid) -> Result<f64> {
    a.ensure_same_shape(b)?;
    correlation_slices(a.data(), b.data())
}

pub fn correlation_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: (a.len(), 1),
            actual: (b.len(), 1),
        });
    }
    if a.len() < 2 {
        return Err(invalid("correlation", "need at least two samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance("correlation input"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub mu_unmatched: f64,
    pub sigma_unmatched: f64,
    pub mu_matched: f64,
    pub sigma_matched: f64,
    pub n_unmatched: usize,
    pub n_matched: usize,
}

impl MatchStats {
    pub fn from_moments(mu0: f64, sigma0: f64, mu1: f64, sigma1: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma1 > 0.0) {
            return Err(Error::ZeroVariance("hypothesis scores"));
        }
        Ok(Self {
            mu_unmatched: mu0,
            sigma_unmatched: sigma0,
            mu_matched: mu1,
            sigma_matched: sigma1,
            n_unmatched: 0,
            n_matched: 0,
        })
    }

    /// `λ₀ = √2 / σ₀`.
    pub fn laplace_rate_unmatched(&self) -> f64 {
        2f64.sqrt() / self.sigma_unmatched
    }

    /// `λ₁ = √2 / σ₁`.
    pub fn laplace_rate_matched(&self) -> f64 {
        2f64.sqrt() / self.sigma_matched
    }

    /// `(µ₀ − µ₁) / (σ₀ + σ₁)`, non-positive when the labels are in order.
    pub fn separation(&self) -> f64 {
        (self.mu_unmatched - self.mu_matched) / (self.sigma_unmatched + self.sigma_matched)
    }

    pub fn threshold_midpoint(&self) -> f64 {
        0.5 * (self.mu_unmatched + self.mu_matched)
    }

    fn ordered(&self) -> Result<()> {
        if self.mu_unmatched > self.mu_matched {
            return Err(Error::Domain(format!(
                "unmatched mean {} exceeds matched mean {}",
                self.mu_unmatched, self.mu_matched
            )));
        }
        Ok(())
    }
}

fn mle(xs: &[f64], label: &'static str) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(invalid(
            "scores",
            format!("{label} list needs at least 2 values"),
        ));
    }
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::ZeroVariance(label));
    }
    Ok((mu, var.sqrt()))
}

/// Maximum-likelihood mean and (1/n) standard deviation per hypothesis.
pub fn hypothesis_stats(matched: &[f64], unmatched: &[f64]) -> Result<MatchStats> {
    let (mu1, s1) = mle(matched, "matched")?;
    let (mu0, s0) = mle(unmatched, "unmatched")?;
    Ok(MatchStats {
        mu_unmatched: mu0,
        sigma_unmatched: s0,
        mu_matched: mu1,
        sigma_matched: s1,
        n_unmatched: unmatched.len(),
        n_matched: matched.len(),
    })
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn ln_phi(z: f64) -> f64 {
    if z > -20.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Φ(z) = φ(z)/|z| · (1 − 1/z² + 3/z⁴ − 15/z⁶ + …)
        let z2 = z * z;
        let series =
            1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// `log10 Φ[(µ₀ − µ₁)/(σ₀ + σ₁)]`.
pub fn log10_eer_gaussian(stats: &MatchStats) -> Result<f64> {
    stats.ordered()?;
    Ok(ln_phi(stats.separation()) / std::f64::consts::LN_10)
}

/// `log10 ½ exp[√2 (µ₀ − µ₁)/(σ₀ + σ₁)]`.
pub fn log10_eer_laplace(stats: &MatchStats) -> Result<f64> {
    stats.ordered()?;
    Ok((0.5f64.ln() + 2f64.sqrt() * stats.separation()) / std::f64::consts::LN_10)
}

/// Laplace EER through the rate form `½ exp[−λ₀λ₁(µ₁ − µ₀)/(λ₀ + λ₁)]`.
pub fn log10_eer_laplace_rates(stats: &MatchStats) -> Result<f64> {
    stats.ordered()?;
    let (l0, l1) = (stats.laplace_rate_unmatched(), stats.laplace_rate_matched());
    let exponent = -l0 * l1 * (stats.mu_matched - stats.mu_unmatched) / (l0 + l1);
    Ok((0.5f64.ln() + exponent) / std::f64::consts::LN_10)
}

pub fn eer_gaussian(stats: &MatchStats) -> Result<f64> {
    Ok(10f64.powf(log10_eer_gaussian(stats)?))
}

pub fn eer_laplace(stats: &MatchStats) -> Result<f64> {
    Ok(10f64.powf(log10_eer_laplace(stats)?))
}

/// Threshold sweep over pooled scores. A score at or above the threshold is
/// accepted; the crossing of false-accept and false-reject rates is
/// interpolated linearly between adjacent thresholds.
pub fn empirical_eer(matched: &[f64], unmatched: &[f64]) -> Result<f64> {
    if matched.is_empty() || unmatched.is_empty() {
        return Err(invalid("scores", "both lists must be non-empty"));
    }
    let mut m = matched.to_vec();
    let mut u = unmatched.to_vec();
    m.sort_by(f64::total_cmp);
    u.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = m.iter().chain(&u).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let (nm, nu) = (m.len() as f64, u.len() as f64);
    let rates = |t: f64| {
        let far = (u.len() - u.partition_point(|&x| x < t)) as f64 / nu;
        let frr = m.partition_point(|&x| x < t) as f64 / nm;
        (far, frr)
    };
    let mut prev = rates(thresholds[0]);
    if prev.0 <= prev.1 {
        return Ok(0.5 * (prev.0 + prev.1));
    }
    for &t in &thresholds[1..] {
        let cur = rates(t);
        if cur.0 <= cur.1 {
            // d = far − frr goes from positive to non-positive
            let (d0, d1) = (prev.0 - prev.1, cur.0 - cur.1);
            let w = d0 / (d0 - d1);
            let far = prev.0 + w * (cur.0 - prev.0);
            let frr = prev.1 + w * (cur.1 - prev.1);
            return Ok(0.5 * (far + frr));
        }
        prev = cur;
    }
    Ok(0.5 * (prev.0 + prev.1))
}

/// Closed-form or empirical EER model, selectable by name.
pub trait EerModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn log10_eer(&self, matched: &[f64], unmatched: &[f64]) -> Result<f64>;
}

pub struct GaussianEer;
pub struct LaplaceEer;
pub struct EmpiricalEer;

impl EerModel for GaussianEer {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn log10_eer(&self, matched: &[f64], unmatched: &[f64]) -> Result<f64> {
        log10_eer_gaussian(&hypothesis_stats(matched, unmatched)?)
    }
}

impl EerModel for LaplaceEer {
    fn name(&self) -> &'static str {
        "laplace"
    }
    fn log10_eer(&self, matched: &[f64], unmatched: &[f64]) -> Result<f64> {
        log10_eer_laplace(&hypothesis_stats(matched, unmatched)?)
    }
}

impl EerModel for EmpiricalEer {
    fn name(&self) -> &'static str {
        "empirical"
    }
    fn log10_eer(&self, matched: &[f64], unmatched: &[f64]) -> Result<f64> {
        Ok(empirical_eer(matched, unmatched)?.log10())
    }
}

pub fn eer_model_by_name(name: &str) -> Result<Box<dyn EerModel>> {
    match name {
        "gaussian" => Ok(Box::new(GaussianEer)),
        "laplace" => Ok(Box::new(LaplaceEer)),
        "empirical" => Ok(Box::new(EmpiricalEer)),
        other => Err(Error::UnknownName {
            kind: "EER model",
            name: other.to_string(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EerReport {
    pub feature_kind: String,
    pub subband_index: Option<usize>,
    pub stats: MatchStats,
    pub log10_eer_gaussian: f64,
    pub log10_eer_laplace: f64,
    pub eer_empirical: f64,
}

impl EerReport {
    pub fn eer_gaussian(&self) -> f64 {
        10f64.powf(self.log10_eer_gaussian)
    }

    pub fn eer_laplace(&self) -> f64 {
        10f64.powf(self.log10_eer_laplace)
    }
}

pub fn eer_report(
    feature_kind: impl Into<String>,
    subband_index: Option<usize>,
    matched: &[f64],
    unmatched: &[f64],
) -> Result<EerReport> {
    let stats = hypothesis_stats(matched, unmatched)?;
    Ok(EerReport {
        feature_kind: feature_kind.into(),
        subband_index,
        log10_eer_gaussian: log10_eer_gaussian(&stats)?,
        log10_eer_laplace: log10_eer_laplace(&stats)?,
        eer_empirical: empirical_eer(matched, unmatched)?,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mu0: f64, s0: f64, mu1: f64, s1: f64) -> MatchStats {
        MatchStats::from_moments(mu0, s0, mu1, s1).unwrap()
    }

    #[test]
    fn correlation_identities() {
        let a = Grid::from_fn(4, 5, |r, c| (r * 5 + c) as f64 * 0.3 + ((r + c) % 3) as f64);
        assert!((correlation(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = a.map(|v| -v + 7.0);
        assert!((correlation(&a, &b).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            correlation(&a, &Grid::filled(4, 5, 1.0)),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn two_point_mle() {
        let s = hypothesis_stats(&[0.9, 0.8], &[-1.0, 1.0]).unwrap();
        assert_eq!(s.mu_unmatched, 0.0);
        assert_eq!(s.sigma_unmatched, 1.0);
        assert!(hypothesis_stats(&[1.0, 1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn equal_means_give_one_half() {
        let s = stats(0.3, 0.1, 0.3, 0.2);
        assert!((eer_gaussian(&s).unwrap() - 0.5).abs() < 1e-15);
        assert!((eer_laplace(&s).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverted_labels_rejected() {
        let s = stats(0.5, 0.1, 0.3, 0.1);
        assert!(log10_eer_gaussian(&s).is_err());
        assert!(log10_eer_laplace(&s).is_err());
    }

    #[test]
    fn ln_phi_branches_meet() {
        let a = (0.5 * erfc(20.0 / std::f64::consts::SQRT_2)).ln();
        assert!((ln_phi(-20.0 - 1e-12) - a).abs() < 1e-6);
        assert!(ln_phi(-60.0).is_finite());
    }

    #[test]
    fn empirical_separated_and_identical() {
        assert_eq!(empirical_eer(&[0.8, 0.9], &[0.0, 0.1]).unwrap(), 0.0);
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let e = empirical_eer(&xs, &xs).unwrap();
        assert!((e - 0.5).abs() <= 1.0 / 50.0, "{e}");
    }

    #[test]
    fn registry_lookup() {
        for n in ["gaussian", "laplace", "empirical"] {
            assert_eq!(eer_model_by_name(n).unwrap().name(), n);
        }
        assert!(eer_model_by_name("weibull").is_err());
    }
}
