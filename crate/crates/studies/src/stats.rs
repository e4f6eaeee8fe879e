//! Small inferential helpers shared by the studies.

use statrs::distribution::{ContinuousCDF, StudentsT};

use paperprint_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain(
            "linear fit needs two or more paired points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("linear fit abscissa"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    TwoSided,
    Greater,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub mean: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// One-sample t-test of `samples` against mean zero.
pub fn one_sample_t(samples: &[f64], tail: Tail) -> Result<TTest> {
    if samples.len() < 2 {
        return Err(Error::Domain("t-test needs at least two samples".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance("t-test samples"));
    }
    let t = mean / (var / n).sqrt();
    let df = n - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))?;
    let p_value = match tail {
        Tail::TwoSided => 2.0 * dist.sf(t.abs()),
        Tail::Greater => dist.sf(t),
    };
    Ok(TTest {
        mean,
        t,
        df,
        p_value,
    })
}

pub fn fisher_z(r: f64) -> f64 {
    r.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh()
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_unit_r_squared() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = x.map(|v| 3.0 - 2.0 * v);
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_test_matches_hand_computation() {
        // mean 2, sample sd sqrt(2/3), n 4
        let s = [1.0, 2.0, 3.0, 2.0];
        let sd = (2.0f64 / 3.0).sqrt();
        let r = one_sample_t(&s, Tail::TwoSided).unwrap();
        assert!((r.t - 2.0 / (sd / 2.0)).abs() < 1e-12);
        let g = one_sample_t(&s, Tail::Greater).unwrap();
        assert!((r.p_value - 2.0 * g.p_value).abs() < 1e-12);
        assert!(one_sample_t(&[1.0, 1.0], Tail::TwoSided).is_err());
    }
}
