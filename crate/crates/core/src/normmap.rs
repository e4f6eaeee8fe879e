//! Norm maps from opposed scans, scale recovery, and blur/deblur kernels.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{convolve_same, Grid};
use crate::optics::{Orientation, ScanImage};
use crate::rng;
use crate::synth::NormalField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSource {
    Scanner,
    Confocal,
    Deblurred,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormMap {
    pub nx_scaled: Grid,
    pub ny_scaled: Grid,
    pub source: NormSource,
}

impl NormMap {
    pub fn new(nx_scaled: Grid, ny_scaled: Grid, source: NormSource) -> Result<Self> {
        nx_scaled.ensure_same_shape(&ny_scaled)?;
        if !nx_scaled.all_finite() || !ny_scaled.all_finite() {
            return Err(Error::Domain("norm map contains non-finite values".into()));
        }
        Ok(Self {
            nx_scaled,
            ny_scaled,
            source,
        })
    }

    /// The `(n_x, n_y)` projection of a normal field.
    pub fn from_normals(nf: &NormalField, source: NormSource) -> Self {
        Self {
            nx_scaled: nf.nx.clone(),
            ny_scaled: nf.ny.clone(),
            source,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            nx_scaled: self.nx_scaled.scale(alpha),
            ny_scaled: self.ny_scaled.scale(alpha),
            source: self.source,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.nx_scaled.shape()
    }

    /// `(σ_x, σ_y)` of the two components.
    pub fn component_stds(&self) -> (f64, f64) {
        (self.nx_scaled.std(), self.ny_scaled.std())
    }
}

/// `n_y ∝ I_0 − I_180` and `n_x ∝ I_90 − I_270`, all in the paper frame.
pub fn estimate_normmap(scans: &[ScanImage]) -> Result<NormMap> {
    let find = |o: Orientation| -> Result<Grid> {
        scans
            .iter()
            .find(|s| s.orientation == o)
            .map(ScanImage::to_paper_frame)
            .ok_or(Error::MissingOrientation(o.degrees()))
    };
    let (i0, i90, i180, i270) = (
        find(Orientation::Deg0)?,
        find(Orientation::Deg90)?,
        find(Orientation::Deg180)?,
        find(Orientation::Deg270)?,
    );
    NormMap::new(i90.sub(&i270)?, i0.sub(&i180)?, NormSource::Scanner)
}

/// Least-squares scale between scanner and reference component deviations.
pub fn estimate_alpha(sx_s: f64, sy_s: f64, sx_c: f64, sy_c: f64) -> Result<f64> {
    for (name, v) in [
        ("sx_s", sx_s),
        ("sy_s", sy_s),
        ("sx_c", sx_c),
        ("sy_c", sy_c),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok((sx_s * sx_c + sy_s * sy_c) / (sx_c * sx_c + sy_c * sy_c))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub normals: NormalField,
    /// Pixels whose radicand was negative and were projected onto the unit circle.
    pub clamped: usize,
}

/// Rounding slack below which a negative radicand counts as zero.
const RADICAND_SLACK: f64 = 1e-12;

pub fn complete_z(nm: &NormMap, alpha: f64) -> Result<Completion> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let (rows, cols) = nm.shape();
    let mut nx = Grid::zeros(rows, cols);
    let mut ny = Grid::zeros(rows, cols);
    let mut nz = Grid::zeros(rows, cols);
    let mut clamped = 0;
    for i in 0..nm.nx_scaled.len() {
        let x = nm.nx_scaled.data()[i] / alpha;
        let y = nm.ny_scaled.data()[i] / alpha;
        let rad = 1.0 - x * x - y * y;
        let (x, y, z) = if rad >= -RADICAND_SLACK {
            (x, y, rad.max(0.0).sqrt())
        } else {
            clamped += 1;
            let r = x.hypot(y);
            (x / r, y / r, 0.0)
        };
        nx.data_mut()[i] = x;
        ny.data_mut()[i] = y;
        nz.data_mut()[i] = z;
    }
    Ok(Completion {
        normals: NormalField { nx, ny, nz },
        clamped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Deblur,
    Blur,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel2D {
    pub coefficients: Grid,
    pub kind: KernelKind,
}

impl Kernel2D {
    pub fn new(coefficients: Grid, kind: KernelKind) -> Result<Self> {
        let (r, c) = coefficients.shape();
        if r != c || r % 2 == 0 {
            return Err(invalid(
                "kernel",
                format!("must be square and odd, got {r}x{c}"),
            ));
        }
        if kind == KernelKind::Blur && coefficients.data().iter().any(|&v| v < 0.0) {
            return Err(invalid("kernel", "blur kernels are non-negative"));
        }
        Ok(Self { coefficients, kind })
    }

    pub fn size(&self) -> usize {
        self.coefficients.rows()
    }

    pub fn center(&self) -> f64 {
        let h = self.size() / 2;
        self.coefficients.get(h, h)
    }

    pub fn center_dominates(&self) -> bool {
        let c = self.center().abs();
        self.coefficients.data().iter().all(|v| v.abs() <= c)
    }

    pub fn apply(&self, map: &Grid) -> Result<Grid> {
        convolve_same(map, &self.coefficients)
    }
}

/// Regression-row index set and normal-equation blocks for `y ≈ H ∗ x`.
struct Design {
    size: usize,
    /// Linear indices of valid output pixels.
    rows: Vec<usize>,
    cols: usize,
}

impl Design {
    fn new(shape: (usize, usize), size: usize, border: usize) -> Result<Self> {
        if size % 2 == 0 {
            return Err(invalid("size", "kernel size must be odd"));
        }
        let border = border.max(size / 2);
        let (rows, cols) = shape;
        if rows <= 2 * border || cols <= 2 * border {
            return Err(invalid("shape", "grid too small for the kernel"));
        }
        let idx = (border..rows - border)
            .flat_map(|r| (border..cols - border).map(move |c| r * cols + c))
            .collect();
        Ok(Self {
            size,
            rows: idx,
            cols,
        })
    }

    fn features(&self, x: &Grid, at: usize, out: &mut [f64]) {
        let h = (self.size / 2) as isize;
        let (r, c) = ((at / self.cols) as isize, (at % self.cols) as isize);
        let mut t = 0;
        for i in 0..self.size as isize {
            for j in 0..self.size as isize {
                out[t] = x.get((r - (i - h)) as usize, (c - (j - h)) as usize);
                t += 1;
            }
        }
    }

    /// Per-group `(XᵀX, Xᵀy, yᵀy, count)`; `group` maps a row position to its group.
    fn grams(
        &self,
        x: &Grid,
        y: &Grid,
        groups: usize,
        group: &(dyn Fn(usize) -> usize + Sync),
    ) -> Vec<Normal> {
        let p = self.size * self.size;
        const CHUNK: usize = 2048;
        let partial: Vec<Vec<Normal>> = self
            .rows
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut acc = vec![Normal::zeros(p); groups];
                let mut f = vec![0.0; p];
                for (k, &at) in chunk.iter().enumerate() {
                    self.features(x, at, &mut f);
                    let target = y.data()[at];
                    acc[group(ci * CHUNK + k)].push(&f, target);
                }
                acc
            })
            .collect();
        let mut total = vec![Normal::zeros(p); groups];
        for part in partial {
            for (t, s) in total.iter_mut().zip(part) {
                t.merge(&s);
            }
        }
        total.iter_mut().for_each(Normal::symmetrize);
        total
    }
}

#[derive(Clone, Debug)]
struct Normal {
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    yy: f64,
    count: usize,
}

impl Normal {
    fn zeros(p: usize) -> Self {
        Self {
            gram: DMatrix::zeros(p, p),
            rhs: DVector::zeros(p),
            yy: 0.0,
            count: 0,
        }
    }

    fn push(&mut self, f: &[f64], y: f64) {
        let p = f.len();
        for a in 0..p {
            let fa = f[a];
            self.rhs[a] += fa * y;
            for b in a..p {
                self.gram[(a, b)] += fa * f[b];
            }
        }
        self.yy += y * y;
        self.count += 1;
    }

    fn merge(&mut self, other: &Normal) {
        self.gram += &other.gram;
        self.rhs += &other.rhs;
        self.yy += other.yy;
        self.count += other.count;
    }

    fn symmetrize(&mut self) {
        let p = self.rhs.len();
        for a in 0..p {
            for b in 0..a {
                self.gram[(a, b)] = self.gram[(b, a)];
            }
        }
    }

    fn minus(&self, other: &Normal) -> Normal {
        Normal {
            gram: &self.gram - &other.gram,
            rhs: &self.rhs - &other.rhs,
            yy: self.yy - other.yy,
            count: self.count - other.count,
        }
    }

    /// Mean squared residual of `h` on these rows.
    fn mse(&self, h: &DVector<f64>) -> f64 {
        let quad = (h.transpose() * &self.gram * h)[(0, 0)];
        ((quad - 2.0 * self.rhs.dot(h) + self.yy) / self.count as f64).max(0.0)
    }

    fn ridge(&self, lambda: f64) -> Result<DVector<f64>> {
        let n = self.count as f64;
        let p = self.rhs.len();
        let a = &self.gram / n + DMatrix::identity(p, p) * lambda;
        let b = &self.rhs / n;
        a.cholesky()
            .map(|ch| ch.solve(&b))
            .ok_or_else(|| Error::Singular("ridge normal equations".into()))
    }
}

fn check_pair(a: &Grid, b: &Grid, min: usize) -> Result<()> {
    a.ensure_same_shape(b)?;
    let (r, c) = a.shape();
    if r < min || c < min {
        return Err(invalid(
            "shape",
            format!("need at least {min}x{min}, got {r}x{c}"),
        ));
    }
    if a.variance() == 0.0 {
        return Err(Error::Singular("input map is constant".into()));
    }
    Ok(())
}

fn kernel_grid(h: &DVector<f64>, size: usize) -> Grid {
    Grid::from_fn(size, size, |i, j| h[i * size + j])
}

/// `count` log-spaced values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-6, 1e2, 20)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeblurFit {
    pub kernel: Kernel2D,
    pub lambda: f64,
    /// Mean and standard error of the cross-validated MSE per λ.
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub rms_residual: f64,
    pub regression_rows: usize,
}

pub const REGRESSION_BORDER: usize = 3;

/// Ridge regression of `C` on `H ∗ S` with λ chosen by K-fold CV and the
/// one-standard-error rule, then refit on all rows.
pub fn fit_deblur_filter(
    s: &Grid,
    c: &Grid,
    size: usize,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<DeblurFit> {
    check_pair(s, c, 50)?;
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| !(l >= 0.0)) {
        return Err(invalid(
            "lambda_grid",
            "needs at least one non-negative value",
        ));
    }
    if folds < 2 {
        return Err(invalid("folds", "need at least 2"));
    }
    let design = Design::new(s.shape(), size, REGRESSION_BORDER)?;
    let n = design.rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag("cv-folds")]));
    let mut fold_of = vec![0usize; n];
    for (i, &row) in order.iter().enumerate() {
        fold_of[row] = i % folds;
    }
    let per_fold = design.grams(s, c, folds, &|i| fold_of[i]);
    let mut all = Normal::zeros(size * size);
    per_fold.iter().for_each(|f| all.merge(f));

    let scores: Vec<Result<(f64, f64)>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let errs = per_fold
                .iter()
                .map(|held| Ok(held.mse(&all.minus(held).ridge(lambda)?)))
                .collect::<Result<Vec<f64>>>()?;
            let k = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / k;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Ok((mean, (var / k).sqrt()))
        })
        .collect();
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let limit = scores[best].0 + scores[best].1;
    let lambda = lambda_grid
        .iter()
        .zip(&scores)
        .filter(|(_, (m, _))| *m <= limit)
        .map(|(&l, _)| l)
        .fold(lambda_grid[best], f64::max);
    let h = all.ridge(lambda)?;
    Ok(DeblurFit {
        kernel: Kernel2D::new(kernel_grid(&h, size), KernelKind::Deblur)?,
        lambda,
        cv_mean: scores.iter().map(|s| s.0).collect(),
        cv_se: scores.iter().map(|s| s.1).collect(),
        rms_residual: all.mse(&h).sqrt(),
        regression_rows: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Lawson–Hanson active set for `min ½xᵀAx − bᵀx, x ≥ 0` with `A` symmetric
/// positive semidefinite (the normal equations of a least-squares problem).
pub fn nnls_gram(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<NnlsSolution> {
    let p = b.len();
    if a.nrows() != p || a.ncols() != p {
        return Err(Error::ShapeMismatch {
            expected: (p, p),
            actual: a.shape(),
        });
    }
    let mut x = DVector::<f64>::zeros(p);
    let mut passive = vec![false; p];
    let max_iter = 30 * p.max(10);
    let gradient = |x: &DVector<f64>| b - a * x;
    let mut iterations = 0;
    loop {
        let w = gradient(&x);
        let candidate = (0..p)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::NonConvergence {
                    restarts: 1,
                    best_residual: kkt(&x, &gradient(&x)),
                    best_params: x.iter().copied().collect(),
                });
            }
            let z = solve_passive(a, b, &passive)?;
            let infeasible: Vec<usize> = (0..p).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if infeasible.is_empty() {
                x = z;
                break;
            }
            let step = infeasible
                .iter()
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * step;
            for i in 0..p {
                if passive[i] && x[i] <= tol * 1e-3 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    let residual = kkt(&x, &gradient(&x));
    Ok(NnlsSolution {
        x: x.iter().copied().collect(),
        kkt_residual: residual,
        iterations,
    })
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> Result<DVector<f64>> {
    let idx: Vec<usize> = (0..b.len()).filter(|&i| passive[i]).collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| a[(idx[i], idx[j])]);
    let rhs = DVector::from_fn(k, |i, _| b[idx[i]]);
    let sol = sub
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| sub.lu().solve(&rhs))
        .ok_or_else(|| Error::Singular("passive-set subproblem".into()))?;
    let mut z = DVector::zeros(b.len());
    for (i, &j) in idx.iter().enumerate() {
        z[j] = sol[i];
    }
    Ok(z)
}

/// Largest violation of the NNLS optimality conditions for gradient `w = b − Ax`.
fn kkt(x: &DVector<f64>, w: &DVector<f64>) -> f64 {
    x.iter()
        .zip(w.iter())
        .map(|(&xi, &wi)| if xi > 0.0 { wi.abs() } else { wi.max(0.0) })
        .fold(xi_neg(x), f64::max)
}

fn xi_neg(x: &DVector<f64>) -> f64 {
    x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max)
}

pub const KKT_TOLERANCE: f64 = 1e-8;

/// Non-negative kernel minimizing `‖S − H ∗ C‖²`.
pub fn fit_blur_filter_nnls(c: &Grid, s: &Grid, size: usize) -> Result<Kernel2D> {
    check_pair(c, s, 2 * REGRESSION_BORDER.max(size / 2) + 2)?;
    let design = Design::new(c.shape(), size, REGRESSION_BORDER)?;
    let normal = design.grams(c, s, 1, &|_| 0).remove(0);
    let n = normal.count as f64;
    let sol = nnls_gram(&(&normal.gram / n), &(&normal.rhs / n), KKT_TOLERANCE)?;
    if sol.kkt_residual > KKT_TOLERANCE {
        return Err(Error::NonConvergence {
            restarts: 1,
            best_residual: sol.kkt_residual,
            best_params: sol.x,
        });
    }
    let h = DVector::from_vec(sol.x);
    Kernel2D::new(kernel_grid(&h, size), KernelKind::Blur)
}

pub const SIGMA_FLOOR: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Least-squares amplitude applied to the unit-sum kernel.
    pub gain: f64,
    pub residual: f64,
}

impl GaussianFit {
    pub fn kernel(&self, size: usize) -> Kernel2D {
        Kernel2D::new(
            gaussian_kernel_2d(self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, size),
            KernelKind::Blur,
        )
        .expect("sampled Gaussian is non-negative")
    }
}

/// Separable Gaussian sampled on a `size × size` grid, normalized to unit sum.
pub fn gaussian_kernel_2d(mu_x: f64, mu_y: f64, sigma_x: f64, sigma_y: f64, size: usize) -> Grid {
    let h = (size / 2) as f64;
    let g = Grid::from_fn(size, size, |i, j| {
        let (x, y) = (j as f64 - h, i as f64 - h);
        (-(x - mu_x).powi(2) / (2.0 * sigma_x * sigma_x)
            - (y - mu_y).powi(2) / (2.0 * sigma_y * sigma_y))
            .exp()
    });
    let total = g.sum();
    g.scale(1.0 / total)
}

/// Quadratic objective `gain² gᵀAg − 2 gain bᵀg + c` with the gain profiled out.
struct ProfiledObjective<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    c: f64,
    size: usize,
}

impl ProfiledObjective<'_> {
    fn params(theta: &[f64]) -> (f64, f64, f64, f64) {
        (
            theta[0],
            theta[1],
            theta[2].max(SIGMA_FLOOR),
            theta[3].max(SIGMA_FLOOR),
        )
    }

    fn eval(&self, theta: &[f64]) -> (f64, f64) {
        let (mx, my, sx, sy) = Self::params(theta);
        let g = gaussian_kernel_2d(mx, my, sx, sy, self.size);
        let g = DVector::from_column_slice(g.data());
        let quad = (g.transpose() * self.a * &g)[(0, 0)];
        let lin = self.b.dot(&g);
        if quad <= 0.0 {
            return (self.c, 0.0);
        }
        let gain = lin / quad;
        (self.c - lin * lin / quad, gain)
    }
}

/// Nelder–Mead on a small dimension, returning `(best point, best value, converged)`.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    tol: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, bool) {
    let d = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=d)
        .map(|i| {
            let mut p = start.to_vec();
            if i > 0 {
                p[i - 1] += step;
            }
            let v = f(&p);
            (p, v)
        })
        .collect();
    let mut evals = d + 1;
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[d].1);
        let spread = simplex
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if (hi - lo).abs() <= tol * (lo.abs() + 1e-300) && spread < 1e-7 {
            return (simplex[0].0.clone(), lo, true);
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(p, _)| p[k]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].0.clone();
        let reflected = combine(&centroid, &worst, -1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst, -2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[d] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let t = if fr < simplex[d].1 { -0.5 } else { 0.5 };
            let contracted = combine(&centroid, &worst, t);
            let fc = f(&contracted);
            evals += 1;
            if fc < fr.min(simplex[d].1) {
                simplex[d] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let p = combine(&best, &item.0, 0.5);
                    let v = f(&p);
                    *item = (p, v);
                }
                evals += d;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0.clone(), simplex[0].1, false)
}

fn fit_gaussian_quadratic(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: f64,
    size: usize,
    restarts: usize,
    seed: u64,
) -> Result<GaussianFit> {
    if restarts == 0 {
        return Err(invalid("restarts", "need at least one"));
    }
    let obj = ProfiledObjective { a, b, c, size };
    let f = |t: &[f64]| obj.eval(t).0;
    let mut rng = rng::stream(seed, &[rng::tag("gauss-fit")]);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for _ in 0..restarts {
        let start = [
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            1.0,
            1.0,
        ];
        // polish from the first simplex result to shake off premature collapse
        let (p1, _, _) = nelder_mead(&f, &start, 0.3, 1e-12, 4000);
        let (p, v, ok) = nelder_mead(&f, &p1, 0.05, 1e-12, 4000);
        any_converged |= ok;
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((p, v));
        }
    }
    let (p, v) = best.expect("restarts >= 1");
    if !any_converged {
        return Err(Error::NonConvergence {
            restarts,
            best_residual: v,
            best_params: p,
        });
    }
    let (mu_x, mu_y, sigma_x, sigma_y) = ProfiledObjective::params(&p);
    let gain = obj.eval(&p).1;
    Ok(GaussianFit {
        mu_x,
        mu_y,
        sigma_x,
        sigma_y,
        gain,
        residual: v.max(0.0),
    })
}

/// Parametric blur fit `S ≈ gain · (G(µ, σ) ∗ C)` by multistart Nelder–Mead.
pub fn fit_blur_gaussian(
    c: &Grid,
    s: &Grid,
    size: usize,
    restarts: usize,
    seed: u64,
) -> Result<GaussianFit> {
    check_pair(c, s, 2 * REGRESSION_BORDER.max(size / 2) + 2)?;
    let design = Design::new(c.shape(), size, REGRESSION_BORDER)?;
    let normal = design.grams(c, s, 1, &|_| 0).remove(0);
    let n = normal.count as f64;
    fit_gaussian_quadratic(
        &(&normal.gram / n),
        &(&normal.rhs / n),
        normal.yy / n,
        size,
        restarts,
        seed,
    )
}

/// Fits a sampled Gaussian directly to kernel coefficients.
pub fn gaussian_from_kernel(kernel: &Kernel2D, restarts: usize, seed: u64) -> Result<GaussianFit> {
    let size = kernel.size();
    let p = size * size;
    let b = DVector::from_column_slice(kernel.coefficients.data());
    let c = b.norm_squared();
    fit_gaussian_quadratic(&DMatrix::identity(p, p), &b, c, size, restarts, seed)
}
