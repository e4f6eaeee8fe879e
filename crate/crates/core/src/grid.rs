//! Dense row-major 2-D grids of `f64` and the filtering primitives shared by
//! every stage of the pipeline.
//!
//! Coordinates follow image convention: `x` runs along columns, `y` along rows.
//! All padding is half-sample symmetric ("reflect" in the scipy sense):
//! `... c b a | a b c ... x y z | z y x ...`, repeated periodically so that
//! kernels wider than the grid are still well defined.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(
                "data",
                format!(
                    "expected {} values for {rows}x{cols}, got {}",
                    rows * cols,
                    data.len()
                ),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    /// Value at `(r, c)` with symmetric reflection outside the grid.
    #[inline]
    pub fn get_reflect(&self, r: isize, c: isize) -> f64 {
        self.get(reflect_index(r, self.rows), reflect_index(c, self.cols))
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn ensure_same_shape(&self, other: &Grid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Grid> {
        self.ensure_same_shape(other)?;
        Ok(Grid {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Grid) -> Result<Grid> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Grid) -> Result<Grid> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, k: f64) -> Grid {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return f64::NAN;
        }
        self.sum() / self.data.len() as f64
    }

    /// Population (1/n) variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Grid) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean_centered(&self) -> Grid {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<Grid> {
        if r0 + rows > self.rows || c0 + cols > self.cols {
            return Err(invalid(
                "crop",
                format!(
                    "window {rows}x{cols} at ({r0},{c0}) exceeds {}x{}",
                    self.rows, self.cols
                ),
            ));
        }
        Ok(Grid::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c)))
    }

    /// Centered crop keeping `fraction` of each dimension (rounded to nearest pixel).
    pub fn center_crop_fraction(&self, fraction: f64) -> Result<Grid> {
        let rows = (self.rows as f64 * fraction).round() as usize;
        let cols = (self.cols as f64 * fraction).round() as usize;
        self.crop((self.rows - rows) / 2, (self.cols - cols) / 2, rows, cols)
    }

    pub fn transpose(&self) -> Grid {
        Grid::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Rotates the grid by `k` quarter turns.
    ///
    /// One quarter turn maps the point `(x, y)` to `(-y, x)`, the same rotation that
    /// [`crate::optics::Orientation::rotate_vector`] applies to vectors, so rotated
    /// normal fields stay consistent with rotated pixel positions.
    pub fn rotate_quarter_turns(&self, k: u8) -> Grid {
        let (rr, cc) = (self.rows, self.cols);
        match k % 4 {
            0 => self.clone(),
            1 => Grid::from_fn(cc, rr, |i, j| self.get(rr - 1 - j, i)),
            2 => Grid::from_fn(rr, cc, |i, j| self.get(rr - 1 - i, cc - 1 - j)),
            _ => Grid::from_fn(cc, rr, |i, j| self.get(j, cc - 1 - i)),
        }
    }

    /// Averages non-overlapping `factor x factor` blocks; trailing partial blocks are dropped.
    pub fn block_average(&self, factor: usize) -> Result<Grid> {
        if factor == 0 {
            return Err(invalid("factor", "must be positive"));
        }
        let rows = self.rows / factor;
        let cols = self.cols / factor;
        if rows == 0 || cols == 0 {
            return Err(invalid(
                "factor",
                format!("{factor} exceeds grid {:?}", self.shape()),
            ));
        }
        let norm = 1.0 / (factor * factor) as f64;
        Ok(Grid::from_fn(rows, cols, |r, c| {
            let mut acc = 0.0;
            for i in 0..factor {
                let row = self.row(r * factor + i);
                acc += row[c * factor..(c + 1) * factor].iter().sum::<f64>();
            }
            acc * norm
        }))
    }

    /// Splits the grid into `n x n` equal tiles in row-major order.
    pub fn tiles(&self, n: usize) -> Result<Vec<Grid>> {
        if n == 0 || self.rows % n != 0 || self.cols % n != 0 {
            return Err(invalid(
                "tiles",
                format!("{:?} is not divisible into {n}x{n} tiles", self.shape()),
            ));
        }
        let (h, w) = (self.rows / n, self.cols / n);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.crop(i * h, j * w, h, w)?);
            }
        }
        Ok(out)
    }
}

/// Maps any integer index into `0..n` by periodic half-sample symmetric reflection.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Sampled Gaussian truncated at 4 sigma and normalized to unit sum.
/// `sigma == 0` yields the unit impulse.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn convolve_rows(src: &Grid, kernel: &[f64]) -> Grid {
    if kernel.len() == 1 {
        return src.scale(kernel[0]);
    }
    let radius = (kernel.len() / 2) as isize;
    let cols = src.cols;
    let mut out = Grid::zeros(src.rows, cols);
    out.data
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(r, dst)| {
            let row = src.row(r);
            for (c, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, &w) in kernel.iter().enumerate() {
                    let idx = reflect_index(c as isize + radius - t as isize, cols);
                    acc += w * row[idx];
                }
                *d = acc;
            }
        });
    out
}

fn convolve_cols(src: &Grid, kernel: &[f64]) -> Grid {
    if kernel.len() == 1 {
        return src.scale(kernel[0]);
    }
    let radius = (kernel.len() / 2) as isize;
    let (rows, cols) = src.shape();
    let mut out = Grid::zeros(rows, cols);
    out.data
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(r, dst)| {
            for (t, &w) in kernel.iter().enumerate() {
                let sr = reflect_index(r as isize + radius - t as isize, rows);
                let row = src.row(sr);
                for (d, &v) in dst.iter_mut().zip(row) {
                    *d += w * v;
                }
            }
        });
    out
}

/// Separable 1-D convolution along x (columns) then y (rows), reflect padded.
pub fn separable_convolve(src: &Grid, kernel_x: &[f64], kernel_y: &[f64]) -> Grid {
    convolve_cols(&convolve_rows(src, kernel_x), kernel_y)
}

/// Anisotropic Gaussian blur with standard deviations in pixels along x and y.
pub fn gaussian_blur(src: &Grid, sigma_x: f64, sigma_y: f64) -> Grid {
    separable_convolve(
        src,
        &gaussian_kernel_1d(sigma_x),
        &gaussian_kernel_1d(sigma_y),
    )
}

/// Full 2-D convolution with an odd-sized kernel; output keeps the input shape.
///
/// `out(r, c) = sum_{i,j} k(i, j) * src(r - (i - h), c - (j - h))` with `h` the
/// kernel half-width, so a kernel with a single off-center tap shifts the input
/// toward that tap.
pub fn convolve_same(src: &Grid, kernel: &Grid) -> Result<Grid> {
    let (kr, kc) = kernel.shape();
    if kr % 2 == 0 || kc % 2 == 0 {
        return Err(invalid(
            "kernel",
            format!("must be odd-sized, got {kr}x{kc}"),
        ));
    }
    let (hr, hc) = ((kr / 2) as isize, (kc / 2) as isize);
    let taps: Vec<(isize, isize, f64)> = (0..kr)
        .flat_map(|i| (0..kc).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let w = kernel.get(i, j);
            (w != 0.0).then_some((i as isize - hr, j as isize - hc, w))
        })
        .collect();
    let (rows, cols) = src.shape();
    let mut out = Grid::zeros(rows, cols);
    out.data
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(r, dst)| {
            for &(di, dj, w) in &taps {
                let sr = reflect_index(r as isize - di, rows);
                let row = src.row(sr);
                for (c, d) in dst.iter_mut().enumerate() {
                    *d += w * row[reflect_index(c as isize - dj, cols)];
                }
            }
        });
    Ok(out)
}
