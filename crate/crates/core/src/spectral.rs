//! 2-D FFT helpers over [`Grid`]s.

pub use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::Grid;

/// Row-major complex buffer with its shape.
pub struct Spectrum {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

fn transform(buf: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (
            planner.plan_fft_inverse(cols),
            planner.plan_fft_inverse(rows),
        )
    } else {
        (
            planner.plan_fft_forward(cols),
            planner.plan_fft_forward(rows),
        )
    };
    row_fft.process(buf);
    let mut column = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = buf[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            buf[r * cols + c] = column[r];
        }
    }
}

pub fn fft2(g: &Grid) -> Spectrum {
    let (rows, cols) = g.shape();
    let mut data: Vec<Complex64> = g.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut data, rows, cols, false);
    Spectrum { rows, cols, data }
}

/// Inverse transform, keeping the real part.
pub fn ifft2_real(mut s: Spectrum) -> Grid {
    transform(&mut s.data, s.rows, s.cols, true);
    let n = (s.rows * s.cols) as f64;
    Grid::new(s.rows, s.cols, s.data.iter().map(|z| z.re / n).collect()).expect("shape preserved")
}

/// Half-sample symmetric extension to `2R × 2C`.
pub fn symmetric_extension(g: &Grid) -> Grid {
    let (rows, cols) = g.shape();
    Grid::from_fn(2 * rows, 2 * cols, |r, c| {
        let rr = if r < rows { r } else { 2 * rows - 1 - r };
        let cc = if c < cols { c } else { 2 * cols - 1 - c };
        g.get(rr, cc)
    })
}

/// Signed frequency index of bin `k` in an `n`-point transform.
pub fn signed_bin(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = Grid::from_fn(5, 6, |r, c| (r * 7 + c * c) as f64 - 3.0);
        let back = ifft2_real(fft2(&g));
        assert!(back.max_abs_diff(&g).unwrap() < 1e-12);
    }

    #[test]
    fn extension_mirrors() {
        let g = Grid::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let e = symmetric_extension(&g);
        assert_eq!(e.shape(), (4, 6));
        assert_eq!(e.row(0), &[0.0, 1.0, 2.0, 2.0, 1.0, 0.0]);
        assert_eq!(e.row(3), e.row(0));
    }
}
