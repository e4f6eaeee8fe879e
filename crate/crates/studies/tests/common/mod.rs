use paperprint_core::{rng, Grid};
use rand_distr::{Distribution, StandardNormal};

pub fn white(rows: usize, cols: usize, seed: u64) -> Grid {
    let mut r = rng::stream(seed, &[rng::tag("test-white")]);
    Grid::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}

/// `x + noise · white` with an independent noise draw.
pub fn noisy_copy(x: &Grid, noise: f64, seed: u64) -> Grid {
    let (rows, cols) = x.shape();
    x.add(&white(rows, cols, seed).scale(noise)).unwrap()
}
