//! Paper-surface photometry, estimation and matching.

pub mod acquisition;
pub mod error;
pub mod grid;
pub mod matching;
pub mod normmap;
pub mod optics;
pub mod reconstruct;
pub mod registration;
pub mod rng;
pub mod spectral;
pub mod synth;

pub use error::{invalid, Error, Result};
pub use grid::Grid;
