//! Reproducible random sampling for property checks.
//!
//! Every trial draws from its own ChaCha stream selected by the trial index, so
//! the outcome of a run depends only on `(seed, trial)` and not on how trials
//! are scheduled across worker threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::report::nan_max;

/// Magnitudes used to spread samples across the kinks of piecewise maps.
pub const SAMPLE_SCALES: [f64; 3] = [0.1, 1.0, 10.0];

/// Default seed used when callers do not supply one.
pub const DEFAULT_SEED: u64 = 0x5eed_f4a3_e5b1_2019;

/// Generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `trials` independent evaluations in parallel and returns the maximum.
///
/// A NaN from any trial propagates to the result.
pub fn max_over_trials<F>(seed: u64, trials: usize, f: F) -> f64
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|i| f(&mut trial_rng(seed, i)))
        .reduce(|| f64::NEG_INFINITY, nan_max)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// Gaussian vector multiplied by a scale picked uniformly from [`SAMPLE_SCALES`].
pub fn scaled_gaussian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    let scale = SAMPLE_SCALES[rng.random_range(0..SAMPLE_SCALES.len())];
    gaussian_vector(rng, dim) * scale
}

/// Uniformly distributed point on the unit sphere of `R^dim`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, dim);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`).
pub fn orthonormal_columns<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    assert!(rows >= cols);
    gaussian_matrix(rng, rows, cols).qr().q()
}

/// Random `n x d` matrix with singular values log-spaced in `[1 / cond, 1]`.
///
/// The largest singular value is exactly one and the condition number is `cond`.
pub fn conditioned_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, cond: f64) -> DMatrix<f64> {
    assert!(n >= d && d >= 1 && cond >= 1.0);
    let u = orthonormal_columns(rng, n, d);
    let v = orthonormal_columns(rng, d, d);
    let sigma = DVector::from_fn(d, |i, _| {
        if d == 1 {
            1.0
        } else {
            cond.powf(-(i as f64) / (d - 1) as f64)
        }
    });
    u * DMatrix::from_diagonal(&sigma) * v.transpose()
}

/// Random injective operator with `d <= max_cols`, `d <= n <= max_rows` and
/// condition number drawn log-uniformly from `[1, max_cond]`.
pub fn random_frame_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    max_rows: usize,
    max_cols: usize,
    max_cond: f64,
) -> DMatrix<f64> {
    let d = rng.random_range(1..=max_cols);
    let n = rng.random_range(d..=max_rows.max(d));
    let cond = max_cond.powf(rng.random::<f64>());
    conditioned_matrix(rng, n, d, cond)
}
