//! Seeded, reproducible sampling.
//!
//! Spheres and groups are sampled quasi-uniformly by normalising Gaussian
//! ambient vectors; Euclidean factors are sampled uniformly from a box.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SampleRng = ChaCha8Rng;

/// Half-width of the default Euclidean sampling box `[-5, 5]^n`.
pub const DEFAULT_BOX: f64 = 5.0;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`; used to split work
/// across tasks without changing results when the split changes.
pub fn stream(seed: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform point on the sphere of radius `radius` in `R^n`.
pub fn on_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, n);
        let norm = g.norm();
        if norm > 1e-8 {
            return g * (radius / norm);
        }
    }
}

pub fn in_box<R: Rng + ?Sized>(rng: &mut R, n: usize, half_width: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-half_width..half_width))
}
