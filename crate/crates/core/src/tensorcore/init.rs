//! Seeded parameter initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Real, Tensor};

/// Reproducible generator for initialization. ChaCha is counter-based, so
/// streams are identical across platforms.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `[-bound, bound]` with `bound = sqrt(gain / fan_in)`.
/// `gain = 6` is He-uniform (ReLU layers), `gain = 3` is LeCun-uniform.
pub fn fan_in_uniform<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, gain: f64) -> Tensor<T> {
    let bound = (gain / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(-bound..=bound))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}
