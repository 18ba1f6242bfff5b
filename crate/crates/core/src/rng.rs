//! Reproducible standard-normal variates.
//!
//! The stream is ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`) and
//! normals come from the polar-free Box–Muller transform:
//!
//! ```text
//! u1 = ((next_u64 >> 11) + 1) * 2^-53      in (0, 1]
//! u2 =  (next_u64 >> 11)      * 2^-53      in [0, 1)
//! z0 = sqrt(-2 ln u1) * cos(2π u2)
//! z1 = sqrt(-2 ln u1) * sin(2π u2)
//! ```
//!
//! Variates are emitted in the order `z0, z1, z0', z1', ...`. Any
//! implementation of ChaCha20 plus this transform reproduces the stream.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Bumped whenever the stream or the draw order changes.
pub const GENERATOR_VERSION: &str = "chacha20-boxmuller-v1";

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn open_unit(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }

    fn half_open_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.open_unit();
        let u2 = self.half_open_unit();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }

    pub fn normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.next_normal()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = NormalStream::new(42).normals(101);
        let b = NormalStream::new(42).normals(101);
        assert_eq!(a, b);
        assert_ne!(a, NormalStream::new(43).normals(101));
    }

    #[test]
    fn moments_look_standard() {
        let xs = NormalStream::new(1).normals(200_000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
        assert!(xs.iter().all(|x| x.is_finite()));
    }
}
