use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EmbeddingBackend, EncoderError};

/// Weight-free stand-in for a pretrained network:
/// `ReLU(P · pixels)` with `P` a seeded Gaussian matrix (entries
/// `N(0, 1/d)`) and pixels scaled to `[0, 1]` in row-major RGB order.
#[derive(Debug, Clone)]
pub struct RandomProjectionBackend {
    id: String,
    tau: usize,
    seed: u64,
    width: u32,
    height: u32,
    projection: Vec<f32>,
}

impl RandomProjectionBackend {
    pub const INPUT_WIDTH: u32 = 64;
    pub const INPUT_HEIGHT: u32 = 24;

    pub fn new(tau: usize, seed: u64) -> Self {
        Self::with_input(tau, seed, Self::INPUT_WIDTH, Self::INPUT_HEIGHT)
    }

    pub fn with_input(tau: usize, seed: u64, width: u32, height: u32) -> Self {
        assert!(tau >= 1, "tau must be positive");
        let d = (width * height * 3) as usize;
        let std = (1.0 / d as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..tau * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * std) as f32
            })
            .collect();
        Self {
            id: format!("fallback-{tau}-{seed}"),
            tau,
            seed,
            width,
            height,
            projection,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        (self.width * self.height * 3) as usize
    }

    /// Row-major `tau × input_dim` projection matrix.
    pub fn projection(&self) -> &[f32] {
        &self.projection
    }

    /// `ReLU(P · x)` on an already flattened input.
    pub fn project(&self, x: &[f32]) -> Vec<f32> {
        assert_eq!(x.len(), self.input_dim());
        self.projection
            .chunks_exact(x.len())
            .map(|row| {
                let dot: f32 = row.iter().zip(x).map(|(p, v)| p * v).sum();
                dot.max(0.0)
            })
            .collect()
    }
}

impl EmbeddingBackend for RandomProjectionBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn tau(&self) -> usize {
        self.tau
    }

    fn input_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn embed(&self, image: &RgbImage) -> Result<Vec<f32>, EncoderError> {
        if image.dimensions() != (self.width, self.height) {
            return Err(EncoderError::ShapeMismatch {
                expected: self.input_dim(),
                found: (image.width() * image.height() * 3) as usize,
            });
        }
        let x: Vec<f32> = image.as_raw().iter().map(|&p| p as f32 / 255.0).collect();
        Ok(self.project(&x))
    }
}
