//! Seeded procedural images for tests, demos, and the acceptance suite.

use crate::image::ImageTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A painterly RGB test image: a smooth two-color gradient, a few oriented
/// stripe textures, and mild per-pixel grain. Values stay inside `[0, 255]`.
pub fn textured(seed: u64, height: usize, width: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [[f64; 3]; 2] = [
        [rng.random_range(40.0..215.0), rng.random_range(40.0..215.0), rng.random_range(40.0..215.0)],
        [rng.random_range(40.0..215.0), rng.random_range(40.0..215.0), rng.random_range(40.0..215.0)],
    ];
    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let waves: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let freq: f64 = rng.random_range(0.15..0.9);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let amp: f64 = rng.random_range(6.0..18.0);
            let tint = [
                rng.random_range(0.5..1.0),
                rng.random_range(0.5..1.0),
                rng.random_range(0.5..1.0),
            ];
            (theta, freq, phase, amp, tint)
        })
        .collect();
    let grain: Vec<f64> = (0..3 * height * width)
        .map(|_| rng.random_range(-4.0..4.0))
        .collect();

    let diag = ((height * height + width * width) as f64).sqrt().max(1.0);
    ImageTensor::from_fn(3, height, width, |c, y, x| {
        let (yf, xf) = (y as f64, x as f64);
        let t = ((xf * angle.cos() + yf * angle.sin()) / diag).clamp(-1.0, 1.0) * 0.5 + 0.5;
        let mut v = base[0][c] * (1.0 - t) + base[1][c] * t;
        for (theta, freq, phase, amp, tint) in &waves {
            v += amp * tint[c] * (freq * (xf * theta.cos() + yf * theta.sin()) + phase).sin();
        }
        v += grain[(c * height + y) * width + x];
        v.clamp(0.0, 255.0)
    })
}

/// Uniform random pixels in `[0, 255]`.
pub fn noise(seed: u64, channels: usize, height: usize, width: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageTensor::from_fn(channels, height, width, |_, _, _| rng.random_range(0.0..=255.0))
}

/// Alternating 0/255 cells, 255 where `(y + x)` is even.
pub fn checkerboard(channels: usize, height: usize, width: usize) -> ImageTensor {
    ImageTensor::from_fn(channels, height, width, |_, y, x| {
        if (y + x) % 2 == 0 {
            255.0
        } else {
            0.0
        }
    })
}
