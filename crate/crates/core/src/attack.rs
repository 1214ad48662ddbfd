//! Locally adaptive adversarial color attack.
//!
//! Signed-gradient ascent on the color-disruptive loss, projected every step
//! onto the `ℓ∞` ball of radius `epsilon` around the clean image and onto the
//! high-frequency zone of the clean image. The zone is computed once.

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::frequency::{apply_mask, highfreq_mask, HighFreqMask};
use crate::image::{clamp_pixels, ImageTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upper end of the uniform initial noise.
pub const INIT_NOISE_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    /// Gaussian bandwidth of the frequency separator.
    pub k: usize,
    /// Step size, in 8-bit intensity units.
    pub alpha: f64,
    /// `ℓ∞` radius, in 8-bit intensity units.
    pub epsilon: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            k: 4,
            alpha: 8.0,
            epsilon: 80.0,
            iterations: 100,
            seed: 0,
        }
    }
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::arg("k must be >= 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::arg(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::arg(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.iterations < 1 {
            return Err(Error::arg("iterations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub protected: ImageTensor,
    /// `protected − x`.
    pub delta: ImageTensor,
    /// Loss before each of the `T` updates, then the loss of the final image.
    pub loss_trace: Vec<f64>,
    pub mask: HighFreqMask,
}

/// Elementwise sign with `sign(0) = 0`.
pub fn sign(g: &ImageTensor) -> ImageTensor {
    g.map(|v| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Runs the attack on a clean style image `x`.
pub fn laaca(x: &ImageTensor, model: &Encoder, params: &AttackParams) -> Result<AttackResult> {
    params.validate()?;
    if x.channels() != 3 {
        return Err(Error::arg(format!("expected an RGB image, got {} channels", x.channels())));
    }
    let reference = model.stats(x)?;
    let mask = highfreq_mask(x, params.k)?;
    let mut current = masked_start(x, &mask, params.seed)?;

    let mut loss_trace = Vec::with_capacity(params.iterations + 1);
    for _ in 0..params.iterations {
        let tape = model.loss_and_grad(&current, &reference)?;
        loss_trace.push(tape.loss_value);
        let stepped = current.zip_map(&sign(&tape.grad), |v, s| v + params.alpha * s)?;
        let delta = clamp_pixels(&stepped.zip_map(x, |a, b| a - b)?, -params.epsilon, params.epsilon)?;
        let delta = apply_mask(&delta, &mask)?;
        current = clamp_pixels(&x.zip_map(&delta, |a, b| a + b)?, 0.0, 255.0)?;
    }
    loss_trace.push(crate::encoder::loss_from_stats(&model.stats(&current)?, &reference)?);

    let delta = current.zip_map(x, |a, b| a - b)?;
    Ok(AttackResult {
        protected: current,
        delta,
        loss_trace,
        mask,
    })
}

/// The masked random starting point of the attack, `clamp(x + mask·δ₀)`.
pub fn initial_point(x: &ImageTensor, params: &AttackParams) -> Result<ImageTensor> {
    masked_start(x, &highfreq_mask(x, params.k)?, params.seed)
}

fn masked_start(x: &ImageTensor, mask: &HighFreqMask, seed: u64) -> Result<ImageTensor> {
    let (c, h, w) = x.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = ImageTensor::from_fn(c, h, w, |_, _, _| rng.random_range(0.0..=INIT_NOISE_MAX));
    clamp_pixels(&x.zip_map(&apply_mask(&noise, mask)?, |a, b| a + b)?, 0.0, 255.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationReport {
    pub l2: f64,
    pub linf: f64,
}

/// Euclidean and max-abs norms of `x_star − x`.
pub fn perturbation_report(x: &ImageTensor, x_star: &ImageTensor) -> Result<PerturbationReport> {
    x.check_same_shape(x_star, "perturbation_report")?;
    let mut sq = 0.0;
    let mut linf: f64 = 0.0;
    for (a, b) in x.data().iter().zip(x_star.data()) {
        let d = b - a;
        sq += d * d;
        linf = linf.max(d.abs());
    }
    Ok(PerturbationReport { l2: sq.sqrt(), linf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Architecture;
    use crate::synth;

    fn small_params() -> AttackParams {
        AttackParams {
            iterations: 6,
            ..AttackParams::default()
        }
    }

    #[test]
    fn defaults() {
        let p = AttackParams::default();
        assert_eq!((p.k, p.alpha, p.epsilon, p.iterations), (4, 8.0, 80.0, 100));
    }

    #[test]
    fn sign_examples() {
        let g = ImageTensor::new(1, 1, 3, vec![-3.2, 0.0, 5.0]).unwrap();
        assert_eq!(sign(&g).data(), &[-1.0, 0.0, 1.0]);
        assert_eq!(sign(&ImageTensor::zeros(2, 2, 2)), ImageTensor::zeros(2, 2, 2));
        let r = synth::noise(3, 3, 4, 4).map(|v| v - 127.5);
        let s = sign(&r);
        for (a, b) in r.data().iter().zip(s.data()) {
            let expect = if *a > 0.0 { 1.0 } else if *a < 0.0 { -1.0 } else { 0.0 };
            assert_eq!(*b, expect);
        }
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let model = Encoder::init_weights(&Architecture::desk(), 0);
        let x = synth::textured(1, 16, 16);
        let params = AttackParams {
            epsilon: 0.0,
            ..small_params()
        };
        let out = laaca(&x, &model, &params).unwrap();
        assert_eq!(out.protected, x);
        assert!(out.delta.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_image_is_untouched() {
        let model = Encoder::init_weights(&Architecture::desk(), 0);
        let x = ImageTensor::filled(3, 16, 16, 90.0);
        let out = laaca(&x, &model, &small_params()).unwrap();
        assert_eq!(out.mask.count(), 0);
        assert_eq!(out.protected, x);
    }

    #[test]
    fn constraints_hold() {
        let model = Encoder::init_weights(&Architecture::desk(), 0);
        let x = synth::textured(4, 24, 24);
        let params = AttackParams {
            epsilon: 10.0,
            alpha: 4.0,
            ..small_params()
        };
        let out = laaca(&x, &model, &params).unwrap();
        assert_eq!(out.loss_trace.len(), params.iterations + 1);
        assert!(out.delta.max_abs() <= params.epsilon + 1e-9);
        for (i, &bit) in out.mask.bits().iter().enumerate() {
            if !bit {
                assert_eq!(out.delta.data()[i], 0.0);
            }
        }
        assert!(out.protected.data().iter().all(|v| (0.0..=255.0).contains(v)));
        let recon = clamp_pixels(&x.zip_map(&out.delta, |a, b| a + b).unwrap(), 0.0, 255.0).unwrap();
        assert_eq!(recon, out.protected);
    }

    #[test]
    fn loss_trace_matches_reevaluation() {
        let model = Encoder::init_weights(&Architecture::desk(), 0);
        let x = synth::textured(6, 16, 16);
        let out = laaca(&x, &model, &small_params()).unwrap();
        let last = *out.loss_trace.last().unwrap();
        let again = model.loss(&out.protected, &x).unwrap();
        assert!((last - again).abs() <= 1e-6 * again.abs());
        let init = initial_point(&x, &small_params()).unwrap();
        let first = model.loss(&init, &x).unwrap();
        assert!((out.loss_trace[0] - first).abs() <= 1e-6 * first.abs().max(1e-300));
    }

    #[test]
    fn rejects_bad_params_and_tiny_images() {
        let model = Encoder::init_weights(&Architecture::desk(), 0);
        let x = synth::textured(1, 16, 16);
        let neg = AttackParams {
            epsilon: -1.0,
            ..small_params()
        };
        assert!(matches!(laaca(&x, &model, &neg), Err(Error::Argument(_))));
        assert!(laaca(&synth::textured(1, 4, 4), &model, &small_params()).is_err());
    }

    #[test]
    fn perturbation_norms() {
        let x = synth::textured(2, 8, 8);
        assert_eq!(perturbation_report(&x, &x).unwrap(), PerturbationReport { l2: 0.0, linf: 0.0 });
        let mut y = x.clone();
        y.set(1, 3, 3, x.get(1, 3, 3) + 80.0);
        let r = perturbation_report(&x, &y).unwrap();
        assert!((r.l2 - 80.0).abs() < 1e-9 && (r.linf - 80.0).abs() < 1e-9);
        let z = synth::noise(9, 3, 8, 8);
        let r = perturbation_report(&x, &z).unwrap();
        let mut sq = 0.0;
        let mut mx: f64 = 0.0;
        for c in 0..3 {
            for i in 0..8 {
                for j in 0..8 {
                    let d = z.get(c, i, j) - x.get(c, i, j);
                    sq += d * d;
                    mx = mx.max(d.abs());
                }
            }
        }
        assert!((r.l2 - sq.sqrt()).abs() <= 1e-9 * sq.sqrt());
        assert!((r.linf - mx).abs() <= 1e-9 * mx);
        assert!(perturbation_report(&x, &synth::noise(1, 3, 8, 9)).is_err());
    }
}
