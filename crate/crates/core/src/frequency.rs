//! Gaussian frequency separation.
//!
//! The low-pass filter uses a `(4k+1)×(4k+1)` Gaussian with `σ = k`,
//! renormalized to unit sum, and reflect (mirror, edge not repeated) padding.
//! The high-frequency zone of an image is the set of `(c, y, x)` where the
//! image strictly exceeds its own low-pass.

use crate::error::{Error, Result};
use crate::image::{clamp_pixels, ImageTensor};

/// Bandwidth used by the blur defense.
pub const DEFENSE_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    k: usize,
    radius: usize,
    /// Normalized 1-D factor of length `4k+1`; the 2-D kernel is its outer product.
    taps_1d: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::arg("gaussian kernel bandwidth k must be >= 1"));
        }
        let radius = 2 * k;
        let sigma2 = (k * k) as f64;
        // exp(-(i²+j²)/2k²) factors into exp(-i²/2k²)·exp(-j²/2k²); the 1/(2πk²)
        // prefactor cancels under normalization.
        let raw: Vec<f64> = (0..=2 * radius)
            .map(|t| {
                let i = t as f64 - radius as f64;
                (-(i * i) / (2.0 * sigma2)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        Ok(Self {
            k,
            radius,
            taps_1d: raw.into_iter().map(|v| v / sum).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Side length, `4k+1`.
    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn taps_1d(&self) -> &[f64] {
        &self.taps_1d
    }

    /// Weight at offset `(i, j)` from the center, each in `[-2k, 2k]`.
    pub fn weight(&self, i: isize, j: isize) -> f64 {
        let r = self.radius as isize;
        assert!(i.abs() <= r && j.abs() <= r, "offset outside kernel support");
        self.taps_1d[(i + r) as usize] * self.taps_1d[(j + r) as usize]
    }

    /// The full kernel, row-major.
    pub fn weights_2d(&self) -> Vec<f64> {
        let n = self.size();
        let mut out = Vec::with_capacity(n * n);
        for a in &self.taps_1d {
            for b in &self.taps_1d {
                out.push(a * b);
            }
        }
        out
    }
}

pub fn gaussian_kernel(k: usize) -> Result<GaussianKernel> {
    GaussianKernel::new(k)
}

/// Mirror index into `0..n` without repeating the edge sample (`-1 → 1`).
/// Offsets larger than the signal bounce back and forth.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// One separable pass. Each output is written as `center + Σ w·(neighbor − center)`,
/// which equals `Σ w·neighbor` for a unit-sum kernel and is exact on flat regions.
fn blur_pass(src: &[f64], dst: &mut [f64], len: usize, stride: usize, count: usize, step: usize, taps: &[f64]) {
    let r = (taps.len() / 2) as isize;
    for line in 0..count {
        let base = line * step;
        for i in 0..len {
            let center = src[base + i * stride];
            let mut acc = 0.0;
            for (t, w) in taps.iter().enumerate() {
                let j = reflect_index(i as isize + t as isize - r, len);
                acc += w * (src[base + j * stride] - center);
            }
            dst[base + i * stride] = center + acc;
        }
    }
}

/// Per-channel Gaussian low-pass with reflect padding.
pub fn lowpass(img: &ImageTensor, k: usize) -> Result<ImageTensor> {
    let kernel = GaussianKernel::new(k)?;
    lowpass_with(img, &kernel)
}

pub fn lowpass_with(img: &ImageTensor, kernel: &GaussianKernel) -> Result<ImageTensor> {
    let (c, h, w) = img.shape();
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::arg("lowpass needs an image of at least 1x1"));
    }
    let taps = kernel.taps_1d();
    let mut out = img.clone();
    let mut tmp = vec![0.0; h * w];
    for ch in 0..c {
        let plane = &mut out.data_mut()[ch * h * w..(ch + 1) * h * w];
        // rows, then columns
        blur_pass(plane, &mut tmp, w, 1, h, w, taps);
        blur_pass(&tmp, plane, h, w, w, 1, taps);
    }
    Ok(out)
}

/// `img − lowpass(img, k)`.
pub fn residual(img: &ImageTensor, k: usize) -> Result<ImageTensor> {
    let low = lowpass(img, k)?;
    img.zip_map(&low, |a, b| a - b)
}

/// Boolean per `(c, y, x)`; true marks the high-frequency zone where perturbation is allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HighFreqMask {
    channels: usize,
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl HighFreqMask {
    pub fn new(channels: usize, height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != channels * height * width {
            return Err(Error::arg("mask length does not match its shape"));
        }
        Ok(Self {
            channels,
            height,
            width,
            bits,
        })
    }

    pub fn full(channels: usize, height: usize, width: usize, value: bool) -> Self {
        Self {
            channels,
            height,
            width,
            bits: vec![value; channels * height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> bool {
        self.bits[(c * self.height + y) * self.width + x]
    }

    /// Number of set bits.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of set bits, `0` for an empty shape.
    pub fn density(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.bits.len() as f64
        }
    }

    pub fn complement(&self) -> HighFreqMask {
        HighFreqMask {
            bits: self.bits.iter().map(|b| !b).collect(),
            ..*self
        }
    }

    /// 255 where set, 0 elsewhere, same channel count as the mask.
    pub fn to_image(&self) -> ImageTensor {
        ImageTensor::from_fn(self.channels, self.height, self.width, |c, y, x| {
            if self.get(c, y, x) {
                255.0
            } else {
                0.0
            }
        })
    }
}

/// Marks every element whose residual against the low-pass is strictly positive.
pub fn highfreq_mask(img: &ImageTensor, k: usize) -> Result<HighFreqMask> {
    let res = residual(img, k)?;
    let (c, h, w) = img.shape();
    HighFreqMask::new(c, h, w, res.data().iter().map(|&r| r > 0.0).collect())
}

/// Keeps `delta` where the mask is set and zeroes it elsewhere.
pub fn apply_mask(delta: &ImageTensor, mask: &HighFreqMask) -> Result<ImageTensor> {
    if delta.shape() != mask.shape() {
        return Err(Error::arg(format!(
            "apply_mask: tensor shape {:?} vs mask shape {:?}",
            delta.shape(),
            mask.shape()
        )));
    }
    let data = delta
        .data()
        .iter()
        .zip(&mask.bits)
        .map(|(&d, &m)| if m { d } else { 0.0 })
        .collect();
    let (c, h, w) = delta.shape();
    ImageTensor::new(c, h, w, data)
}

/// Blur an infringer might apply to strip the perturbation: `lowpass(img, 3)`, clamped.
pub fn gaussian_blur_defense(img: &ImageTensor) -> Result<ImageTensor> {
    blur(img, DEFENSE_K)
}

pub fn blur(img: &ImageTensor, k: usize) -> Result<ImageTensor> {
    clamp_pixels(&lowpass(img, k)?, 0.0, 255.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;

    /// Direct 2-D convolution with the full kernel, evaluated independently of the
    /// separable path.
    fn brute_lowpass(img: &ImageTensor, k: usize) -> ImageTensor {
        let r = 2 * k as isize;
        let sigma2 = (k * k) as f64;
        let mut raw = Vec::new();
        for i in -r..=r {
            for j in -r..=r {
                raw.push(((-(i * i + j * j) as f64) / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2));
            }
        }
        let total: f64 = raw.iter().sum();
        let size = (2 * r + 1) as usize;
        let (c, h, w) = img.shape();
        ImageTensor::from_fn(c, h, w, |ch, y, x| {
            let mut acc = 0.0;
            for i in -r..=r {
                for j in -r..=r {
                    let yy = reflect_index(y as isize + i, h);
                    let xx = reflect_index(x as isize + j, w);
                    acc += raw[((i + r) as usize) * size + (j + r) as usize] / total * img.get(ch, yy, xx);
                }
            }
            acc
        })
    }

    fn hf_energy(img: &ImageTensor, k: usize) -> f64 {
        let low = brute_lowpass(img, k);
        img.data().iter().zip(low.data()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[test]
    fn kernel_shape_and_extremes() {
        let g = gaussian_kernel(1).unwrap();
        assert_eq!(g.size(), 5);
        let w = g.weights_2d();
        let max = w.iter().cloned().fold(f64::MIN, f64::max);
        let min = w.iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!(g.weight(0, 0), max);
        for (i, j) in [(-2, -2), (-2, 2), (2, -2), (2, 2)] {
            assert_eq!(g.weight(i, j), min);
        }
        assert!(min > 0.0);
    }

    #[test]
    fn kernel_unit_sum_and_symmetry() {
        for k in 1..=6 {
            let g = gaussian_kernel(k).unwrap();
            let s: f64 = g.weights_2d().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "k={k} sum={s}");
            let r = g.radius() as isize;
            for i in -r..=r {
                for j in -r..=r {
                    let v = g.weight(i, j);
                    assert_eq!(v, g.weight(-i, j));
                    assert_eq!(v, g.weight(i, -j));
                    assert_eq!(v, g.weight(j, i));
                }
            }
        }
    }

    #[test]
    fn kernel_tap_ratio() {
        let g = gaussian_kernel(2).unwrap();
        let ratio = g.weight(0, 0) / g.weight(0, 1);
        assert!((ratio - (1.0f64 / 8.0).exp()).abs() < 1e-12);
        assert!((ratio - 1.1331).abs() < 1e-4);
    }

    #[test]
    fn kernel_rejects_zero() {
        assert!(matches!(gaussian_kernel(0), Err(Error::Argument(_))));
    }

    #[test]
    fn reflect_index_mirrors_without_edge_repeat() {
        let got: Vec<usize> = (-4..9).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1, 2]);
        assert_eq!(reflect_index(-7, 1), 0);
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = ImageTensor::filled(3, 9, 13, 42.0);
        for k in 1..=4 {
            let low = lowpass(&img, k).unwrap();
            assert!(low.data().iter().all(|v| (v - 42.0).abs() < 1e-9));
        }
        assert_eq!(highfreq_mask(&img, 4).unwrap().count(), 0);
    }

    #[test]
    fn separable_matches_direct_convolution() {
        let img = synth::noise(3, 3, 11, 17);
        for k in [1, 2, 4] {
            let a = lowpass(&img, k).unwrap();
            let b = brute_lowpass(&img, k);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-9, "k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn single_spot_mass_is_preserved_away_from_borders() {
        let mut img = ImageTensor::zeros(1, 21, 21);
        img.set(0, 10, 10, 200.0);
        let low = lowpass(&img, 2).unwrap();
        let mass: f64 = low.data().iter().sum();
        assert!((mass - 200.0).abs() < 1e-9, "mass={mass}");
        assert!(low.get(0, 10, 10) < 200.0);
        let mask = highfreq_mask(&img, 2).unwrap();
        assert!(mask.get(0, 10, 10));
    }

    #[test]
    fn checkerboard_mask_is_the_bright_cells() {
        let img = synth::checkerboard(3, 12, 12);
        let mask = highfreq_mask(&img, 1).unwrap();
        for c in 0..3 {
            for y in 0..12 {
                for x in 0..12 {
                    assert_eq!(mask.get(c, y, x), (y + x) % 2 == 0, "({c},{y},{x})");
                }
            }
        }
    }

    #[test]
    fn repeated_lowpass_reduces_high_frequency_energy() {
        for seed in 0..4 {
            let x = synth::textured(seed, 24, 24);
            let once = lowpass(&x, 2).unwrap();
            let twice = lowpass(&once, 2).unwrap();
            assert!(hf_energy(&twice, 2) < hf_energy(&once, 2));
        }
    }

    #[test]
    fn apply_mask_selects() {
        let delta = synth::noise(7, 3, 5, 6);
        assert_eq!(apply_mask(&delta, &HighFreqMask::full(3, 5, 6, true)).unwrap(), delta);
        assert_eq!(
            apply_mask(&delta, &HighFreqMask::full(3, 5, 6, false)).unwrap(),
            ImageTensor::zeros(3, 5, 6)
        );
        let mask = highfreq_mask(&synth::noise(8, 3, 5, 6), 1).unwrap();
        let out = apply_mask(&delta, &mask).unwrap();
        for i in 0..delta.len() {
            let expect = if mask.bits()[i] { delta.data()[i] } else { 0.0 };
            assert_eq!(out.data()[i], expect);
        }
        assert!(apply_mask(&delta, &HighFreqMask::full(3, 6, 5, true)).is_err());
    }

    #[test]
    fn blur_defense_behaviour() {
        let flat = ImageTensor::filled(3, 10, 10, 77.0);
        let out = gaussian_blur_defense(&flat).unwrap();
        assert!(out.data().iter().all(|v| (v - 77.0).abs() < 1e-9));

        let x = synth::textured(5, 32, 32);
        let once = gaussian_blur_defense(&x).unwrap();
        let twice = gaussian_blur_defense(&once).unwrap();
        assert!(hf_energy(&once, 3) < hf_energy(&x, 3));
        assert_ne!(once, twice);
    }

    proptest! {
        #[test]
        fn mask_partitions_and_matches_residual(seed in 0u64..1000, h in 1usize..14, w in 1usize..14, k in 1usize..4) {
            let img = synth::noise(seed, 3, h, w);
            let mask = highfreq_mask(&img, k).unwrap();
            prop_assert_eq!(mask.count() + mask.complement().count(), 3 * h * w);
            let res = residual(&img, k).unwrap();
            for (bit, r) in mask.bits().iter().zip(res.data()) {
                prop_assert_eq!(*bit, *r > 0.0);
            }
        }

        #[test]
        fn mirror_equivariance(seed in 0u64..1000, h in 2usize..12, w in 2usize..12) {
            let img = synth::noise(seed, 2, h, w);
            let a = lowpass(&img.mirror_horizontal(), 2).unwrap();
            let b = lowpass(&img, 2).unwrap().mirror_horizontal();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
