//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every image crosses the boundary as interleaved RGBA bytes plus its width
//! and height, which is what `CanvasRenderingContext2D.getImageData` hands out.
//! The `*_impl` functions carry the logic and are usable natively; the
//! exported wrappers only translate errors.

use laaca_core::frequency::{highfreq_mask, lowpass};
use laaca_core::metrics::{acdm, comparison_distances, normalized_emd, ssimc, SSIM_WINDOW};
use laaca_core::{laaca, Architecture, AttackParams, Encoder, ImageTensor};
use wasm_bindgen::prelude::*;

fn js_err(e: laaca_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct FrequencySplit {
    low: Vec<u8>,
    residual: Vec<u8>,
    mask: Vec<u8>,
    density: f64,
}

#[wasm_bindgen]
impl FrequencySplit {
    /// Low-pass image.
    pub fn low(&self) -> Vec<u8> {
        self.low.clone()
    }

    /// Residual shifted by +128 so that zero is mid-gray.
    pub fn residual(&self) -> Vec<u8> {
        self.residual.clone()
    }

    /// Where the attack is allowed to write, per color channel.
    pub fn mask(&self) -> Vec<u8> {
        self.mask.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn density(&self) -> f64 {
        self.density
    }
}

pub fn split_frequency_impl(rgba: &[u8], width: usize, height: usize, k: usize) -> laaca_core::Result<FrequencySplit> {
    let x = ImageTensor::from_rgba8(width, height, rgba)?;
    let low = lowpass(&x, k)?;
    let residual = x.zip_map(&low, |a, b| a - b + 128.0)?;
    let mask = highfreq_mask(&x, k)?;
    Ok(FrequencySplit {
        low: low.to_rgba8(),
        residual: residual.to_rgba8(),
        mask: mask.to_image().to_rgba8(),
        density: mask.density(),
    })
}

#[wasm_bindgen]
pub fn split_frequency(rgba: &[u8], width: usize, height: usize, k: usize) -> Result<FrequencySplit, JsError> {
    split_frequency_impl(rgba, width, height, k).map_err(js_err)
}

/// Histogram distances, returned as
/// `[normalized EMD, mean |p−q|, mean (p−q)², cosine similarity, euclidean]`.
pub fn histogram_distances_impl(p: &[f64], q: &[f64]) -> laaca_core::Result<Vec<f64>> {
    let p = normalize(p)?;
    let q = normalize(q)?;
    let d = comparison_distances(&p, &q)?;
    Ok(vec![normalized_emd(&p, &q)?, d.l1_mean, d.l2_mean, d.cosine_sim, d.euclidean])
}

fn normalize(h: &[f64]) -> laaca_core::Result<Vec<f64>> {
    let total: f64 = h.iter().sum();
    if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || total <= 0.0 {
        return Err(laaca_core::Error::Argument("histogram needs non-negative bins with positive mass".into()));
    }
    Ok(h.iter().map(|v| v / total).collect())
}

/// Raw bar heights in, distances out; the bars are normalized first.
#[wasm_bindgen]
pub fn histogram_distances(p: &[f64], q: &[f64]) -> Result<Vec<f64>, JsError> {
    histogram_distances_impl(p, q).map_err(js_err)
}

#[wasm_bindgen]
pub struct Protection {
    image: Vec<u8>,
    loss_trace: Vec<f64>,
    acdm: f64,
    ssimc: f64,
    linf: f64,
    density: f64,
}

#[wasm_bindgen]
impl Protection {
    pub fn image(&self) -> Vec<u8> {
        self.image.clone()
    }

    pub fn loss_trace(&self) -> Vec<f64> {
        self.loss_trace.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn acdm(&self) -> f64 {
        self.acdm
    }

    /// `NaN` when the image is smaller than the SSIM window.
    #[wasm_bindgen(getter)]
    pub fn ssimc(&self) -> f64 {
        self.ssimc
    }

    #[wasm_bindgen(getter)]
    pub fn linf(&self) -> f64 {
        self.linf
    }

    #[wasm_bindgen(getter)]
    pub fn density(&self) -> f64 {
        self.density
    }
}

#[allow(clippy::too_many_arguments)]
pub fn protect_impl(
    rgba: &[u8],
    width: usize,
    height: usize,
    k: usize,
    epsilon: f64,
    alpha: f64,
    iterations: usize,
    seed: u64,
) -> laaca_core::Result<Protection> {
    let x = ImageTensor::from_rgba8(width, height, rgba)?;
    // the small encoder keeps 100 iterations interactive in a browser tab
    let model = Encoder::init_weights(&Architecture::desk(), seed);
    let params = AttackParams {
        k,
        alpha,
        epsilon,
        iterations,
        seed,
    };
    let result = laaca(&x, &model, &params)?;
    let shipped = result.protected.map(|v| v.round());
    let ssimc = if width.min(height) >= SSIM_WINDOW {
        ssimc(&x, &shipped)?
    } else {
        f64::NAN
    };
    Ok(Protection {
        image: shipped.to_rgba8(),
        loss_trace: result.loss_trace,
        acdm: acdm(&x, &shipped)?.total,
        ssimc,
        linf: shipped.zip_map(&x, |a, b| a - b)?.max_abs(),
        density: result.mask.density(),
    })
}

/// Protects the image with a seeded small encoder.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn protect(
    rgba: &[u8],
    width: usize,
    height: usize,
    k: usize,
    epsilon: f64,
    alpha: f64,
    iterations: usize,
    seed: u32,
) -> Result<Protection, JsError> {
    protect_impl(rgba, width, height, k, epsilon, alpha, iterations, seed as u64).map_err(js_err)
}
