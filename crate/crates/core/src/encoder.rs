//! Convolutional feature extractor with reverse-mode gradients.
//!
//! The layer vocabulary is fixed: `3×3` convolution (stride 1, reflect pad 1)
//! followed by ReLU, and `2×2` max-pool with stride 2. Selected ReLU outputs
//! are exposed as taps. The color-disruptive loss compares per-channel mean
//! and standard deviation of the taps of two images, and [`Encoder::grad_input`]
//! back-propagates that loss to the pixels of the first image.

use crate::error::{Error, Result};
use crate::frequency::reflect_index;
use crate::image::ImageTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use std::path::Path;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"LAAC";
pub const WEIGHTS_VERSION: u32 = 1;
pub const DEFAULT_INPUT_SCALE: f64 = 255.0;
const INPUT_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// `3×3` conv + ReLU; `tap` exposes the post-ReLU output.
    Conv { out_channels: usize, tap: bool },
    /// `2×2` max-pool, stride 2.
    Pool,
}

/// Ordered layer list. The input always has 3 channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layers: Vec<LayerKind>,
}

impl Architecture {
    pub fn new(layers: Vec<LayerKind>) -> Result<Self> {
        let arch = Self { layers };
        if arch.tap_indices().is_empty() {
            return Err(Error::arg("architecture exposes no taps"));
        }
        if arch.layers.iter().any(|l| matches!(l, LayerKind::Conv { out_channels: 0, .. })) {
            return Err(Error::arg("conv layer with zero output channels"));
        }
        Ok(arch)
    }

    /// VGG-19 prefix through relu4_1, tapping relu1_1, relu2_1, relu3_1, relu4_1.
    pub fn vgg19_relu4_1() -> Self {
        use LayerKind::*;
        let conv = |n, tap| Conv { out_channels: n, tap };
        Self {
            layers: vec![
                conv(64, true),
                conv(64, false),
                Pool,
                conv(128, true),
                conv(128, false),
                Pool,
                conv(256, true),
                conv(256, false),
                conv(256, false),
                conv(256, false),
                Pool,
                conv(512, true),
            ],
        }
    }

    /// Small four-block network used for desk-scale experiments:
    /// widths 8, 16, 32, 64 with a pool after each of the first three, all ReLUs tapped.
    pub fn desk() -> Self {
        use LayerKind::*;
        let conv = |n| Conv { out_channels: n, tap: true };
        Self {
            layers: vec![conv(8), Pool, conv(16), Pool, conv(32), Pool, conv(64)],
        }
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn tap_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerKind::Conv { tap: true, .. }))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn pool_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerKind::Pool)).count()
    }

    /// `(out_channels, in_channels)` per conv layer in order.
    fn conv_shapes(&self) -> Vec<(usize, usize)> {
        let mut in_c = INPUT_CHANNELS;
        let mut shapes = Vec::new();
        for l in &self.layers {
            if let LayerKind::Conv { out_channels, .. } = *l {
                shapes.push((out_channels, in_c));
                in_c = out_channels;
            }
        }
        shapes
    }

    /// Plain-text sidecar: one layer per line, `conv <out> [tap]` or `pool`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("architecture line {}: {raw:?}", lineno + 1));
            let mut words = line.split_whitespace();
            match words.next() {
                Some("pool") => {
                    if words.next().is_some() {
                        return Err(bad());
                    }
                    layers.push(LayerKind::Pool);
                }
                Some("conv") => {
                    let out_channels = words
                        .next()
                        .and_then(|w| w.parse::<usize>().ok())
                        .ok_or_else(bad)?;
                    let tap = match words.next() {
                        None => false,
                        Some("tap") => true,
                        Some(_) => return Err(bad()),
                    };
                    if words.next().is_some() {
                        return Err(bad());
                    }
                    layers.push(LayerKind::Conv { out_channels, tap });
                }
                _ => return Err(bad()),
            }
        }
        Architecture::new(layers).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# laaca encoder architecture\n");
        for l in &self.layers {
            match l {
                LayerKind::Conv { out_channels, tap } => {
                    let _ = writeln!(s, "conv {out_channels}{}", if *tap { " tap" } else { "" });
                }
                LayerKind::Pool => s.push_str("pool\n"),
            }
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer {
    out_c: usize,
    in_c: usize,
    /// `out × in × 3 × 3`, row-major kernels.
    weights: Vec<f64>,
    bias: Vec<f64>,
    tap: bool,
}

impl ConvLayer {
    fn kernel(&self, o: usize, i: usize) -> &[f64] {
        let at = (o * self.in_c + i) * 9;
        &self.weights[at..at + 9]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv(ConvLayer),
    Pool,
}

/// A `C×H×W` activation tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FeatureStats {
    pub fn of(fm: &FeatureMap) -> FeatureStats {
        let n = (fm.height * fm.width) as f64;
        let mut mu = Vec::with_capacity(fm.channels);
        let mut sigma = Vec::with_capacity(fm.channels);
        for c in 0..fm.channels {
            let ch = fm.channel(c);
            let m = ch.iter().sum::<f64>() / n;
            let var = ch.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mu.push(m);
            sigma.push(var.sqrt());
        }
        FeatureStats { mu, sigma }
    }
}

pub fn feature_stats(fm: &FeatureMap) -> Result<FeatureStats> {
    if fm.channels == 0 || fm.height * fm.width == 0 {
        return Err(Error::arg("feature map is empty"));
    }
    Ok(FeatureStats::of(fm))
}

/// `Σ_l Σ_c (μ_a − μ_b)² + (σ_a − σ_b)²` over precomputed statistics.
pub fn loss_from_stats(a: &[FeatureStats], b: &[FeatureStats]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!("tap count mismatch: {} vs {}", a.len(), b.len())));
    }
    let mut total = 0.0;
    for (sa, sb) in a.iter().zip(b) {
        if sa.mu.len() != sb.mu.len() {
            return Err(Error::arg("tap channel count mismatch"));
        }
        for c in 0..sa.mu.len() {
            let dm = sa.mu[c] - sb.mu[c];
            let ds = sa.sigma[c] - sb.sigma[c];
            total += dm * dm + ds * ds;
        }
    }
    Ok(total)
}

/// Color-disruptive loss between two tap lists.
pub fn style_loss(taps_a: &[FeatureMap], taps_b: &[FeatureMap]) -> Result<f64> {
    if taps_a.len() != taps_b.len() {
        return Err(Error::arg(format!(
            "tap count mismatch: {} vs {}",
            taps_a.len(),
            taps_b.len()
        )));
    }
    for (a, b) in taps_a.iter().zip(taps_b) {
        if a.shape() != b.shape() {
            return Err(Error::arg(format!(
                "tap shape mismatch: {:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
    }
    let sa: Vec<_> = taps_a.iter().map(FeatureStats::of).collect();
    let sb: Vec<_> = taps_b.iter().map(FeatureStats::of).collect();
    loss_from_stats(&sa, &sb)
}

/// Gradient of the loss with respect to the input pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeGradient {
    pub grad: ImageTensor,
    pub loss_value: f64,
}

/// Feature extractor. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    layers: Vec<Layer>,
    input_scale: f64,
}

/// Per-layer forward state kept for the backward pass.
struct Trace {
    /// Output of every layer, post-ReLU for convs.
    outputs: Vec<FeatureMap>,
    /// Flat input index of the max for every pooled output, per pool layer.
    argmax: Vec<Option<Vec<usize>>>,
}

#[cfg(feature = "parallel")]
fn for_each_chunk<F>(buf: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    buf.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
fn for_each_chunk<F>(buf: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    buf.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Reflect-pads every channel by one pixel.
fn pad_reflect(fm: &FeatureMap) -> Vec<f64> {
    let (h, w) = (fm.height, fm.width);
    let (ph, pw) = (h + 2, w + 2);
    let mut out = vec![0.0; fm.channels * ph * pw];
    for c in 0..fm.channels {
        let src = fm.channel(c);
        let dst = &mut out[c * ph * pw..(c + 1) * ph * pw];
        for py in 0..ph {
            let y = reflect_index(py as isize - 1, h);
            for px in 0..pw {
                let x = reflect_index(px as isize - 1, w);
                dst[py * pw + px] = src[y * w + x];
            }
        }
    }
    out
}

impl ConvLayer {
    /// Conv + ReLU.
    fn forward(&self, input: &FeatureMap) -> FeatureMap {
        let (h, w) = (input.height, input.width);
        let pw = w + 2;
        let padded = pad_reflect(input);
        let plane = (h + 2) * pw;
        let mut out = vec![0.0; self.out_c * h * w];
        for_each_chunk(&mut out, h * w, |o, dst| {
            dst.fill(self.bias[o]);
            for i in 0..self.in_c {
                let k = self.kernel(o, i);
                let src = &padded[i * plane..(i + 1) * plane];
                for dy in 0..3 {
                    for dx in 0..3 {
                        let wt = k[dy * 3 + dx];
                        for y in 0..h {
                            let row = &src[(y + dy) * pw + dx..(y + dy) * pw + dx + w];
                            for (d, s) in dst[y * w..(y + 1) * w].iter_mut().zip(row) {
                                *d += wt * s;
                            }
                        }
                    }
                }
            }
            for v in dst.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        });
        FeatureMap {
            channels: self.out_c,
            height: h,
            width: w,
            data: out,
        }
    }

    /// Back-propagates `grad_out` (w.r.t. the post-ReLU output) to the conv input.
    fn backward(&self, output: &FeatureMap, grad_out: &[f64]) -> Vec<f64> {
        let (h, w) = (output.height, output.width);
        let (ph, pw) = (h + 2, w + 2);
        // ReLU: gradient passes only where the pre-activation was positive,
        // which is exactly where the post-ReLU output is positive.
        let gated: Vec<f64> = grad_out
            .iter()
            .zip(&output.data)
            .map(|(&g, &a)| if a > 0.0 { g } else { 0.0 })
            .collect();
        let mut grad_in = vec![0.0; self.in_c * h * w];
        for_each_chunk(&mut grad_in, h * w, |i, dst| {
            let mut gpad = vec![0.0; ph * pw];
            for o in 0..self.out_c {
                let k = self.kernel(o, i);
                let g = &gated[o * h * w..(o + 1) * h * w];
                for dy in 0..3 {
                    for dx in 0..3 {
                        let wt = k[dy * 3 + dx];
                        if wt == 0.0 {
                            continue;
                        }
                        for y in 0..h {
                            let row = &mut gpad[(y + dy) * pw + dx..(y + dy) * pw + dx + w];
                            for (d, s) in row.iter_mut().zip(&g[y * w..(y + 1) * w]) {
                                *d += wt * s;
                            }
                        }
                    }
                }
            }
            for py in 0..ph {
                let y = reflect_index(py as isize - 1, h);
                for px in 0..pw {
                    let x = reflect_index(px as isize - 1, w);
                    dst[y * w + x] += gpad[py * pw + px];
                }
            }
        });
        grad_in
    }
}

fn maxpool(input: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (h, w) = (input.height / 2, input.width / 2);
    let mut data = Vec::with_capacity(input.channels * h * w);
    let mut argmax = Vec::with_capacity(input.channels * h * w);
    let iw = input.width;
    for c in 0..input.channels {
        let base = c * input.height * iw;
        for y in 0..h {
            for x in 0..w {
                // row-major window order; the first maximum wins ties
                let mut best = base + (2 * y) * iw + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * y + dy) * iw + 2 * x + dx;
                    if input.data[idx] > input.data[best] {
                        best = idx;
                    }
                }
                data.push(input.data[best]);
                argmax.push(best);
            }
        }
    }
    (
        FeatureMap {
            channels: input.channels,
            height: h,
            width: w,
            data,
        },
        argmax,
    )
}

/// `dL/df` for one tap, given reference statistics.
fn tap_loss_grad(fm: &FeatureMap, own: &FeatureStats, reference: &FeatureStats) -> Vec<f64> {
    let n = (fm.height * fm.width) as f64;
    let mut grad = vec![0.0; fm.data.len()];
    for c in 0..fm.channels {
        let dm = own.mu[c] - reference.mu[c];
        let ds = own.sigma[c] - reference.sigma[c];
        let g_mu = 2.0 * dm / n;
        // σ = 0 is a kink; its subgradient is taken as 0.
        let g_sigma = if own.sigma[c] > 0.0 {
            2.0 * ds / (n * own.sigma[c])
        } else {
            0.0
        };
        let ch = fm.channel(c);
        let dst = &mut grad[c * fm.height * fm.width..(c + 1) * fm.height * fm.width];
        for (g, &v) in dst.iter_mut().zip(ch) {
            *g = g_mu + g_sigma * (v - own.mu[c]);
        }
    }
    grad
}

impl Encoder {
    /// Deterministic weights drawn from `N(0, 1/fan_in)`, small biases.
    pub fn init_weights(arch: &Architecture, seed: u64) -> Encoder {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bias_dist = Normal::new(0.0, 0.01).unwrap();
        let layers = arch
            .layers
            .iter()
            .scan(INPUT_CHANNELS, |in_c, l| {
                Some(match *l {
                    LayerKind::Pool => Layer::Pool,
                    LayerKind::Conv { out_channels, tap } => {
                        let fan_in = (*in_c * 9) as f64;
                        let dist = Normal::new(0.0, 1.0 / fan_in.sqrt()).unwrap();
                        let weights = (0..out_channels * *in_c * 9)
                            .map(|_| dist.sample(&mut rng))
                            .collect();
                        let bias = (0..out_channels).map(|_| bias_dist.sample(&mut rng)).collect();
                        let layer = ConvLayer {
                            out_c: out_channels,
                            in_c: *in_c,
                            weights,
                            bias,
                            tap,
                        };
                        *in_c = out_channels;
                        Layer::Conv(layer)
                    }
                })
            })
            .collect();
        Encoder {
            layers,
            input_scale: DEFAULT_INPUT_SCALE,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Pool => LayerKind::Pool,
                    Layer::Conv(c) => LayerKind::Conv {
                        out_channels: c.out_c,
                        tap: c.tap,
                    },
                })
                .collect(),
        }
    }

    pub fn input_scale(&self) -> f64 {
        self.input_scale
    }

    pub fn with_input_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::arg(format!("input scale must be positive, got {scale}")));
        }
        self.input_scale = scale;
        Ok(self)
    }

    pub fn tap_indices(&self) -> Vec<usize> {
        self.architecture().tap_indices()
    }

    /// Smallest square side that survives every pool.
    pub fn min_side(&self) -> usize {
        1 << self.architecture().pool_count()
    }

    fn last_tap(&self) -> usize {
        *self.tap_indices().last().expect("architecture has taps")
    }

    fn check_input(&self, img: &ImageTensor) -> Result<()> {
        if img.channels() != INPUT_CHANNELS {
            return Err(Error::arg(format!(
                "encoder expects {INPUT_CHANNELS} channels, got {}",
                img.channels()
            )));
        }
        let pools = self.layers[..=self.last_tap()]
            .iter()
            .filter(|l| matches!(l, Layer::Pool))
            .count();
        let (mut h, mut w) = (img.height(), img.width());
        if h == 0 || w == 0 {
            return Err(Error::arg("empty image"));
        }
        for _ in 0..pools {
            h /= 2;
            w /= 2;
            if h == 0 || w == 0 {
                return Err(Error::arg(format!(
                    "{}x{} image is too small for {pools} pooling stages",
                    img.height(),
                    img.width()
                )));
            }
        }
        Ok(())
    }

    fn trace(&self, img: &ImageTensor) -> Result<Trace> {
        self.check_input(img)?;
        let mut current = FeatureMap {
            channels: img.channels(),
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|v| v / self.input_scale).collect(),
        };
        let last = self.last_tap();
        let mut outputs = Vec::with_capacity(last + 2);
        let mut argmax = Vec::with_capacity(last + 1);
        outputs.push(current.clone());
        for layer in &self.layers[..=last] {
            match layer {
                Layer::Conv(conv) => {
                    current = conv.forward(&current);
                    argmax.push(None);
                }
                Layer::Pool => {
                    let (out, idx) = maxpool(&current);
                    current = out;
                    argmax.push(Some(idx));
                }
            }
            outputs.push(current.clone());
        }
        Ok(Trace { outputs, argmax })
    }

    /// Identifier of the piecewise-linear region containing `img`: the on/off
    /// state of every ReLU and the winning input of every pool window, up to
    /// the last tap. Inputs with equal patterns differ only through smooth
    /// parts of the network.
    pub fn activation_pattern(&self, img: &ImageTensor) -> Result<Vec<u64>> {
        let trace = self.trace(img)?;
        let mut pattern = Vec::new();
        for (li, layer) in self.layers[..=self.last_tap()].iter().enumerate() {
            match layer {
                Layer::Conv(_) => {
                    let out = &trace.outputs[li + 1].data;
                    pattern.extend(out.chunks(64).map(|chunk| {
                        chunk
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (b, &v)| acc | (u64::from(v > 0.0) << b))
                    }));
                }
                Layer::Pool => {
                    let idx = trace.argmax[li].as_ref().expect("pool argmax recorded");
                    pattern.extend(idx.iter().map(|&i| i as u64));
                }
            }
        }
        Ok(pattern)
    }

    /// Post-ReLU activations at every tap, in tap order.
    pub fn forward(&self, img: &ImageTensor) -> Result<Vec<FeatureMap>> {
        let trace = self.trace(img)?;
        Ok(self
            .tap_indices()
            .into_iter()
            .map(|i| trace.outputs[i + 1].clone())
            .collect())
    }

    pub fn stats(&self, img: &ImageTensor) -> Result<Vec<FeatureStats>> {
        Ok(self.forward(img)?.iter().map(FeatureStats::of).collect())
    }

    /// Loss against fixed reference statistics, and its gradient w.r.t. `x_star`.
    pub fn loss_and_grad(
        &self,
        x_star: &ImageTensor,
        reference: &[FeatureStats],
    ) -> Result<TapeGradient> {
        let trace = self.trace(x_star)?;
        let taps = self.tap_indices();
        if taps.len() != reference.len() {
            return Err(Error::arg("reference statistics do not match the tap count"));
        }
        let own: Vec<FeatureStats> = taps
            .iter()
            .map(|&i| FeatureStats::of(&trace.outputs[i + 1]))
            .collect();
        let loss_value = loss_from_stats(&own, reference)?;

        let seeds: Vec<Vec<f64>> = taps
            .iter()
            .zip(own.iter().zip(reference))
            .map(|(&i, (o, r))| tap_loss_grad(&trace.outputs[i + 1], o, r))
            .collect();
        let grad = self.backprop(&trace, &seeds);
        let scale = self.input_scale;
        let grad = ImageTensor::new(
            x_star.channels(),
            x_star.height(),
            x_star.width(),
            grad.into_iter().map(|g| g / scale).collect(),
        )?;
        Ok(TapeGradient { grad, loss_value })
    }

    /// Pulls per-tap output gradients back to the (scaled) input.
    fn backprop(&self, trace: &Trace, seeds: &[Vec<f64>]) -> Vec<f64> {
        let taps = self.tap_indices();
        let last = self.last_tap();
        let mut grad = vec![0.0; trace.outputs[last + 1].data.len()];
        let mut tap_slot = taps.len();
        for li in (0..=last).rev() {
            let out = &trace.outputs[li + 1];
            if tap_slot > 0 && taps[tap_slot - 1] == li {
                tap_slot -= 1;
                for (a, b) in grad.iter_mut().zip(&seeds[tap_slot]) {
                    *a += b;
                }
            }
            grad = match &self.layers[li] {
                Layer::Conv(conv) => conv.backward(out, &grad),
                Layer::Pool => {
                    let input = &trace.outputs[li];
                    let idx = trace.argmax[li].as_ref().expect("pool argmax recorded");
                    let mut g_in = vec![0.0; input.data.len()];
                    for (&src, &g) in idx.iter().zip(&grad) {
                        g_in[src] += g;
                    }
                    g_in
                }
            };
        }
        grad
    }

    /// Gradient of `style_loss(forward(x_star), forward(x_ref))` w.r.t. `x_star`;
    /// the reference is held constant.
    pub fn grad_input(&self, x_star: &ImageTensor, x_ref: &ImageTensor) -> Result<TapeGradient> {
        x_star.check_same_shape(x_ref, "grad_input")?;
        let reference = self.stats(x_ref)?;
        self.loss_and_grad(x_star, &reference)
    }

    pub fn loss(&self, x_star: &ImageTensor, x_ref: &ImageTensor) -> Result<f64> {
        style_loss(&self.forward(x_star)?, &self.forward(x_ref)?)
    }

    /// Serializes to the little-endian weight-file layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        out.extend_from_slice(&self.input_scale.to_le_bytes());
        let convs: Vec<&ConvLayer> = self
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv(c) => Some(c),
                Layer::Pool => None,
            })
            .collect();
        out.extend_from_slice(&(convs.len() as u32).to_le_bytes());
        for c in convs {
            out.extend_from_slice(&(c.out_c as u32).to_le_bytes());
            out.extend_from_slice(&(c.in_c as u32).to_le_bytes());
            for v in c.weights.iter().chain(&c.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a weight file against `arch`. Nothing is built unless the whole
    /// file validates.
    pub fn from_bytes(bytes: &[u8], arch: &Architecture) -> Result<Encoder> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != WEIGHTS_MAGIC {
            return Err(Error::Format("bad magic, expected \"LAAC\"".into()));
        }
        let version = r.u32()?;
        if version != WEIGHTS_VERSION {
            return Err(Error::Format(format!("unsupported weight file version {version}")));
        }
        let input_scale = r.f64()?;
        if !(input_scale.is_finite() && input_scale > 0.0) {
            return Err(Error::Data(format!("input scale {input_scale} is not positive and finite")));
        }
        let shapes = arch.conv_shapes();
        let count = r.u32()? as usize;
        if count != shapes.len() {
            return Err(Error::Format(format!(
                "weight file has {count} conv layers, architecture has {}",
                shapes.len()
            )));
        }
        let mut parsed = Vec::with_capacity(count);
        for (li, &(out_c, in_c)) in shapes.iter().enumerate() {
            let (fo, fi) = (r.u32()? as usize, r.u32()? as usize);
            if (fo, fi) != (out_c, in_c) {
                return Err(Error::Format(format!(
                    "conv layer {li}: file shape {fo}x{fi}, architecture expects {out_c}x{in_c}"
                )));
            }
            let weights = r.f64s(out_c * in_c * 9)?;
            let bias = r.f64s(out_c)?;
            if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("conv layer {li} holds a non-finite value")));
            }
            parsed.push((weights, bias));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last layer",
                bytes.len() - r.pos
            )));
        }
        let mut parsed = parsed.into_iter();
        let mut in_c = INPUT_CHANNELS;
        let layers = arch
            .layers
            .iter()
            .map(|l| match *l {
                LayerKind::Pool => Layer::Pool,
                LayerKind::Conv { out_channels, tap } => {
                    let (weights, bias) = parsed.next().expect("layer count validated");
                    let layer = ConvLayer {
                        out_c: out_channels,
                        in_c,
                        weights,
                        bias,
                        tap,
                    };
                    in_c = out_channels;
                    Layer::Conv(layer)
                }
            })
            .collect();
        Ok(Encoder { layers, input_scale })
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_weights(path: impl AsRef<Path>, arch: &Architecture) -> Result<Encoder> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, arch)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "weight file truncated at byte {} (needed {n} more)",
                self.pos
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("layer too large".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
