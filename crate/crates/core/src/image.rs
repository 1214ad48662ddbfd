//! Pixel tensors, lossless image I/O, and sRGB → CIELAB conversion.
//!
//! Pixels live in the `[0, 255]` intensity domain as `f64`. The same type
//! carries clean images, protected images, and perturbations, so values are
//! only required to be finite; range checks happen where they matter.

use crate::error::{Error, Result};
#[cfg(feature = "io")]
use std::path::Path;

/// A `C×H×W` real-valued pixel array, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::arg(format!(
                "data length {} does not match shape {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite pixel value at flat index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(value.is_finite());
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Builds a tensor by evaluating `f(c, y, x)` at every index.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data).expect("from_fn produced a non-finite value")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        assert!(value.is_finite());
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    /// The `H×W` plane of channel `c`.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &ImageTensor, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "{what}: shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Elementwise map; panics if `f` produces a non-finite value.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageTensor {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        ImageTensor::new(self.channels, self.height, self.width, data)
            .expect("map produced a non-finite value")
    }

    pub fn zip_map(
        &self,
        other: &ImageTensor,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<ImageTensor> {
        self.check_same_shape(other, "zip_map")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ImageTensor::new(self.channels, self.height, self.width, data)
    }

    pub fn mirror_horizontal(&self) -> ImageTensor {
        ImageTensor::from_fn(self.channels, self.height, self.width, |c, y, x| {
            self.get(c, y, self.width - 1 - x)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Interleaved RGBA bytes to a 3-channel tensor; alpha is dropped.
    pub fn from_rgba8(width: usize, height: usize, rgba: &[u8]) -> Result<ImageTensor> {
        if rgba.len() != width * height * 4 {
            return Err(Error::arg(format!(
                "rgba buffer of {} bytes does not match {width}x{height}",
                rgba.len()
            )));
        }
        Ok(ImageTensor::from_fn(3, height, width, |c, y, x| {
            rgba[(y * width + x) * 4 + c] as f64
        }))
    }

    /// Interleaved, opaque RGBA bytes; values are rounded and clamped to `[0, 255]`.
    /// Single-channel tensors are replicated to gray.
    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.height * self.width * 4);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..3 {
                    let src = if self.channels >= 3 { c } else { 0 };
                    out.push(to_byte(self.get(src, y, x)));
                }
                out.push(255);
            }
        }
        out
    }
}

/// Rounds half away from zero and saturates to a byte.
pub(crate) fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Elementwise `min(max(v, lo), hi)`.
pub fn clamp_pixels(img: &ImageTensor, lo: f64, hi: f64) -> Result<ImageTensor> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::arg(format!("clamp bounds out of order: [{lo}, {hi}]")));
    }
    Ok(img.map(|v| v.max(lo).min(hi)))
}

/// Reads a PNG (8/16-bit, RGB/RGBA/gray) or binary PPM/PGM as a 3-channel tensor.
#[cfg(feature = "io")]
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    use image::DynamicImage;

    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(Error::Format(format!("{}: unrecognized image format", path.display())));
    }
    let decoded = reader.decode().map_err(|e| map_image_error(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let sixteen = matches!(
        decoded,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    if sixteen {
        let buf = decoded.to_rgb16();
        let raw = buf.as_raw();
        Ok(ImageTensor::from_fn(3, h, w, |c, y, x| {
            raw[(y * w + x) * 3 + c] as f64 * 255.0 / 65535.0
        }))
    } else {
        let buf = decoded.to_rgb8();
        let raw = buf.as_raw();
        Ok(ImageTensor::from_fn(3, h, w, |c, y, x| raw[(y * w + x) * 3 + c] as f64))
    }
}

/// Writes an 8-bit RGB PNG, rounding half away from zero.
///
/// One-channel tensors are written as gray RGB.
#[cfg(feature = "io")]
pub fn save_image(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if img.channels != 3 && img.channels != 1 {
        return Err(Error::arg(format!(
            "cannot save a {}-channel tensor as RGB",
            img.channels
        )));
    }
    if let Some(v) = img.data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
        return Err(Error::arg(format!("pixel value {v} outside [0, 255]")));
    }
    let mut bytes = Vec::with_capacity(img.height * img.width * 3);
    for y in 0..img.height {
        for x in 0..img.width {
            for c in 0..3 {
                let src = if img.channels == 3 { c } else { 0 };
                bytes.push(to_byte(img.get(src, y, x)));
            }
        }
    }
    image::save_buffer_with_format(
        path,
        &bytes,
        img.width as u32,
        img.height as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|e| map_image_error(path, e))
}

#[cfg(feature = "io")]
fn map_image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::Format(format!("{}: truncated image data", path.display()))
        }
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Per-pixel CIELAB planes, `H×W` each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub height: usize,
    pub width: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub const L_RANGE: (f64, f64) = (0.0, 100.0);
pub const AB_RANGE: (f64, f64) = (-128.0, 127.0);

// D65 reference white, 2° observer.
const WHITE_X: f64 = 0.95047;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.08883;

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one 8-bit-domain sRGB triple to clamped `(L, a, b)`.
pub fn srgb_pixel_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let r = srgb_to_linear(r / 255.0);
    let g = srgb_to_linear(g / 255.0);
    let b = srgb_to_linear(b / 255.0);

    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);

    let l = 116.0 * fy - 16.0;
    let a = 500.0 * (fx - fy);
    let bb = 200.0 * (fy - fz);
    (
        l.clamp(L_RANGE.0, L_RANGE.1),
        a.clamp(AB_RANGE.0, AB_RANGE.1),
        bb.clamp(AB_RANGE.0, AB_RANGE.1),
    )
}

/// sRGB (D65) → linear RGB → XYZ → CIELAB, clamped to `L∈[0,100]`, `a,b∈[−128,127]`.
pub fn rgb_to_lab(img: &ImageTensor) -> Result<LabImage> {
    if img.channels != 3 {
        return Err(Error::arg(format!(
            "rgb_to_lab needs 3 channels, got {}",
            img.channels
        )));
    }
    let n = img.height * img.width;
    let (rp, gp, bp) = (img.plane(0), img.plane(1), img.plane(2));
    let mut lab = LabImage {
        height: img.height,
        width: img.width,
        l: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (l, a, b) = srgb_pixel_to_lab(
            rp[i].clamp(0.0, 255.0),
            gp[i].clamp(0.0, 255.0),
            bp[i].clamp(0.0, 255.0),
        );
        lab.l.push(l);
        lab.a.push(a);
        lab.b.push(b);
    }
    Ok(lab)
}
