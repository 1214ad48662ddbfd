//! Color and structure metrics.
//!
//! ACDM converts both images to CIELAB, bins each channel over its fixed
//! value range into `⌈√(max − min)⌉` equal-width bins, normalizes the counts,
//! and sums the per-channel closed-form 1-D earth mover's distance divided by
//! its maximum, `N − 1`. The total lies in `[0, 3]`.

use crate::error::{Error, Result};
use crate::image::{rgb_to_lab, ImageTensor, LabImage, AB_RANGE, L_RANGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabChannel {
    L,
    A,
    B,
}

impl LabChannel {
    pub const ALL: [LabChannel; 3] = [LabChannel::L, LabChannel::A, LabChannel::B];

    /// Fixed `(min, max)` value range.
    pub fn range(self) -> (f64, f64) {
        match self {
            LabChannel::L => L_RANGE,
            LabChannel::A | LabChannel::B => AB_RANGE,
        }
    }

    /// `⌈√(max − min)⌉`: 10 for L, 16 for A and B.
    pub fn n_bins(self) -> usize {
        let (lo, hi) = self.range();
        (hi - lo).sqrt().ceil() as usize
    }

    pub fn bin_width(self) -> f64 {
        let (lo, hi) = self.range();
        (hi - lo) / self.n_bins() as f64
    }

    pub fn name(self) -> &'static str {
        match self {
            LabChannel::L => "L",
            LabChannel::A => "A",
            LabChannel::B => "B",
        }
    }

    fn values(self, lab: &LabImage) -> &[f64] {
        match self {
            LabChannel::L => &lab.l,
            LabChannel::A => &lab.a,
            LabChannel::B => &lab.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelHistogram {
    pub channel: LabChannel,
    pub bin_width: f64,
    pub counts: Vec<f64>,
    pub normalized: bool,
}

impl ChannelHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }
}

/// Raw counts of one LAB channel. The last bin is closed at the channel maximum.
pub fn lab_histogram(img: &LabImage, channel: LabChannel) -> ChannelHistogram {
    let n = channel.n_bins();
    let (lo, _) = channel.range();
    let h = channel.bin_width();
    let mut counts = vec![0.0; n];
    for &v in channel.values(img) {
        let bin = ((v - lo) / h).floor();
        let bin = if bin <= 0.0 { 0 } else { (bin as usize).min(n - 1) };
        counts[bin] += 1.0;
    }
    ChannelHistogram {
        channel,
        bin_width: h,
        counts,
        normalized: false,
    }
}

pub fn normalize_hist(hist: &ChannelHistogram) -> Result<ChannelHistogram> {
    let total: f64 = hist.counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::arg("cannot normalize an empty histogram"));
    }
    Ok(ChannelHistogram {
        counts: hist.counts.iter().map(|c| c / total).collect(),
        normalized: true,
        ..hist.clone()
    })
}

fn check_probability(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::arg(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::arg(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// Closed-form 1-D earth mover's distance with unit ground distance between
/// adjacent bins: `Σ_n |P_n − Q_n|` over the cumulative sums.
pub fn emd_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::arg(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    check_probability(p, "p")?;
    check_probability(q, "q")?;
    let (mut cp, mut cq, mut total) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        cp += a;
        cq += b;
        total += (cp.min(1.0) - cq.min(1.0)).abs();
    }
    Ok(total)
}

/// EMD divided by its maximum `N − 1`; lies in `[0, 1]`.
pub fn channel_distance(h1: &ChannelHistogram, h2: &ChannelHistogram) -> Result<f64> {
    if h1.channel != h2.channel {
        return Err(Error::arg(format!(
            "channel mismatch: {} vs {}",
            h1.channel.name(),
            h2.channel.name()
        )));
    }
    if !(h1.normalized && h2.normalized) {
        return Err(Error::arg("channel_distance needs normalized histograms"));
    }
    normalized_emd(&h1.counts, &h2.counts)
}

/// `emd_1d(p, q) / (len − 1)`.
pub fn normalized_emd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::arg("need at least two bins"));
    }
    Ok(emd_1d(p, q)? / (p.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcdmScore {
    /// `D_L, D_A, D_B`.
    pub per_channel: [f64; 3],
    pub total: f64,
}

/// Normalized L, A, B histograms of an RGB image.
pub fn lab_histograms(img: &ImageTensor) -> Result<[ChannelHistogram; 3]> {
    if img.height() * img.width() == 0 {
        return Err(Error::arg("image has no pixels"));
    }
    let lab = rgb_to_lab(img)?;
    let [l, a, b] = LabChannel::ALL.map(|c| normalize_hist(&lab_histogram(&lab, c)));
    Ok([l?, a?, b?])
}

/// Aesthetic color distance between two RGB images; sizes may differ.
pub fn acdm(img1: &ImageTensor, img2: &ImageTensor) -> Result<AcdmScore> {
    let h1 = lab_histograms(img1)?;
    let h2 = lab_histograms(img2)?;
    let mut per_channel = [0.0; 3];
    for i in 0..3 {
        per_channel[i] = channel_distance(&h1[i], &h2[i])?;
    }
    Ok(AcdmScore {
        per_channel,
        total: per_channel.iter().sum(),
    })
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Gaussian-weighted mean over every full window position ("valid" mode).
fn window_filter(plane: &[f64], h: usize, w: usize, win: &[f64]) -> Vec<f64> {
    let n = win.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = win.iter().enumerate().map(|(t, k)| k * plane[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = win.iter().enumerate().map(|(t, k)| k * rows[(y + t) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, win: &[f64]) -> f64 {
    let mu_a = window_filter(a, h, w, win);
    let mu_b = window_filter(b, h, w, win);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let e_aa = window_filter(&aa, h, w, win);
    let e_bb = window_filter(&bb, h, w, win);
    let e_ab = window_filter(&ab, h, w, win);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    total / mu_a.len() as f64
}

/// Per-channel SSIM with an `11×11`, `σ = 1.5` Gaussian window, averaged over channels.
pub fn ssimc(img1: &ImageTensor, img2: &ImageTensor) -> Result<f64> {
    img1.check_same_shape(img2, "ssimc")?;
    let (c, h, w) = img1.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW || c == 0 {
        return Err(Error::arg(format!(
            "ssimc needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let win = ssim_window();
    let total: f64 = (0..c)
        .map(|ch| ssim_plane(img1.plane(ch), img2.plane(ch), h, w, &win))
        .sum();
    Ok(total / c as f64)
}

/// Bin-wise distances that ignore bin order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonDistances {
    pub l1_mean: f64,
    pub l2_mean: f64,
    pub cosine_sim: f64,
    pub euclidean: f64,
}

/// Mean absolute, mean squared, cosine similarity (0 if either vector is zero),
/// and Euclidean distance.
pub fn comparison_distances(p: &[f64], q: &[f64]) -> Result<ComparisonDistances> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::arg(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    let n = p.len() as f64;
    let (mut abs, mut sq, mut dot, mut pp, mut qq) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        let d = a - b;
        abs += d.abs();
        sq += d * d;
        dot += a * b;
        pp += a * a;
        qq += b * b;
    }
    let norm = (pp * qq).sqrt();
    Ok(ComparisonDistances {
        l1_mean: abs / n,
        l2_mean: sq / n,
        cosine_sim: if norm > 0.0 { dot / norm } else { 0.0 },
        euclidean: sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;

    const A: [f64; 4] = [0.0, 1.0, 0.0, 0.0];
    const B: [f64; 4] = [0.2, 0.3, 0.5, 0.0];
    const C: [f64; 4] = [0.2, 0.3, 0.0, 0.5];

    fn lab_uniform(l: f64, a: f64, b: f64, n: usize) -> LabImage {
        LabImage {
            height: 1,
            width: n,
            l: vec![l; n],
            a: vec![a; n],
            b: vec![b; n],
        }
    }

    #[test]
    fn bin_counts_and_widths() {
        assert_eq!(LabChannel::L.n_bins(), 10);
        assert_eq!(LabChannel::A.n_bins(), 16);
        assert_eq!(LabChannel::B.n_bins(), 16);
        assert_eq!(LabChannel::L.bin_width(), 10.0);
        assert!((LabChannel::A.bin_width() - 15.9375).abs() < 1e-12);
    }

    #[test]
    fn max_value_lands_in_last_bin() {
        let h = lab_histogram(&lab_uniform(100.0, 127.0, -128.0, 5), LabChannel::L);
        assert_eq!(h.counts[9], 5.0);
        let a = lab_histogram(&lab_uniform(100.0, 127.0, -128.0, 5), LabChannel::A);
        assert_eq!(a.counts[15], 5.0);
        let b = lab_histogram(&lab_uniform(100.0, 127.0, -128.0, 5), LabChannel::B);
        assert_eq!(b.counts[0], 5.0);
    }

    #[test]
    fn normalize_examples() {
        let mut h = lab_histogram(&lab_uniform(0.0, 0.0, 0.0, 1), LabChannel::L);
        h.counts = vec![2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let n = normalize_hist(&h).unwrap();
        assert_eq!(&n.counts[..3], &[0.5, 0.5, 0.0]);
        assert!(n.normalized);
        assert_eq!(normalize_hist(&n).unwrap().counts, n.counts);
        h.counts = vec![0.0; 10];
        assert!(normalize_hist(&h).is_err());
    }

    #[test]
    fn toy_emd_values() {
        assert!((emd_1d(&A, &B).unwrap() - 0.7).abs() < 1e-12);
        assert!((emd_1d(&A, &C).unwrap() - 1.2).abs() < 1e-12);
        assert_eq!(emd_1d(&B, &B).unwrap(), 0.0);
        assert!((normalized_emd(&A, &B).unwrap() - 0.7 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn emd_rejects_bad_input() {
        assert!(emd_1d(&A, &[0.5, 0.5]).is_err());
        assert!(emd_1d(&A, &[0.5, 0.4, 0.0, 0.0]).is_err());
        assert!(emd_1d(&A, &[1.5, -0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn toy_comparison_distances_cannot_tell_b_from_c() {
        let ab = comparison_distances(&A, &B).unwrap();
        let ac = comparison_distances(&A, &C).unwrap();
        assert_eq!(ab, ac);
        assert!((ab.l1_mean - 0.35).abs() < 5e-5);
        assert!((ab.l2_mean - 0.195).abs() < 5e-5);
        assert!((ab.cosine_sim - 0.4867).abs() < 5e-5);
        assert!((ab.euclidean - 0.8832).abs() < 5e-5);
        let same = comparison_distances(&B, &B).unwrap();
        assert_eq!(same.l1_mean, 0.0);
        assert_eq!(same.l2_mean, 0.0);
        assert!((same.cosine_sim - 1.0).abs() < 1e-15);
        assert_eq!(same.euclidean, 0.0);
        assert!(comparison_distances(&A, &B[..3]).is_err());
    }

    #[test]
    fn channel_distance_extremes() {
        let lo = normalize_hist(&lab_histogram(&lab_uniform(0.0, 0.0, 0.0, 3), LabChannel::L)).unwrap();
        let hi = normalize_hist(&lab_histogram(&lab_uniform(100.0, 0.0, 0.0, 3), LabChannel::L)).unwrap();
        assert_eq!(channel_distance(&lo, &lo).unwrap(), 0.0);
        assert_eq!(channel_distance(&lo, &hi).unwrap(), 1.0);
        let a = normalize_hist(&lab_histogram(&lab_uniform(0.0, 0.0, 0.0, 3), LabChannel::A)).unwrap();
        assert!(channel_distance(&lo, &a).is_err());
        let raw = lab_histogram(&lab_uniform(0.0, 0.0, 0.0, 3), LabChannel::L);
        assert!(channel_distance(&raw, &lo).is_err());
    }

    #[test]
    fn acdm_black_white() {
        let black = ImageTensor::zeros(3, 4, 4);
        let white = ImageTensor::filled(3, 6, 5, 255.0);
        let s = acdm(&black, &white).unwrap();
        assert_eq!(s.per_channel[0], 1.0);
        // Independent pipeline: black is (0,0,0) in LAB; white's a,b sit within
        // half a unit of 0, so all four land in the bin holding 0, index
        // ⌊128/15.9375⌋ = 8. No A/B mass moves.
        let (_, wa, wb) = crate::image::srgb_pixel_to_lab(255.0, 255.0, 255.0);
        for v in [wa, wb] {
            assert_eq!(((v + 128.0) / 15.9375).floor() as usize, 8);
        }
        assert_eq!(s.per_channel[1], 0.0);
        assert_eq!(s.per_channel[2], 0.0);
        assert_eq!(s.total, 1.0);
    }

    #[test]
    fn acdm_identity_symmetry_and_replication() {
        let x = synth::textured(3, 20, 20);
        let y = synth::textured(4, 15, 25);
        assert_eq!(acdm(&x, &x).unwrap().total, 0.0);
        assert_eq!(acdm(&x, &y).unwrap(), acdm(&y, &x).unwrap());
        let up = ImageTensor::from_fn(3, 40, 40, |c, i, j| x.get(c, i / 2, j / 2));
        assert_eq!(acdm(&x, &up).unwrap().total, 0.0);
        assert!(acdm(&x, &ImageTensor::zeros(3, 0, 4)).is_err());
    }

    /// Textbook SSIM for two constant images, where every window has zero variance.
    fn constant_ssim_oracle(a: f64, b: f64) -> f64 {
        (2.0 * a * b + SSIM_C1) / (a * a + b * b + SSIM_C1)
    }

    #[test]
    fn ssim_examples() {
        let x = synth::textured(8, 24, 24);
        assert_eq!(ssimc(&x, &x).unwrap(), 1.0);
        let inv = x.map(|v| 255.0 - v);
        assert!(ssimc(&x, &inv).unwrap() < 0.5);
        let c0 = ImageTensor::filled(3, 16, 16, 100.0);
        let c1 = ImageTensor::filled(3, 16, 16, 110.0);
        let got = ssimc(&c0, &c1).unwrap();
        assert!((got - constant_ssim_oracle(100.0, 110.0)).abs() < 1e-6, "{got}");
        assert!(ssimc(&ImageTensor::zeros(3, 10, 30), &ImageTensor::zeros(3, 10, 30)).is_err());
        assert!(ssimc(&x, &synth::textured(8, 24, 25)).is_err());
    }

    #[test]
    fn ssim_bounded_below_one_for_different_images() {
        for seed in 0..5 {
            let x = synth::textured(seed, 16, 16);
            let mut y = x.clone();
            let v = x.get(1, 7, 7);
            y.set(1, 7, 7, if v < 128.0 { v + 30.0 } else { v - 30.0 });
            let s = ssimc(&x, &y).unwrap();
            assert!(s > -1.0 && s < 1.0, "{s}");
        }
    }

    fn prob(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, len).prop_filter_map("non-zero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn emd_triangle_inequality((p, q, r) in (2usize..20).prop_flat_map(|n| (prob(n), prob(n), prob(n)))) {
            let pr = emd_1d(&p, &r).unwrap();
            let pq = emd_1d(&p, &q).unwrap();
            let qr = emd_1d(&q, &r).unwrap();
            prop_assert!(pr <= pq + qr + 1e-12);
            prop_assert!(normalized_emd(&p, &q).unwrap() <= 1.0);
        }

        #[test]
        fn normalized_sums_to_one(counts in proptest::collection::vec(0.0f64..1e6, 10)) {
            prop_assume!(counts.iter().sum::<f64>() > 0.0);
            let mut h = lab_histogram(&lab_uniform(0.0, 0.0, 0.0, 1), LabChannel::L);
            h.counts = counts;
            let n = normalize_hist(&h).unwrap();
            prop_assert!((n.counts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
