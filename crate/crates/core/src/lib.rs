//! Artwork protection against neural style transfer.
//!
//! The crate provides the locally adaptive adversarial color attack, which
//! embeds a bounded perturbation in the high-frequency zone of a style image
//! so that the channel statistics of an encoder's feature maps drift, and the
//! aesthetic color distance metric (ACDM), a sum of per-channel 1-D earth
//! mover's distances between LAB histograms.
//!
//! Modules:
//! - [`image`]: the `C×H×W` pixel tensor, lossless I/O, and sRGB → CIELAB.
//! - [`frequency`]: Gaussian low-pass, high-frequency mask, blur defense.
//! - [`encoder`]: convolutional feature extractor with reverse-mode input gradients.
//! - [`attack`]: the signed-gradient ascent loop.
//! - [`metrics`]: ACDM, 1-D EMD, SSIMc, and histogram comparison distances.
//! - [`synth`]: seeded procedural test images.

pub mod attack;
pub mod encoder;
mod error;
pub mod frequency;
pub mod image;
pub mod metrics;
pub mod synth;

pub use attack::{laaca, perturbation_report, AttackParams, AttackResult, PerturbationReport};
pub use encoder::{Architecture, Encoder, FeatureMap, FeatureStats, LayerKind, TapeGradient};
pub use error::{Error, Result};
pub use frequency::{GaussianKernel, HighFreqMask};
pub use image::{ImageTensor, LabImage};
pub use metrics::{AcdmScore, ChannelHistogram, LabChannel};
