//! JSON shapes emitted by the CLI. Field order is fixed by declaration order.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ParamsReport {
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EncoderReport {
    pub arch: String,
    pub weights: Option<String>,
    pub input_scale: f64,
}

/// Sidecar written next to every protected image.
#[derive(Debug, Clone, Serialize)]
pub struct ProtectReport {
    pub input: String,
    pub output: String,
    pub params: ParamsReport,
    pub encoder: EncoderReport,
    pub width: usize,
    pub height: usize,
    /// Fraction of `(channel, pixel)` entries in the high-frequency zone.
    pub mask_density: f64,
    /// Norms of the written image minus the input.
    pub l2: f64,
    pub linf: f64,
    /// Loss before each update, then the loss of the final image.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub images: usize,
    pub params: ParamsReport,
    pub encoder: EncoderReport,
    pub mean_mask_density: f64,
    pub mean_l2: f64,
    pub max_linf: f64,
    pub mean_final_loss: f64,
    pub reports: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelScores {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AcdmReport {
    pub per_channel: ChannelScores,
    pub total: f64,
}

impl From<laaca_core::AcdmScore> for AcdmReport {
    fn from(s: laaca_core::AcdmScore) -> Self {
        AcdmReport {
            per_channel: ChannelScores {
                l: s.per_channel[0],
                a: s.per_channel[1],
                b: s.per_channel[2],
            },
            total: s.total,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SsimcReport {
    pub ssimc: f64,
}

/// `eval` output; shape-dependent metrics are `null` when sizes differ.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub ssimc: Option<f64>,
    pub acdm: AcdmReport,
    pub l2: Option<f64>,
    pub linf: Option<f64>,
}
