//! `laaca`: protect artworks against style transfer and score image pairs.

mod commands;
mod output;
mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "laaca", version, about = "Artwork protection against neural style transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct AttackFlags {
    /// Gaussian bandwidth of the frequency separator.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Step size in 8-bit intensity units.
    #[arg(long, default_value_t = 8.0)]
    pub alpha: f64,
    /// l-infinity budget in 8-bit intensity units.
    #[arg(long, default_value_t = 80.0)]
    pub epsilon: f64,
    /// Number of signed-gradient iterations.
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
}

#[derive(Args, Debug, Clone)]
pub struct EncoderFlags {
    /// Flat binary weight file (magic "LAAC"); seeded weights are used when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Architecture: `vgg19`, `desk`, or a path to a plain-text layer list.
    #[arg(long, default_value = "vgg19")]
    pub arch: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Embed a protective perturbation in an image, or every image in a directory.
    Protect {
        input: PathBuf,
        /// Output image, or output directory in batch mode.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        attack: AttackFlags,
        #[command(flatten)]
        encoder: EncoderFlags,
        /// Seed for the initial noise and for seeded encoder weights.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report JSON on stdout.
        #[arg(long)]
        json: bool,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
    /// Compare an original with a processed image: SSIMc, ACDM, l2, l-infinity.
    ///
    /// Compression defenses are evaluated by passing an externally compressed
    /// file as the second image.
    Eval {
        original: PathBuf,
        other: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Aesthetic color distance between two images.
    Acdm {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Channel-averaged SSIM between two images of equal size.
    Ssimc {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write the low-pass, residual (+128), and high-frequency mask images.
    SplitFreq {
        input: PathBuf,
        /// Output prefix; files are `<out>.low.png`, `<out>.residual.png`, `<out>.mask.png`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long)]
        force: bool,
    },
    /// Gaussian blur defense.
    Blur {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Protect {
            input,
            out,
            attack,
            encoder,
            seed,
            json,
            force,
        } => commands::protect(&input, out.as_deref(), &attack, &encoder, seed, json, force),
        Command::Eval { original, other, json } => commands::eval(&original, &other, json),
        Command::Acdm { first, second, json } => commands::acdm(&first, &second, json),
        Command::Ssimc { first, second, json } => commands::ssimc(&first, &second, json),
        Command::SplitFreq { input, out, k, force } => commands::split_freq(&input, &out, k, force),
        Command::Blur { input, out, k, force } => commands::blur(&input, &out, k, force),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
