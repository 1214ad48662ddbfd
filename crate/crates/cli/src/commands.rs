use crate::output::{commit, ensure_writable, stage_bytes, stage_image, Staged};
use crate::report::{
    AcdmReport, BatchSummary, EncoderReport, EvalReport, ParamsReport, ProtectReport, SsimcReport,
};
use crate::{AttackFlags, EncoderFlags};
use anyhow::{bail, Context, Result};
use laaca_core::attack::{laaca, perturbation_report, AttackParams};
use laaca_core::encoder::{Architecture, Encoder};
use laaca_core::frequency::{blur as blur_image, highfreq_mask, lowpass};
use laaca_core::image::{clamp_pixels, load_image, ImageTensor};
use laaca_core::metrics;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

fn load(path: &Path) -> Result<ImageTensor> {
    load_image(path).with_context(|| format!("loading {}", path.display()))
}

fn resolve_encoder(flags: &EncoderFlags, seed: u64) -> Result<(Encoder, EncoderReport)> {
    let arch = match flags.arch.as_str() {
        "vgg19" => Architecture::vgg19_relu4_1(),
        "desk" => Architecture::desk(),
        path => Architecture::load(path).with_context(|| format!("loading architecture {path}"))?,
    };
    let encoder = match &flags.weights {
        Some(path) => Encoder::load_weights(path, &arch)
            .with_context(|| format!("loading weights {}", path.display()))?,
        None => Encoder::init_weights(&arch, seed),
    };
    let report = EncoderReport {
        arch: flags.arch.clone(),
        weights: flags.weights.as_ref().map(|p| p.display().to_string()),
        input_scale: encoder.input_scale(),
    };
    Ok((encoder, report))
}

/// `photo.png` → `photo.report.json`.
fn report_path(image: &Path) -> PathBuf {
    let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    image.with_file_name(format!("{stem}.report.json"))
}

fn default_output(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    input.with_file_name(format!("{stem}.protected.png"))
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "ppm" | "pgm" | "pnm")
    )
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Runs the attack and stages the image and its report; nothing is renamed into place.
fn protect_one(
    input: &Path,
    output: &Path,
    params: &AttackParams,
    encoder: &Encoder,
    encoder_report: &EncoderReport,
) -> Result<(ProtectReport, Vec<Staged>)> {
    let x = load(input)?;
    let result = laaca(&x, encoder, params).with_context(|| format!("protecting {}", input.display()))?;
    // the stored file is 8-bit; report the perturbation that actually ships
    let written = result.protected.map(|v| v.round());
    let norms = perturbation_report(&x, &written)?;
    let report = ProtectReport {
        input: input.display().to_string(),
        output: output.display().to_string(),
        params: params_report(params),
        encoder: encoder_report.clone(),
        width: x.width(),
        height: x.height(),
        mask_density: result.mask.density(),
        l2: norms.l2,
        linf: norms.linf,
        loss_trace: result.loss_trace,
    };
    let staged = vec![
        stage_image(&written, output)?,
        stage_bytes(to_json(&report)?.as_bytes(), &report_path(output))?,
    ];
    Ok((report, staged))
}

fn params_report(p: &AttackParams) -> ParamsReport {
    ParamsReport {
        k: p.k,
        alpha: p.alpha,
        epsilon: p.epsilon,
        iterations: p.iterations,
        seed: p.seed,
    }
}

pub fn protect(
    input: &Path,
    out: Option<&Path>,
    attack: &AttackFlags,
    encoder_flags: &EncoderFlags,
    seed: u64,
    json: bool,
    force: bool,
) -> Result<()> {
    let params = AttackParams {
        k: attack.k,
        alpha: attack.alpha,
        epsilon: attack.epsilon,
        iterations: attack.iters,
        seed,
    };
    params.validate()?;
    let (encoder, encoder_report) = resolve_encoder(encoder_flags, seed)?;

    if input.is_dir() {
        let Some(out_dir) = out else {
            bail!("batch mode needs --out <directory>");
        };
        return protect_batch(input, out_dir, &params, &encoder, &encoder_report, json, force);
    }

    let output = out.map(Path::to_path_buf).unwrap_or_else(|| default_output(input));
    ensure_writable(&[output.clone(), report_path(&output)], force)?;
    let (report, staged) = protect_one(input, &output, &params, &encoder, &encoder_report)?;
    commit(staged)?;
    if json {
        print!("{}", to_json(&report)?);
    } else {
        eprintln!(
            "wrote {} (mask density {:.4}, l2 {:.2}, linf {:.0}, loss {:.6e} -> {:.6e})",
            output.display(),
            report.mask_density,
            report.l2,
            report.linf,
            report.loss_trace[0],
            report.loss_trace[report.loss_trace.len() - 1]
        );
    }
    Ok(())
}

fn protect_batch(
    input_dir: &Path,
    out_dir: &Path,
    params: &AttackParams,
    encoder: &Encoder,
    encoder_report: &EncoderReport,
    json: bool,
    force: bool,
) -> Result<()> {
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(input_dir)
        .with_context(|| format!("reading {}", input_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    inputs.retain(|p| p.is_file() && is_image(p));
    inputs.sort();
    if inputs.is_empty() {
        bail!("no PNG/PPM images in {}", input_dir.display());
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let outputs: Vec<PathBuf> = inputs
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out_dir.join(format!("{stem}.png"))
        })
        .collect();
    let summary_path = out_dir.join("summary.json");
    let mut dests: Vec<PathBuf> = outputs.iter().flat_map(|o| [o.clone(), report_path(o)]).collect();
    dests.push(summary_path.clone());
    ensure_writable(&dests, force)?;

    // collect() preserves input order regardless of completion order
    let results: Vec<Result<(ProtectReport, Vec<Staged>)>> = inputs
        .par_iter()
        .zip(&outputs)
        .map(|(i, o)| protect_one(i, o, params, encoder, encoder_report))
        .collect();
    let mut reports = Vec::with_capacity(results.len());
    let mut staged = Vec::new();
    for r in results {
        let (report, s) = r?;
        reports.push(report);
        staged.extend(s);
    }

    let n = reports.len() as f64;
    let summary = BatchSummary {
        images: reports.len(),
        params: params_report(params),
        encoder: encoder_report.clone(),
        mean_mask_density: reports.iter().map(|r| r.mask_density).sum::<f64>() / n,
        mean_l2: reports.iter().map(|r| r.l2).sum::<f64>() / n,
        max_linf: reports.iter().map(|r| r.linf).fold(0.0, f64::max),
        mean_final_loss: reports.iter().map(|r| *r.loss_trace.last().unwrap()).sum::<f64>() / n,
        reports: outputs.iter().map(|o| report_path(o).display().to_string()).collect(),
    };
    let summary_json = to_json(&summary)?;
    staged.push(stage_bytes(summary_json.as_bytes(), &summary_path)?);
    commit(staged)?;
    if json {
        print!("{summary_json}");
    } else {
        eprintln!("protected {} images into {}", reports.len(), out_dir.display());
    }
    Ok(())
}

pub fn eval(original: &Path, other: &Path, json: bool) -> Result<()> {
    let x = load(original)?;
    let y = load(other)?;
    let acdm: AcdmReport = metrics::acdm(&x, &y)?.into();
    let (ssimc, l2, linf) = if x.same_shape(&y) {
        let norms = perturbation_report(&x, &y)?;
        let s = metrics::ssimc(&x, &y).ok();
        (s, Some(norms.l2), Some(norms.linf))
    } else {
        eprintln!(
            "note: sizes differ ({}x{} vs {}x{}); SSIMc and Lp norms unavailable",
            x.width(),
            x.height(),
            y.width(),
            y.height()
        );
        (None, None, None)
    };
    let report = EvalReport { ssimc, acdm, l2, linf };
    if json {
        print!("{}", to_json(&report)?);
    } else {
        let opt = |v: Option<f64>| v.map_or_else(|| "unavailable".to_string(), |v| format!("{v:.4}"));
        println!("SSIMc   {}", opt(report.ssimc));
        println!(
            "ACDM    {:.4}  (L {:.4}, A {:.4}, B {:.4})",
            report.acdm.total, report.acdm.per_channel.l, report.acdm.per_channel.a, report.acdm.per_channel.b
        );
        println!("l2      {}", opt(report.l2));
        println!("linf    {}", opt(report.linf));
    }
    Ok(())
}

pub fn acdm(first: &Path, second: &Path, json: bool) -> Result<()> {
    let report: AcdmReport = metrics::acdm(&load(first)?, &load(second)?)?.into();
    if json {
        print!("{}", to_json(&report)?);
    } else {
        println!("{:.4}", report.total);
    }
    Ok(())
}

pub fn ssimc(first: &Path, second: &Path, json: bool) -> Result<()> {
    let value = metrics::ssimc(&load(first)?, &load(second)?)?;
    if json {
        print!("{}", to_json(&SsimcReport { ssimc: value })?);
    } else {
        println!("{value:.4}");
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let name = prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    prefix.with_file_name(format!("{name}{suffix}"))
}

pub fn split_freq(input: &Path, out: &Path, k: usize, force: bool) -> Result<()> {
    let x = load(input)?;
    let low_path = with_suffix(out, ".low.png");
    let res_path = with_suffix(out, ".residual.png");
    let mask_path = with_suffix(out, ".mask.png");
    ensure_writable(&[low_path.clone(), res_path.clone(), mask_path.clone()], force)?;

    let low = lowpass(&x, k)?;
    let residual = x.zip_map(&low, |a, b| a - b + 128.0)?;
    let mask = highfreq_mask(&x, k)?;
    let staged = vec![
        stage_image(&clamp_pixels(&low, 0.0, 255.0)?, &low_path)?,
        stage_image(&clamp_pixels(&residual, 0.0, 255.0)?, &res_path)?,
        stage_image(&mask.to_image(), &mask_path)?,
    ];
    commit(staged)?;
    eprintln!(
        "wrote {}, {}, {} (mask density {:.4})",
        low_path.display(),
        res_path.display(),
        mask_path.display(),
        mask.density()
    );
    Ok(())
}

pub fn blur(input: &Path, out: &Path, k: usize, force: bool) -> Result<()> {
    let x = load(input)?;
    ensure_writable(&[out.to_path_buf()], force)?;
    let staged = vec![stage_image(&blur_image(&x, k)?, out)?];
    commit(staged)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}
