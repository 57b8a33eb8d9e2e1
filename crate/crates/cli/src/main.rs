//! `flickerband` command line: synthesize single degradations or whole
//! paired datasets, estimate banding parameters back out of images, score
//! restorations, and verify dataset integrity.
//!
//! Exit codes: 0 success, 1 usage error, 2 unreadable/unwritable files,
//! 3 failed validation or QA (including `verify` mismatches).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use flickerband::estimator::{qa_manifest, EstimatorOptions};
use flickerband::metrics::{GradientProxy, MaskedLossWeights, PrecomputedMaps};
use flickerband::pipeline::{self, PatchMode};
use flickerband::{imgio, BandingParams, Detection, ParamRanges};

#[derive(Parser)]
#[command(
    name = "flickerband",
    version,
    about = "Flicker-banding degradation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a single image; writes <prefix>.lq.png, .mask.png, .params.toml
    Simulate(SimulateArgs),
    /// Degrade every image in a directory into a paired dataset with a manifest
    Batch(BatchArgs),
    /// Recover banding parameters from an image, or QA a whole manifest
    Estimate(EstimateArgs),
    /// Score predictions against a manifest's references
    Evaluate(EvaluateArgs),
    /// Re-synthesize every record of a manifest and compare bit for bit
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Clean input image (PNG or JPEG)
    #[arg(long)]
    input: PathBuf,
    /// Output prefix; parent directory must exist
    #[arg(long)]
    out_prefix: PathBuf,
    /// Sampling ranges (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exact parameters (TOML) instead of sampling; --seed is then ignored
    #[arg(long)]
    params: Option<PathBuf>,
    /// Master seed for parameter sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Center-crop the input to 512x512 first
    #[arg(long = "patch-512")]
    patch_512: bool,
    /// Override the feather width (pixels)
    #[arg(long)]
    feather: Option<f64>,
    /// Print a machine-readable summary to stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BatchArgs {
    /// Directory of clean source images (non-recursive)
    #[arg(long)]
    src: PathBuf,
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
    /// Sampling ranges (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores); never changes output bytes
    #[arg(long)]
    workers: Option<usize>,
    /// Force center 512x512 patches regardless of config
    #[arg(long = "patch-512")]
    patch_512: bool,
    /// Pin the feather width (pixels) regardless of config
    #[arg(long)]
    feather: Option<f64>,
    /// Print a machine-readable summary to stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).multiple(false)))]
struct EstimateArgs {
    /// Image to analyze (single-image mode)
    #[arg(long, group = "source")]
    input: Option<PathBuf>,
    /// Manifest to QA: runs the estimator on every LQ image
    #[arg(long, group = "source")]
    manifest: Option<PathBuf>,
    /// Spectral prominence required to call a detection
    #[arg(long, default_value_t = 6.0)]
    peak_threshold: f64,
    /// Skip the tapering window before the spectral transform
    #[arg(long)]
    no_window: bool,
    /// QA table destination (manifest mode; stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable output to stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset manifest with references and masks
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of predictions named {id}.png; scores stored LQ when omitted
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Report destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, default_value = "csv", value_parser = ["csv", "jsonl"])]
    format: String,
    /// Directory of precomputed distance maps ({id}.png or {id}.f32)
    #[arg(long)]
    dist_maps: Option<PathBuf>,
    /// Weight of banded regions inside the masked losses
    #[arg(long, default_value_t = 0.8)]
    lambda_banding: f64,
    /// Weight of the pixel term in the merged loss
    #[arg(long, default_value_t = 1.0)]
    lambda_pixel: f64,
    /// Weight of the perceptual term in the merged loss
    #[arg(long, default_value_t = 2.0)]
    lambda_perceptual: f64,
    /// Stamp the report with the current UTC time (breaks byte-idempotence)
    #[arg(long)]
    stamp: bool,
    /// Print the aggregate row as JSON to stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Dataset manifest to check
    #[arg(long)]
    manifest: PathBuf,
    /// Print a machine-readable summary to stdout
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap folds help/version into its error type; those are success.
            if e.use_stderr() {
                let _ = e.print();
                return ExitCode::from(1);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// 2 for I/O-shaped failures, 3 for validation/config/QA failures.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<flickerband::Error>() {
            return match core {
                flickerband::Error::Io { .. }
                | flickerband::Error::Image { .. }
                | flickerband::Error::EmptyCorpus(_) => 2,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn load_ranges(config: Option<&Path>) -> anyhow::Result<ParamRanges> {
    match config {
        Some(path) => {
            ParamRanges::load(path).with_context(|| format!("loading config {}", path.display()))
        }
        None => Ok(ParamRanges::default()),
    }
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let loaded = imgio::load_rgb(&args.input)?;
    let hq = if args.patch_512 {
        pipeline::center_patch(&loaded, pipeline::PATCH_EDGE)?
    } else {
        loaded
    };

    let mut params = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| flickerband::Error::io(path.clone(), e))?;
            let p: BandingParams = toml::from_str(&text)
                .map_err(|e| flickerband::Error::Config(format!("{}: {}", path.display(), e)))?;
            p
        }
        None => {
            let ranges = load_ranges(args.config.as_deref())?;
            let mut rng = pipeline::record_rng(args.seed, 0);
            pipeline::sample_params(&ranges, &mut rng)?
        }
    };
    if let Some(f) = args.feather {
        params.feather_px = f;
    }
    params.validate()?;

    let degraded = flickerband::synthesize_lq(&hq, &params)?;

    let prefix = args.out_prefix.as_os_str().to_string_lossy().into_owned();
    let lq_path = PathBuf::from(format!("{prefix}.lq.png"));
    let mask_path = PathBuf::from(format!("{prefix}.mask.png"));
    let params_path = PathBuf::from(format!("{prefix}.params.toml"));
    imgio::save_rgb_png(&lq_path, &degraded.lq)?;
    imgio::save_mask_png(&mask_path, &degraded.mask)?;
    let params_toml =
        toml::to_string_pretty(&params).map_err(|e| flickerband::Error::Config(e.to_string()))?;
    imgio::atomic_write(&params_path, params_toml.as_bytes())?;

    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "lq": lq_path,
                "mask": mask_path,
                "params": params_path,
                "trace_digest": degraded.trace.digest(),
                "mask_coverage": flickerband::mask_coverage(&degraded.mask),
            })
        );
    } else {
        println!("wrote {}", lq_path.display());
        println!("wrote {}", mask_path.display());
        println!("wrote {}", params_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_batch(args: BatchArgs) -> anyhow::Result<ExitCode> {
    let mut ranges = load_ranges(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        ranges.master_seed = seed;
    }
    if args.patch_512 {
        ranges.patch = PatchMode::Center;
    }
    if let Some(f) = args.feather {
        ranges.feather_px = [f, f];
    }
    let workers = args.workers.unwrap_or_else(num_cpus);
    if workers == 0 {
        bail!("--workers must be at least 1");
    }

    let summary = pipeline::synthesize_dataset(&args.src, &args.out, &ranges, workers)?;

    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "records": summary.records,
                "skipped": summary.skipped.iter().map(|s| {
                    serde_json::json!({"source": s.source, "reason": s.reason})
                }).collect::<Vec<_>>(),
                "manifest": summary.manifest_path,
                "config": summary.config_path,
            })
        );
    } else {
        println!("records: {}", summary.records);
        for skip in &summary.skipped {
            println!("skipped {}: {}", skip.source.display(), skip.reason);
        }
        println!("manifest: {}", summary.manifest_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(args: EstimateArgs) -> anyhow::Result<ExitCode> {
    let opts = EstimatorOptions {
        peak_threshold: args.peak_threshold,
        apply_window: !args.no_window,
    };
    opts.validate()?;

    match (&args.input, &args.manifest) {
        (Some(input), None) => {
            let img = imgio::load_rgb(input)?;
            let detection = flickerband::estimate_banding(&img, &opts)?;
            if args.json {
                let value = match &detection {
                    Detection::Banding(est) => serde_json::json!({
                        "detected": true,
                        "theta_rad": est.theta_hat,
                        "theta_deg": est.theta_hat.to_degrees(),
                        "period_px": est.period_hat,
                        "duty": est.duty_hat,
                        "confidence": est.confidence,
                    }),
                    Detection::NoBanding {
                        prominence,
                        threshold,
                    } => serde_json::json!({
                        "detected": false,
                        "prominence": prominence,
                        "threshold": threshold,
                    }),
                };
                println!("{value}");
            } else {
                match &detection {
                    Detection::Banding(est) => {
                        println!("banding detected");
                        println!("  theta (deg): {:.3}", est.theta_hat.to_degrees());
                        println!("  period (px): {:.3}", est.period_hat);
                        println!("  duty:        {:.3}", est.duty_hat);
                        println!("  confidence:  {:.3}", est.confidence);
                    }
                    Detection::NoBanding {
                        prominence,
                        threshold,
                    } => {
                        println!(
                            "no banding detected (prominence {:.2} below threshold {:.2})",
                            prominence, threshold
                        );
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        (None, Some(manifest)) => {
            let report = qa_manifest(manifest, &opts)?;
            let csv = report.to_csv();
            match &args.out {
                Some(path) => {
                    imgio::atomic_write(path, csv.as_bytes())?;
                    println!("{}", report.format_summary());
                    println!("table: {}", path.display());
                }
                None => {
                    print!("{csv}");
                    eprintln!("{}", report.format_summary());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        _ => unreachable!("clap enforces exactly one of --input/--manifest"),
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<ExitCode> {
    let weights = MaskedLossWeights {
        lambda_banding: args.lambda_banding,
        lambda_pixel: args.lambda_pixel,
        lambda_perceptual: args.lambda_perceptual,
    };
    weights.validate()?;

    let proxy = GradientProxy;
    let precomputed = args
        .dist_maps
        .as_ref()
        .map(|dir| PrecomputedMaps { dir: dir.clone() });
    let (provider, tag): (&dyn flickerband::metrics::DistanceMapProvider, &str) = match &precomputed
    {
        Some(p) => (p, "precomputed"),
        None => (&proxy, "gradient-proxy"),
    };

    let mut report = pipeline::evaluate_manifest(
        &args.manifest,
        args.pred.as_deref(),
        provider,
        tag,
        &weights,
    )?;
    if args.stamp {
        report.timestamp = Some(unix_timestamp().to_string());
    }

    let body = match args.format.as_str() {
        "csv" => report.to_csv(),
        _ => report.to_jsonl(),
    };
    match &args.out {
        Some(path) => {
            imgio::atomic_write(path, body.as_bytes())?;
            if !args.json {
                println!("report: {}", path.display());
            }
        }
        None => {
            if !args.json {
                print!("{body}");
            }
        }
    }
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "pairs": report.rows.len(),
                "mean_psnr": report.aggregate.psnr,
                "mean_ssim": report.aggregate.ssim,
                "mean_masked_perceptual": report.aggregate.masked_perceptual,
                "mean_merged": report.aggregate.merged,
                "config_hash": report.config_hash,
            })
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let summary = pipeline::verify_manifest(&args.manifest)?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "total": summary.total,
                "passed": summary.passed,
                "failures": summary.failures.iter().map(|f| {
                    serde_json::json!({"id": f.id, "details": f.details})
                }).collect::<Vec<_>>(),
            })
        );
    } else {
        for failure in &summary.failures {
            for detail in &failure.details {
                println!("FAIL {}: {}", failure.id, detail);
            }
        }
        println!("verified {}/{} records", summary.passed, summary.total);
    }
    if summary.passed == summary.total {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(3))
    }
}

fn num_cpus() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
