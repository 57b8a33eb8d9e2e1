//! Paired-dataset production: parameter sampling, batch synthesis, manifest
//! and config round-trips, verification, and evaluation over manifests.
//!
//! Every record's randomness derives from (master seed, record index) alone,
//! so corpora reshuffles never cascade into other records, re-runs are
//! byte-identical, and the worker count cannot influence any output.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::color::RgbImage;
use crate::degrade::synthesize_lq;
use crate::error::{Error, Result};
use crate::imgio;
use crate::metrics::{
    merged_loss, psnr, ssim, DistanceMapProvider, MaskedLossWeights, MetricReport, PairMetrics,
};
use crate::params::BandingParams;

/// Side length of optional square patches.
pub const PATCH_EDGE: usize = 512;

/// Optional cropping applied to each source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchMode {
    /// Keep sources at their native size.
    Off,
    /// Center-crop to 512x512.
    Center,
    /// Random 512x512 crop (position drawn from the record's RNG).
    Random,
}

/// Inclusive sampling intervals for every banding parameter, plus batch
/// settings. Serialized as TOML; the file written next to a dataset is this
/// struct verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    /// Seed from which every record derives its own RNG stream.
    pub master_seed: u64,
    /// Degraded variants to produce per source image.
    pub records_per_source: u32,
    pub patch: PatchMode,
    /// Corpus tag copied into each record.
    pub source_tag: String,
    pub theta: [f64; 2],
    pub width_w: [f64; 2],
    pub gap_g: [f64; 2],
    pub v_y: [f64; 2],
    pub sigma_theta: [f64; 2],
    /// Spacing jitter as a fraction of the sampled gap.
    pub delta_g_frac: [f64; 2],
    /// Width jitter as a fraction of the sampled width.
    pub delta_w_frac: [f64; 2],
    pub delta_edge: [f64; 2],
    pub edge_corr_len: [f64; 2],
    pub feather_px: [f64; 2],
    pub noise_alpha: [f64; 2],
    pub noise_sigma_r: [f64; 2],
    pub enable_angle_jitter: bool,
    pub enable_spacing_jitter: bool,
    pub enable_width_jitter: bool,
    pub enable_edge_jitter: bool,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            master_seed: 0,
            records_per_source: 1,
            patch: PatchMode::Off,
            source_tag: "local".into(),
            theta: [-0.26, 0.26],
            width_w: [6.0, 60.0],
            gap_g: [10.0, 120.0],
            v_y: [0.2, 0.9],
            sigma_theta: [0.0, 0.02],
            delta_g_frac: [0.0, 0.2],
            delta_w_frac: [0.0, 0.2],
            delta_edge: [0.0, 3.0],
            edge_corr_len: [8.0, 32.0],
            feather_px: [1.0, 4.0],
            noise_alpha: [0.0, 0.02],
            noise_sigma_r: [0.0, 0.03],
            enable_angle_jitter: true,
            enable_spacing_jitter: true,
            enable_width_jitter: true,
            enable_edge_jitter: true,
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, iv: [f64; 2]| -> Result<()> {
            if !(iv[0].is_finite() && iv[1].is_finite() && iv[0] <= iv[1]) {
                return Err(Error::Config(format!(
                    "range {} = [{}, {}] is reversed or non-finite",
                    name, iv[0], iv[1]
                )));
            }
            Ok(())
        };
        ordered("theta", self.theta)?;
        ordered("width_w", self.width_w)?;
        ordered("gap_g", self.gap_g)?;
        ordered("v_y", self.v_y)?;
        ordered("sigma_theta", self.sigma_theta)?;
        ordered("delta_g_frac", self.delta_g_frac)?;
        ordered("delta_w_frac", self.delta_w_frac)?;
        ordered("delta_edge", self.delta_edge)?;
        ordered("edge_corr_len", self.edge_corr_len)?;
        ordered("feather_px", self.feather_px)?;
        ordered("noise_alpha", self.noise_alpha)?;
        ordered("noise_sigma_r", self.noise_sigma_r)?;
        if self.records_per_source == 0 {
            return Err(Error::Config("records_per_source must be >= 1".into()));
        }
        if self.theta[0] < -std::f64::consts::PI || self.theta[1] >= std::f64::consts::PI {
            return Err(Error::Config(
                "theta range must stay inside [-pi, pi)".into(),
            ));
        }
        if !(self.width_w[0] > 0.0) {
            return Err(Error::Config("width_w must be strictly positive".into()));
        }
        if !(self.gap_g[0] > 0.0) {
            return Err(Error::Config("gap_g must be strictly positive".into()));
        }
        if !(self.v_y[0] > 0.0) || self.v_y[1] > 1.0 {
            return Err(Error::Config("v_y range must stay inside (0, 1]".into()));
        }
        if self.sigma_theta[0] < 0.0 {
            return Err(Error::Config("sigma_theta must be >= 0".into()));
        }
        if self.delta_g_frac[0] < 0.0 || self.delta_g_frac[1] >= 1.0 {
            return Err(Error::Config("delta_g_frac must stay inside [0, 1)".into()));
        }
        if self.delta_w_frac[0] < 0.0 || self.delta_w_frac[1] >= 1.0 {
            return Err(Error::Config("delta_w_frac must stay inside [0, 1)".into()));
        }
        if self.delta_edge[0] < 0.0 {
            return Err(Error::Config("delta_edge must be >= 0".into()));
        }
        if self.edge_corr_len[0] < 1.0 {
            return Err(Error::Config("edge_corr_len must be >= 1".into()));
        }
        if self.feather_px[0] < 0.0 {
            return Err(Error::Config("feather_px must be >= 0".into()));
        }
        if self.noise_alpha[0] < 0.0 || self.noise_sigma_r[0] < 0.0 {
            return Err(Error::Config("noise coefficients must be >= 0".into()));
        }
        Ok(())
    }

    /// Serializes to the TOML config format.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses and validates a TOML config.
    pub fn from_toml(text: &str) -> Result<Self> {
        let ranges: ParamRanges = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        ranges.validate()?;
        Ok(ranges)
    }

    /// Reads a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// RNG for record `index` under `master_seed`.
///
/// Each record gets its own ChaCha stream, so records are independent of one
/// another and of how many there are.
pub fn record_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn draw(rng: &mut impl Rng, iv: [f64; 2]) -> f64 {
    if iv[0] == iv[1] {
        iv[0]
    } else {
        rng.random_range(iv[0]..=iv[1])
    }
}

/// Draws one parameter set from the configured ranges.
///
/// Uniform per field, in a fixed field order; the phase is uniform in
/// [0, period) using the sampled period, disabled jitter terms are exact
/// zeros (their draws are skipped entirely), and the realization seed is the
/// next word of the same RNG.
pub fn sample_params(ranges: &ParamRanges, rng: &mut impl Rng) -> Result<BandingParams> {
    ranges.validate()?;
    let theta = draw(rng, ranges.theta);
    let width_w = draw(rng, ranges.width_w);
    let gap_g = draw(rng, ranges.gap_g);
    let v_y = draw(rng, ranges.v_y);
    let sigma_theta = if ranges.enable_angle_jitter {
        draw(rng, ranges.sigma_theta)
    } else {
        0.0
    };
    let delta_g = if ranges.enable_spacing_jitter {
        draw(rng, ranges.delta_g_frac) * gap_g
    } else {
        0.0
    };
    let delta_w = if ranges.enable_width_jitter {
        draw(rng, ranges.delta_w_frac) * width_w
    } else {
        0.0
    };
    let delta_edge = if ranges.enable_edge_jitter {
        draw(rng, ranges.delta_edge)
    } else {
        0.0
    };
    let edge_corr_len = draw(rng, ranges.edge_corr_len);
    let feather_px = draw(rng, ranges.feather_px);
    let noise_alpha = draw(rng, ranges.noise_alpha);
    let noise_sigma_r = draw(rng, ranges.noise_sigma_r);
    let period = width_w + gap_g;
    let phase_phi = rng.random_range(0.0..period);
    let seed = rng.next_u64();
    let params = BandingParams {
        theta,
        width_w,
        gap_g,
        phase_phi,
        sigma_theta,
        delta_g,
        delta_w,
        delta_edge,
        edge_corr_len,
        feather_px,
        v_y,
        noise_alpha,
        noise_sigma_r,
        seed,
    };
    params.validate()?;
    Ok(params)
}

/// One row of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    /// Paths are relative to the manifest's directory.
    pub hq_path: String,
    pub lq_path: String,
    pub mask_path: String,
    pub params: BandingParams,
    /// SHA-256 of the jitter trace that produced the pair.
    pub trace_digest: String,
    pub source_dataset: String,
}

/// Writes a manifest as JSON lines, atomically.
pub fn write_manifest(records: &[PairRecord], path: &Path) -> Result<()> {
    let mut text = String::new();
    for record in records {
        text.push_str(&serde_json::to_string(record).map_err(|e| Error::Manifest(e.to_string()))?);
        text.push('\n');
    }
    imgio::atomic_write(path, text.as_bytes())
}

/// Reads a JSON-lines manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<PairRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PairRecord = serde_json::from_str(line)
            .map_err(|e| Error::Manifest(format!("{} line {}: {}", path.display(), no + 1, e)))?;
        records.push(record);
    }
    Ok(records)
}

/// A source image that could not become a record, and why.
#[derive(Debug, Clone)]
pub struct SkipNote {
    pub source: PathBuf,
    pub reason: String,
}

/// What a batch run produced.
#[derive(Debug, Clone)]
pub struct DatasetSummary {
    pub records: usize,
    pub skipped: Vec<SkipNote>,
    pub manifest_path: PathBuf,
    pub config_path: PathBuf,
}

fn list_sources(src_dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(src_dir).map_err(|e| Error::io(src_dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                    .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyCorpus(src_dir.to_path_buf()));
    }
    Ok(files)
}

fn quantized(img: &RgbImage) -> RgbImage {
    let requant = |plane: &[f64]| {
        plane
            .iter()
            .map(|&v| imgio::dequantize_u8(imgio::quantize_u8(v)))
            .collect()
    };
    RgbImage::from_planes(
        img.width(),
        img.height(),
        requant(&img.r),
        requant(&img.g),
        requant(&img.b),
    )
    .expect("same shape")
}

fn crop(img: &RgbImage, x0: usize, y0: usize, cw: usize, ch: usize) -> RgbImage {
    let take = |plane: &[f64]| {
        let mut out = Vec::with_capacity(cw * ch);
        for y in y0..y0 + ch {
            out.extend_from_slice(&plane[y * img.width() + x0..y * img.width() + x0 + cw]);
        }
        out
    };
    RgbImage::from_planes(cw, ch, take(&img.r), take(&img.g), take(&img.b))
        .expect("crop bounds checked")
}

/// Center-crops to an `edge`-sided square.
pub fn center_patch(img: &RgbImage, edge: usize) -> Result<RgbImage> {
    if img.width() < edge || img.height() < edge {
        return Err(Error::ImageTooSmall {
            w: img.width(),
            h: img.height(),
            min: edge,
        });
    }
    Ok(crop(
        img,
        (img.width() - edge) / 2,
        (img.height() - edge) / 2,
        edge,
        edge,
    ))
}

enum TaskOutcome {
    Record(Box<PairRecord>),
    Skip(SkipNote),
}

/// Synthesizes a paired dataset from every decodable image in `src_dir`.
///
/// Produces `out_dir/{hq,lq,mask}/{id}.png` per record plus `manifest.jsonl`
/// and `config.toml`. Unreadable sources (or sources too small to patch) are
/// skipped and reported in the summary; the batch continues. `workers` sizes
/// the thread pool and has no effect on any output byte.
pub fn synthesize_dataset(
    src_dir: &Path,
    out_dir: &Path,
    ranges: &ParamRanges,
    workers: usize,
) -> Result<DatasetSummary> {
    ranges.validate()?;
    let sources = list_sources(src_dir)?;
    for sub in ["hq", "lq", "mask"] {
        std::fs::create_dir_all(out_dir.join(sub)).map_err(|e| Error::io(out_dir.join(sub), e))?;
    }

    let tasks: Vec<(u64, PathBuf)> = sources
        .iter()
        .enumerate()
        .flat_map(|(si, path)| {
            (0..ranges.records_per_source as u64).map(move |r| {
                (
                    si as u64 * ranges.records_per_source as u64 + r,
                    path.clone(),
                )
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let outcomes: Vec<Result<TaskOutcome>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(index, src)| synthesize_record(*index, src, out_dir, ranges))
            .collect()
    });

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            TaskOutcome::Record(r) => records.push(*r),
            TaskOutcome::Skip(n) => skipped.push(n),
        }
    }

    let manifest_path = out_dir.join("manifest.jsonl");
    write_manifest(&records, &manifest_path)?;
    let config_path = out_dir.join("config.toml");
    imgio::atomic_write(&config_path, ranges.to_toml()?.as_bytes())?;

    Ok(DatasetSummary {
        records: records.len(),
        skipped,
        manifest_path,
        config_path,
    })
}

fn synthesize_record(
    index: u64,
    src: &Path,
    out_dir: &Path,
    ranges: &ParamRanges,
) -> Result<TaskOutcome> {
    let skip = |reason: String| {
        Ok(TaskOutcome::Skip(SkipNote {
            source: src.to_path_buf(),
            reason,
        }))
    };
    let loaded = match imgio::load_rgb(src) {
        Ok(img) => img,
        Err(Error::Image { source, .. }) => return skip(format!("undecodable: {source}")),
        Err(e) => return Err(e),
    };

    let mut rng = record_rng(ranges.master_seed, index);
    let params = sample_params(ranges, &mut rng)?;

    let hq = match ranges.patch {
        PatchMode::Off => loaded,
        mode => {
            if loaded.width() < PATCH_EDGE || loaded.height() < PATCH_EDGE {
                return skip(format!(
                    "{}x{} is too small for a {} patch",
                    loaded.width(),
                    loaded.height(),
                    PATCH_EDGE
                ));
            }
            let (x0, y0) = match mode {
                PatchMode::Center => (
                    (loaded.width() - PATCH_EDGE) / 2,
                    (loaded.height() - PATCH_EDGE) / 2,
                ),
                PatchMode::Random => (
                    rng.random_range(0..=loaded.width() - PATCH_EDGE),
                    rng.random_range(0..=loaded.height() - PATCH_EDGE),
                ),
                PatchMode::Off => unreachable!(),
            };
            crop(&loaded, x0, y0, PATCH_EDGE, PATCH_EDGE)
        }
    };

    // The degradation runs on the quantized image, i.e. exactly what the
    // stored HQ PNG will decode back to, so verification can re-synthesize
    // bit for bit from the artifacts alone.
    let hq = quantized(&hq);
    let degraded = synthesize_lq(&hq, &params)?;

    let id = format!("{:06}", index);
    let hq_path = format!("hq/{}.png", id);
    let lq_path = format!("lq/{}.png", id);
    let mask_path = format!("mask/{}.png", id);
    imgio::save_rgb_png(&out_dir.join(&hq_path), &hq)?;
    imgio::save_rgb_png(&out_dir.join(&lq_path), &degraded.lq)?;
    imgio::save_mask_png(&out_dir.join(&mask_path), &degraded.mask)?;

    Ok(TaskOutcome::Record(Box::new(PairRecord {
        id,
        hq_path,
        lq_path,
        mask_path,
        params,
        trace_digest: degraded.trace.digest(),
        source_dataset: ranges.source_tag.clone(),
    })))
}

/// Result of re-deriving one record from its stored inputs.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub id: String,
    pub pass: bool,
    pub details: Vec<String>,
}

/// Re-synthesizes a record from its stored HQ and params and compares every
/// artifact bit for bit (after quantization).
///
/// Any discrepancy (missing file, pixel mismatch, trace digest drift, mask
/// shape) lands in `details`; hard errors are reserved for unreadable
/// manifests, not unreadable artifacts.
pub fn verify_pair(record: &PairRecord, base_dir: &Path) -> VerifyOutcome {
    let mut details = Vec::new();
    let check = || -> Result<Vec<String>> {
        let mut problems = Vec::new();
        let hq = imgio::load_rgb(&base_dir.join(&record.hq_path))?;
        let lq_stored = imgio::load_rgb(&base_dir.join(&record.lq_path))?;
        let mask_stored = imgio::load_mask_png(&base_dir.join(&record.mask_path))?;

        record.params.validate()?;
        let degraded = synthesize_lq(&hq, &record.params)?;

        let digest = degraded.trace.digest();
        if digest != record.trace_digest {
            problems.push(format!(
                "trace digest mismatch: manifest {}.. vs recomputed {}..",
                &record.trace_digest[..12.min(record.trace_digest.len())],
                &digest[..12]
            ));
        }

        if !lq_stored.same_shape(&degraded.lq) {
            problems.push("stored LQ dimensions do not match the re-synthesized image".into());
        } else {
            let planes = [
                ("r", &degraded.lq.r, &lq_stored.r),
                ("g", &degraded.lq.g, &lq_stored.g),
                ("b", &degraded.lq.b, &lq_stored.b),
            ];
            'outer: for (name, ours, stored) in planes {
                for (i, (a, b)) in ours.iter().zip(stored).enumerate() {
                    if imgio::quantize_u8(*a) != imgio::quantize_u8(*b) {
                        problems.push(format!(
                            "LQ mismatch at pixel {} channel {}: stored {} vs re-synthesized {}",
                            i,
                            name,
                            imgio::quantize_u8(*b),
                            imgio::quantize_u8(*a)
                        ));
                        break 'outer;
                    }
                }
            }
        }

        if mask_stored.width() != degraded.mask.width()
            || mask_stored.height() != degraded.mask.height()
        {
            problems.push("stored mask dimensions do not match".into());
        } else {
            for (i, (a, b)) in degraded.mask.data.iter().zip(&mask_stored.data).enumerate() {
                if imgio::quantize_u8(*a) != imgio::quantize_u8(*b) {
                    problems.push(format!(
                        "mask mismatch at pixel {}: stored {} vs re-rendered {}",
                        i,
                        imgio::quantize_u8(*b),
                        imgio::quantize_u8(*a)
                    ));
                    break;
                }
            }
        }
        Ok(problems)
    };
    match check() {
        Ok(problems) => {
            let pass = problems.is_empty();
            details.extend(problems);
            VerifyOutcome {
                id: record.id.clone(),
                pass,
                details,
            }
        }
        Err(e) => VerifyOutcome {
            id: record.id.clone(),
            pass: false,
            details: vec![e.to_string()],
        },
    }
}

/// Verification rollup over a whole manifest.
#[derive(Debug, Clone)]
pub struct VerifySummary {
    pub total: usize,
    pub passed: usize,
    pub failures: Vec<VerifyOutcome>,
}

/// Runs [`verify_pair`] over every record of a manifest.
pub fn verify_manifest(manifest_path: &Path) -> Result<VerifySummary> {
    let records = read_manifest(manifest_path)?;
    if records.is_empty() {
        return Err(Error::Manifest(format!(
            "{} holds no records",
            manifest_path.display()
        )));
    }
    let base = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let mut summary = VerifySummary {
        total: records.len(),
        passed: 0,
        failures: Vec::new(),
    };
    for record in &records {
        let outcome = verify_pair(record, &base);
        if outcome.pass {
            summary.passed += 1;
        } else {
            summary.failures.push(outcome);
        }
    }
    Ok(summary)
}

/// Evaluates predictions against a manifest's HQ references.
///
/// `pred_dir` substitutes restored images keyed `{id}.png`; without it the
/// stored LQ images are scored as-is (the degradation baseline). The report's
/// config hash covers the weights and the prediction source.
pub fn evaluate_manifest(
    manifest_path: &Path,
    pred_dir: Option<&Path>,
    provider: &dyn DistanceMapProvider,
    provider_tag: &str,
    weights: &MaskedLossWeights,
) -> Result<MetricReport> {
    weights.validate()?;
    let records = read_manifest(manifest_path)?;
    if records.is_empty() {
        return Err(Error::Manifest(format!(
            "{} holds no records",
            manifest_path.display()
        )));
    }
    let base = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();

    let mut rows = Vec::with_capacity(records.len());
    for record in &records {
        let gt = imgio::load_rgb(&base.join(&record.hq_path))?;
        let pred = match pred_dir {
            Some(dir) => imgio::load_rgb(&dir.join(format!("{}.png", record.id)))?,
            None => imgio::load_rgb(&base.join(&record.lq_path))?,
        };
        let mask = imgio::load_mask_png(&base.join(&record.mask_path))?;
        let losses = merged_loss(&pred, &gt, &mask, &record.id, provider, weights)?;
        rows.push(PairMetrics {
            id: record.id.clone(),
            psnr: psnr(&pred, &gt)?,
            ssim: ssim(&pred, &gt)?,
            masked_pixel: losses.pixel,
            masked_perceptual: losses.perceptual,
            merged: losses.merged,
        });
    }

    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(weights).map_err(|e| Error::Config(e.to_string()))?);
    hasher.update(provider_tag.as_bytes());
    if let Some(dir) = pred_dir {
        hasher.update(dir.to_string_lossy().as_bytes());
    }
    let mut config_hash = String::with_capacity(64);
    for byte in hasher.finalize() {
        use std::fmt::Write;
        write!(config_hash, "{:02x}", byte).expect("writing to String cannot fail");
    }

    MetricReport::from_rows(rows, config_hash)
}
