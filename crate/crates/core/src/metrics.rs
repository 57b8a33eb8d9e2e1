//! Masked loss family and reference metrics.
//!
//! The masked mean weighs a field by a soft mask; the pixel and perceptual
//! losses blend an in-stripe and an out-of-stripe masked mean with a banding
//! weight, and the merged loss combines both with their own weights. PSNR and
//! SSIM come along as the plain full-frame references.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::color::RgbImage;
use crate::error::{Error, Result};
use crate::mask::FlickerMask;

/// Stabilizer added to masked-mean denominators.
pub const MEAN_EPS: f64 = 1e-8;

/// Reported when two images are numerically identical (and as an upper bound
/// otherwise): 100 dB corresponds to an MSE of 1e-10 against unit peak.
pub const PSNR_CAP: f64 = 100.0;

/// Loss blend weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskedLossWeights {
    /// Weight of the in-stripe region, in [0, 1]; the complement weighs the rest.
    pub lambda_banding: f64,
    /// Weight of the pixel loss inside the merged loss (>= 0).
    pub lambda_pixel: f64,
    /// Weight of the perceptual loss inside the merged loss (>= 0).
    pub lambda_perceptual: f64,
}

impl Default for MaskedLossWeights {
    fn default() -> Self {
        MaskedLossWeights {
            lambda_banding: 0.8,
            lambda_pixel: 1.0,
            lambda_perceptual: 2.0,
        }
    }
}

impl MaskedLossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_banding) {
            return Err(Error::InvalidParams(format!(
                "lambda_banding {} must lie in [0, 1]",
                self.lambda_banding
            )));
        }
        if !(self.lambda_pixel >= 0.0) || !(self.lambda_perceptual >= 0.0) {
            return Err(Error::InvalidParams(
                "merged-loss weights must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Mask-weighted mean of a field.
///
/// `field` holds one or more channels, each as long as `mask`; the mask
/// broadcasts across channels. Returns `sum(field * mask) / (sum_broadcast(mask)
/// + eps)`, so an all-zero mask yields 0 rather than a division failure.
pub fn masked_mean(field: &[f64], mask: &[f64], eps: f64) -> Result<f64> {
    if mask.is_empty() || field.is_empty() || !field.len().is_multiple_of(mask.len()) {
        return Err(Error::DimensionMismatch(format!(
            "field length {} is not a channel multiple of mask length {}",
            field.len(),
            mask.len()
        )));
    }
    let channels = field.len() / mask.len();
    let mut num = 0.0;
    for c in 0..channels {
        let plane = &field[c * mask.len()..(c + 1) * mask.len()];
        for (f, m) in plane.iter().zip(mask) {
            num += f * m;
        }
    }
    let den = channels as f64 * mask.iter().sum::<f64>() + eps;
    Ok(num / den)
}

/// Region-weighted squared-error loss between two images.
///
/// `lambda_banding` weighs the masked mean of the squared error inside
/// stripes; its complement weighs the same mean over the rest of the frame.
pub fn masked_pixel_loss(
    pred: &RgbImage,
    gt: &RgbImage,
    mask: &FlickerMask,
    weights: &MaskedLossWeights,
) -> Result<f64> {
    weights.validate()?;
    if !pred.same_shape(gt) {
        return Err(Error::DimensionMismatch("pred and gt sizes differ".into()));
    }
    if pred.len() != mask.len() {
        return Err(Error::DimensionMismatch(
            "mask size does not match the images".into(),
        ));
    }
    let n = pred.len();
    let mut sq = vec![0.0; 3 * n];
    for (c, (p, g)) in [(&pred.r, &gt.r), (&pred.g, &gt.g), (&pred.b, &gt.b)]
        .iter()
        .enumerate()
    {
        for i in 0..n {
            let d = p[i] - g[i];
            sq[c * n + i] = d * d;
        }
    }
    let inside = masked_mean(&sq, &mask.data, MEAN_EPS)?;
    let outside = masked_mean(&sq, &mask.complement().data, MEAN_EPS)?;
    Ok(weights.lambda_banding * inside + (1.0 - weights.lambda_banding) * outside)
}

/// Single-channel nonnegative distance map.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMap {
    width: usize,
    height: usize,
    pub data: Vec<f64>,
}

impl DistMap {
    /// Wraps a row-major buffer, rejecting negative entries.
    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "distance buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(index) = data.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::NegativeDistance { index });
        }
        Ok(DistMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Area-averaging downsample of a row-major plane to `tw x th`.
///
/// Output cell (i, j) is the exact mean of the source region it covers,
/// fractional borders included, so values stay inside the source range.
pub fn area_downsample(src: &[f64], w: usize, h: usize, tw: usize, th: usize) -> Result<Vec<f64>> {
    if src.len() != w * h {
        return Err(Error::DimensionMismatch(format!(
            "plane length {} does not match {}x{}",
            src.len(),
            w,
            h
        )));
    }
    if tw == 0 || th == 0 || tw > w || th > h {
        return Err(Error::DimensionMismatch(format!(
            "cannot area-average {}x{} down to {}x{}",
            w, h, tw, th
        )));
    }
    let sx = w as f64 / tw as f64;
    let sy = h as f64 / th as f64;
    let mut out = vec![0.0; tw * th];
    for oy in 0..th {
        let y0 = oy as f64 * sy;
        let y1 = ((oy + 1) as f64 * sy).min(h as f64);
        let iy0 = y0.floor() as usize;
        let iy1 = (y1.ceil() as usize).min(h);
        for ox in 0..tw {
            let x0 = ox as f64 * sx;
            let x1 = ((ox + 1) as f64 * sx).min(w as f64);
            let ix0 = x0.floor() as usize;
            let ix1 = (x1.ceil() as usize).min(w);
            let mut acc = 0.0;
            let mut area = 0.0;
            for iy in iy0..iy1 {
                let wy = (y1.min(iy as f64 + 1.0) - y0.max(iy as f64)).max(0.0);
                for ix in ix0..ix1 {
                    let wx = (x1.min(ix as f64 + 1.0) - x0.max(ix as f64)).max(0.0);
                    acc += src[iy * w + ix] * wx * wy;
                    area += wx * wy;
                }
            }
            out[oy * tw + ox] = acc / area;
        }
    }
    Ok(out)
}

/// Downsample factor used by the built-in perceptual distance map.
pub const PROXY_DOWNSAMPLE: usize = 4;

/// Structure-sensitive distance map between two images.
///
/// Compares local gradient-magnitude maps (central differences with replicated
/// borders, averaged over channels as squared differences) and box-downsamples
/// the result by [`PROXY_DOWNSAMPLE`] (sizes rounding up). A constant
/// brightness offset leaves gradients untouched and therefore scores zero.
pub fn perceptual_proxy(pred: &RgbImage, gt: &RgbImage) -> Result<DistMap> {
    if !pred.same_shape(gt) {
        return Err(Error::DimensionMismatch("pred and gt sizes differ".into()));
    }
    let (w, h) = (pred.width(), pred.height());
    if w < 2 || h < 2 {
        return Err(Error::ImageTooSmall { w, h, min: 2 });
    }
    let mut full = vec![0.0; w * h];
    for (p, g) in [(&pred.r, &gt.r), (&pred.g, &gt.g), (&pred.b, &gt.b)] {
        let gp = gradient_magnitude(p, w, h);
        let gg = gradient_magnitude(g, w, h);
        for i in 0..w * h {
            let d = gp[i] - gg[i];
            full[i] += d * d / 3.0;
        }
    }
    let tw = w.div_ceil(PROXY_DOWNSAMPLE);
    let th = h.div_ceil(PROXY_DOWNSAMPLE);
    let data = area_downsample(&full, w, h, tw, th)?;
    DistMap::from_data(tw, th, data)
}

fn gradient_magnitude(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let dx = (plane[y * w + xp] - plane[y * w + xm]) / 2.0;
            let dy = (plane[yp * w + x] - plane[ym * w + x]) / 2.0;
            out[y * w + x] = (dx * dx + dy * dy).sqrt();
        }
    }
    out
}

/// Region-weighted mean of a distance map.
///
/// The mask is area-averaged down to the map's resolution before the same
/// in-stripe/out-of-stripe blend used by the pixel loss.
pub fn masked_perceptual_loss(
    dist: &DistMap,
    mask: &FlickerMask,
    lambda_banding: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda_banding) {
        return Err(Error::InvalidParams(format!(
            "lambda_banding {} must lie in [0, 1]",
            lambda_banding
        )));
    }
    let small = if mask.width() == dist.width && mask.height() == dist.height {
        mask.data.clone()
    } else {
        area_downsample(
            &mask.data,
            mask.width(),
            mask.height(),
            dist.width,
            dist.height,
        )?
    };
    let inside = masked_mean(&dist.data, &small, MEAN_EPS)?;
    let complement: Vec<f64> = small.iter().map(|m| 1.0 - m).collect();
    let outside = masked_mean(&dist.data, &complement, MEAN_EPS)?;
    Ok(lambda_banding * inside + (1.0 - lambda_banding) * outside)
}

/// Source of perceptual distance maps for [`merged_loss`].
pub trait DistanceMapProvider {
    /// Distance map for the pair identified by `id`.
    fn distance_map(&self, id: &str, pred: &RgbImage, gt: &RgbImage) -> Result<DistMap>;
}

/// Built-in provider backed by [`perceptual_proxy`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientProxy;

impl DistanceMapProvider for GradientProxy {
    fn distance_map(&self, _id: &str, pred: &RgbImage, gt: &RgbImage) -> Result<DistMap> {
        perceptual_proxy(pred, gt)
    }
}

/// Provider that loads precomputed maps from `dir` keyed by pair id.
///
/// Looks for `{id}.png` (single-channel, values divided by the bit-depth
/// maximum) or `{id}.f32` (two little-endian u32 dims followed by row-major
/// little-endian f32 values).
#[derive(Debug, Clone)]
pub struct PrecomputedMaps {
    pub dir: PathBuf,
}

impl DistanceMapProvider for PrecomputedMaps {
    fn distance_map(&self, id: &str, _pred: &RgbImage, _gt: &RgbImage) -> Result<DistMap> {
        let png = self.dir.join(format!("{id}.png"));
        if png.exists() {
            return crate::imgio::load_dist_png(&png);
        }
        let raw = self.dir.join(format!("{id}.f32"));
        if raw.exists() {
            return crate::imgio::load_dist_f32(&raw);
        }
        Err(Error::Manifest(format!(
            "no distance map for pair {id} in {}",
            self.dir.display()
        )))
    }
}

/// The merged loss and its two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergedLoss {
    pub pixel: f64,
    pub perceptual: f64,
    pub merged: f64,
}

/// Weighted sum of the masked pixel loss and the masked perceptual loss.
pub fn merged_loss(
    pred: &RgbImage,
    gt: &RgbImage,
    mask: &FlickerMask,
    id: &str,
    provider: &dyn DistanceMapProvider,
    weights: &MaskedLossWeights,
) -> Result<MergedLoss> {
    weights.validate()?;
    let pixel = masked_pixel_loss(pred, gt, mask, weights)?;
    let dist = provider.distance_map(id, pred, gt)?;
    let perceptual = masked_perceptual_loss(&dist, mask, weights.lambda_banding)?;
    Ok(MergedLoss {
        pixel,
        perceptual,
        merged: weights.lambda_pixel * pixel + weights.lambda_perceptual * perceptual,
    })
}

/// Peak signal-to-noise ratio against unit peak, capped at [`PSNR_CAP`].
pub fn psnr(pred: &RgbImage, gt: &RgbImage) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::DimensionMismatch("pred and gt sizes differ".into()));
    }
    let n = 3 * pred.len();
    let mut acc = 0.0;
    for (p, g) in [(&pred.r, &gt.r), (&pred.g, &gt.g), (&pred.b, &gt.b)] {
        for (a, b) in p.iter().zip(g) {
            let d = a - b;
            acc += d * d;
        }
    }
    let mse = acc / n as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP))
}

/// Mean structural similarity with the standard 11x11 Gaussian window
/// (sigma 1.5, K1 = 0.01, K2 = 0.03, unit peak), averaged over channels.
///
/// Images smaller than the window fall back to a single global window.
pub fn ssim(pred: &RgbImage, gt: &RgbImage) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::DimensionMismatch("pred and gt sizes differ".into()));
    }
    let (w, h) = (pred.width(), pred.height());
    if w == 0 || h == 0 {
        return Err(Error::DimensionMismatch("empty image".into()));
    }
    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    let mut total = 0.0;
    for (p, g) in [(&pred.r, &gt.r), (&pred.g, &gt.g), (&pred.b, &gt.b)] {
        total += if w >= 11 && h >= 11 {
            ssim_plane_windowed(p, g, w, h, C1, C2)
        } else {
            ssim_global(p, g, C1, C2)
        };
    }
    Ok(total / 3.0)
}

fn gaussian_window() -> [f64; 11] {
    let sigma = 1.5;
    let mut win = [0.0; 11];
    let mut sum = 0.0;
    for (i, slot) in win.iter_mut().enumerate() {
        let t = i as f64 - 5.0;
        *slot = (-t * t / (2.0 * sigma * sigma)).exp();
        sum += *slot;
    }
    for v in &mut win {
        *v /= sum;
    }
    win
}

/// Valid-mode separable convolution with an 11-tap kernel.
fn conv_valid(src: &[f64], w: usize, h: usize, kernel: &[f64; 11]) -> (Vec<f64>, usize, usize) {
    let ow = w - 10;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * src[y * w + x + t];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let oh = h - 10;
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * horiz[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    (out, ow, oh)
}

fn ssim_plane_windowed(p: &[f64], g: &[f64], w: usize, h: usize, c1: f64, c2: f64) -> f64 {
    let win = gaussian_window();
    let n = w * h;
    let pp: Vec<f64> = p.iter().map(|v| v * v).collect();
    let gg: Vec<f64> = g.iter().map(|v| v * v).collect();
    let pg: Vec<f64> = (0..n).map(|i| p[i] * g[i]).collect();
    let (mu_p, ow, oh) = conv_valid(p, w, h, &win);
    let (mu_g, _, _) = conv_valid(g, w, h, &win);
    let (m_pp, _, _) = conv_valid(&pp, w, h, &win);
    let (m_gg, _, _) = conv_valid(&gg, w, h, &win);
    let (m_pg, _, _) = conv_valid(&pg, w, h, &win);
    let mut acc = 0.0;
    for i in 0..ow * oh {
        let var_p = m_pp[i] - mu_p[i] * mu_p[i];
        let var_g = m_gg[i] - mu_g[i] * mu_g[i];
        let cov = m_pg[i] - mu_p[i] * mu_g[i];
        acc += ((2.0 * mu_p[i] * mu_g[i] + c1) * (2.0 * cov + c2))
            / ((mu_p[i] * mu_p[i] + mu_g[i] * mu_g[i] + c1) * (var_p + var_g + c2));
    }
    acc / (ow * oh) as f64
}

fn ssim_global(p: &[f64], g: &[f64], c1: f64, c2: f64) -> f64 {
    let n = p.len() as f64;
    let mu_p = p.iter().sum::<f64>() / n;
    let mu_g = g.iter().sum::<f64>() / n;
    let var_p = p.iter().map(|v| (v - mu_p) * (v - mu_p)).sum::<f64>() / n;
    let var_g = g.iter().map(|v| (v - mu_g) * (v - mu_g)).sum::<f64>() / n;
    let cov = p
        .iter()
        .zip(g)
        .map(|(a, b)| (a - mu_p) * (b - mu_g))
        .sum::<f64>()
        / n;
    ((2.0 * mu_p * mu_g + c1) * (2.0 * cov + c2))
        / ((mu_p * mu_p + mu_g * mu_g + c1) * (var_p + var_g + c2))
}

/// Metrics of one evaluated pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
    pub masked_pixel: f64,
    pub masked_perceptual: f64,
    pub merged: f64,
}

/// Arithmetic means over every evaluated pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub psnr: f64,
    pub ssim: f64,
    pub masked_pixel: f64,
    pub masked_perceptual: f64,
    pub merged: f64,
}

/// Per-pair rows plus their aggregate and the evaluation settings' hash.
///
/// `timestamp` stays empty unless explicitly stamped, keeping default report
/// bytes reproducible run to run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<PairMetrics>,
    pub aggregate: Aggregate,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl MetricReport {
    /// Builds a report, computing the aggregate; rejects an empty row set.
    pub fn from_rows(rows: Vec<PairMetrics>, config_hash: String) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Manifest("cannot aggregate an empty report".into()));
        }
        let n = rows.len() as f64;
        let mut agg = Aggregate {
            psnr: 0.0,
            ssim: 0.0,
            masked_pixel: 0.0,
            masked_perceptual: 0.0,
            merged: 0.0,
        };
        for row in &rows {
            agg.psnr += row.psnr / n;
            agg.ssim += row.ssim / n;
            agg.masked_pixel += row.masked_pixel / n;
            agg.masked_perceptual += row.masked_perceptual / n;
            agg.merged += row.merged / n;
        }
        Ok(MetricReport {
            rows,
            aggregate: agg,
            config_hash,
            timestamp: None,
        })
    }

    /// CSV table: one row per pair plus a trailing mean row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,psnr,ssim,masked_perceptual,merged\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.8},{:.8}\n",
                row.id, row.psnr, row.ssim, row.masked_perceptual, row.merged
            ));
        }
        out.push_str(&format!(
            "mean,{:.6},{:.6},{:.8},{:.8}\n",
            self.aggregate.psnr,
            self.aggregate.ssim,
            self.aggregate.masked_perceptual,
            self.aggregate.merged
        ));
        out
    }

    /// JSON-lines serialization: a meta line, one line per pair, one aggregate line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let meta = serde_json::json!({
            "kind": "meta",
            "config_hash": self.config_hash,
            "timestamp": self.timestamp,
        });
        out.push_str(&meta.to_string());
        out.push('\n');
        for row in &self.rows {
            let mut line = serde_json::to_value(row).expect("row serializes");
            line["kind"] = "pair".into();
            out.push_str(&line.to_string());
            out.push('\n');
        }
        let mut agg = serde_json::to_value(&self.aggregate).expect("aggregate serializes");
        agg["kind"] = "aggregate".into();
        out.push_str(&agg.to_string());
        out.push('\n');
        out
    }
}
