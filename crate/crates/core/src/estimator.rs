//! Spectral recovery of stripe parameters from a degraded image.
//!
//! The luminance plane is mean-subtracted, Hann-windowed, and Fourier
//! transformed; a stripe pattern shows up as a conjugate pair of peaks along
//! the stripe normal. The dominant non-DC peak gives orientation and period
//! (after local continuous-frequency refinement), the second harmonic gives
//! the duty cycle, and the darker of the two phases resolves which side of
//! 1/2 the duty sits on. The whole path is deterministic: no RNG anywhere.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::color::{luminance, RgbImage};
use crate::error::{Error, Result};
use crate::params::BandingParams;

/// Smallest image edge the estimator accepts.
pub const MIN_IMAGE_EDGE: usize = 64;

/// Lowest searched frequency, in cycles per smaller image edge; anything
/// slower repeats too few times across the frame to count as banding.
const MIN_FREQ_BINS: f64 = 3.0;

/// Bins (of the smaller edge) blanked around the peak when measuring its
/// ring median, so the peak's own mainlobe does not inflate the baseline.
const PEAK_EXCLUSION_BINS: f64 = 1.6;

/// Smallest ring population the annulus median is trusted on.
const MIN_RING_BINS: usize = 12;

/// Estimator knobs exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// Peak acceptance threshold: dominant peak magnitude over the median
    /// spectral magnitude must reach this factor.
    pub peak_threshold: f64,
    /// Apply the Hann window before the transform. Disabling it exposes the
    /// raw periodogram (useful for diagnostics, worse leakage behavior).
    pub apply_window: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            peak_threshold: 6.0,
            apply_window: true,
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_threshold > 0.0) {
            return Err(Error::InvalidParams(format!(
                "peak_threshold {} must be > 0",
                self.peak_threshold
            )));
        }
        Ok(())
    }
}

/// Recovered stripe parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandingEstimate {
    /// Stripe orientation in radians, folded into [-pi/2, pi/2).
    pub theta_hat: f64,
    /// Stripe period in pixels.
    pub period_hat: f64,
    /// Dark-stripe fraction of the period, in (0, 1).
    pub duty_hat: f64,
    /// Peak prominence squashed into [0, 1].
    pub confidence: f64,
}

/// Outcome of an estimation attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    /// A periodic stripe pattern stood out of the spectrum.
    Banding(BandingEstimate),
    /// Nothing exceeded the acceptance threshold.
    NoBanding {
        /// Measured prominence of the best candidate peak.
        prominence: f64,
        /// Threshold it failed to reach.
        threshold: f64,
    },
}

impl Detection {
    pub fn is_banding(&self) -> bool {
        matches!(self, Detection::Banding(_))
    }

    pub fn estimate(&self) -> Option<&BandingEstimate> {
        match self {
            Detection::Banding(e) => Some(e),
            Detection::NoBanding { .. } => None,
        }
    }
}

/// Estimates stripe orientation, period, and duty from a single image.
///
/// Returns [`Detection::NoBanding`] when the dominant spectral peak fails the
/// prominence threshold; errors are reserved for unusable inputs.
pub fn estimate_banding(img: &RgbImage, opts: &EstimatorOptions) -> Result<Detection> {
    opts.validate()?;
    let (w, h) = (img.width(), img.height());
    if w < MIN_IMAGE_EDGE || h < MIN_IMAGE_EDGE {
        return Err(Error::ImageTooSmall {
            w,
            h,
            min: MIN_IMAGE_EDGE,
        });
    }

    let lum = luminance(img);
    let mean = lum.iter().sum::<f64>() / lum.len() as f64;
    let mut sig: Vec<f64> = lum.iter().map(|v| v - mean).collect();
    if opts.apply_window {
        let wx = hann(w);
        let wy = hann(h);
        for y in 0..h {
            for x in 0..w {
                sig[y * w + x] *= wx[x] * wy[y];
            }
        }
    }

    let spectrum = fft2d(&sig, w, h);

    // Scan the non-redundant half-plane (fy > 0, plus the fy = 0 / fx > 0
    // axis), skipping everything below MIN_FREQ_BINS cycles per min
    // dimension: with fewer than ~3 stripe repetitions there is no banding
    // to speak of, and that same region is where smooth image structure
    // concentrates.
    let min_dim = w.min(h) as f64;
    let f_min = MIN_FREQ_BINS / min_dim;
    let mut best_power = 0.0f64;
    let mut best_freq = (0.0f64, 0.0f64);
    let mut bins: Vec<(f64, f64, f64)> = Vec::with_capacity(w * h / 2);
    for ky in 0..h {
        let fy = signed_freq(ky, h);
        for kx in 0..w {
            let fx = signed_freq(kx, w);
            let upper = fy > 0.0 || (fy == 0.0 && fx > 0.0);
            if !upper || fx.hypot(fy) < f_min {
                continue;
            }
            let power = spectrum[ky * w + kx].norm_sqr();
            bins.push((fx, fy, power.sqrt()));
            if power > best_power {
                best_power = power;
                best_freq = (fx, fy);
            }
        }
    }
    if bins.is_empty() {
        return Err(Error::ImageTooSmall {
            w,
            h,
            min: MIN_IMAGE_EDGE,
        });
    }

    // Prominence compares the peak against the median magnitude of the
    // other bins at the same radial frequency (a relative annulus). A
    // stripe train is a narrow line there, towering over its ring; smooth
    // structure decays with |f|, so its low-frequency maxima sit level with
    // their ring and fail the threshold.
    let peak_mag = best_power.sqrt();
    let f_peak = best_freq.0.hypot(best_freq.1);
    let ring_median = |lo_ratio: f64, hi_ratio: f64| -> (usize, f64) {
        let mut ring: Vec<f64> = bins
            .iter()
            .filter(|&&(fx, fy, _)| {
                let r = fx.hypot(fy);
                let peak_dist = ((fx - best_freq.0) * min_dim).hypot((fy - best_freq.1) * min_dim);
                r >= lo_ratio * f_peak && r <= hi_ratio * f_peak && peak_dist >= PEAK_EXCLUSION_BINS
            })
            .map(|&(_, _, m)| m)
            .collect();
        let n = ring.len();
        if n == 0 {
            (0, 0.0)
        } else {
            (n, median_of(&mut ring))
        }
    };
    let (count, median) = match ring_median(0.7, 1.43) {
        (n, m) if n >= MIN_RING_BINS => (n, m),
        _ => ring_median(0.55, 1.8),
    };
    let median = if count >= MIN_RING_BINS {
        median
    } else {
        // Degenerate ring (peak hugging the scan floor on a small image):
        // fall back to the global half-plane median.
        let mut all: Vec<f64> = bins.iter().map(|&(_, _, m)| m).collect();
        median_of(&mut all)
    };
    let prominence = if peak_mag <= 0.0 {
        0.0
    } else if median <= 0.0 {
        f64::INFINITY
    } else {
        peak_mag / median
    };
    if !(prominence >= opts.peak_threshold) {
        return Ok(Detection::NoBanding {
            prominence,
            threshold: opts.peak_threshold,
        });
    }

    // Continuous-frequency refinement around the winning bin.
    let (mut fx, mut fy) = best_freq;
    let mut span = 1.0;
    let mut a1 = Complex::new(0.0, 0.0);
    for _ in 0..3 {
        let (nfx, nfy, value) = refine_peak(&sig, w, h, fx, fy, span);
        fx = nfx;
        fy = nfy;
        a1 = value;
        span *= 0.25;
    }
    // Keep the representative with fy >= 0 so the angle folds consistently.
    if fy < 0.0 || (fy == 0.0 && fx < 0.0) {
        fx = -fx;
        fy = -fy;
    }
    let mut theta = (-fx).atan2(fy);
    if theta >= PI / 2.0 {
        theta -= PI;
    }
    let f_mag = fx.hypot(fy);
    if f_mag < f_min {
        // The continuous-frequency fit slid into the excluded low-frequency
        // disk: the "peak" was the shoulder of smooth structure, not a
        // stripe train.
        return Ok(Detection::NoBanding {
            prominence,
            threshold: opts.peak_threshold,
        });
    }
    let period = 1.0 / f_mag;

    // Second harmonic: |a2 / a1| = |cos(pi * duty)| for an ideal stripe
    // train, monotone on (0, 1/2], so the ratio inverts directly.
    let duty_folded = if 2.0 * fx.abs() <= 0.5 && 2.0 * fy.abs() <= 0.5 {
        let (mut gx, mut gy) = (2.0 * fx, 2.0 * fy);
        let mut a2 = Complex::new(0.0, 0.0);
        let mut span2 = 0.5;
        for _ in 0..2 {
            let (nx, ny, value) = refine_peak(&sig, w, h, gx, gy, span2);
            gx = nx;
            gy = ny;
            a2 = value;
            span2 *= 0.25;
        }
        let ratio = (a2.norm() / a1.norm()).clamp(0.0, 1.0);
        ratio.acos() / PI
    } else {
        // Second harmonic beyond Nyquist: period is near the sampling limit
        // and the duty is unresolvable; report the symmetric point.
        0.5
    };

    let duty = resolve_duty_side(&lum, mean, w, h, theta, period, duty_folded);
    let confidence = if prominence.is_finite() {
        prominence / (prominence + opts.peak_threshold)
    } else {
        1.0
    };

    Ok(Detection::Banding(BandingEstimate {
        theta_hat: theta,
        period_hat: period,
        duty_hat: duty,
        confidence,
    }))
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n as f64 - 1.0)).cos()))
        .collect()
}

fn signed_freq(k: usize, n: usize) -> f64 {
    let k = k as i64;
    let n = n as i64;
    let s = if k <= n / 2 { k } else { k - n };
    s as f64 / n as f64
}

fn median_of(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) =
        values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite magnitudes"));
    *m
}

/// Full 2D FFT: rows, then columns.
fn fft2d(sig: &[f64], w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    let mut data: Vec<Complex<f64>> = sig.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
    data
}

/// Evaluates the DTFT of `sig` on a 9x9 grid spanning `+-span` bins around
/// `(fx, fy)` and returns the strongest grid point with its value.
fn refine_peak(
    sig: &[f64],
    w: usize,
    h: usize,
    fx: f64,
    fy: f64,
    span: f64,
) -> (f64, f64, Complex<f64>) {
    const GRID: usize = 9;
    let half = (GRID / 2) as f64;
    let fxs: Vec<f64> = (0..GRID)
        .map(|i| fx + (i as f64 - half) / half * span / w as f64)
        .collect();
    let fys: Vec<f64> = (0..GRID)
        .map(|i| fy + (i as f64 - half) / half * span / h as f64)
        .collect();

    // Separable evaluation: row sums against each fx, then column sums.
    let mut row_stage = vec![Complex::new(0.0, 0.0); h * GRID];
    for (a, &f) in fxs.iter().enumerate() {
        let tw: Vec<Complex<f64>> = (0..w)
            .map(|x| Complex::from_polar(1.0, -2.0 * PI * f * x as f64))
            .collect();
        for y in 0..h {
            let mut acc = Complex::new(0.0, 0.0);
            let row = &sig[y * w..(y + 1) * w];
            for (x, &v) in row.iter().enumerate() {
                acc += tw[x] * v;
            }
            row_stage[y * GRID + a] = acc;
        }
    }
    let mut best = (fxs[GRID / 2], fys[GRID / 2], Complex::new(0.0, 0.0));
    let mut best_norm = -1.0;
    for &fyv in &fys {
        let ty: Vec<Complex<f64>> = (0..h)
            .map(|y| Complex::from_polar(1.0, -2.0 * PI * fyv * y as f64))
            .collect();
        for (a, &fxv) in fxs.iter().enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            for y in 0..h {
                acc += ty[y] * row_stage[y * GRID + a];
            }
            let norm = acc.norm_sqr();
            if norm > best_norm {
                best_norm = norm;
                best = (fxv, fyv, acc);
            }
        }
    }
    best
}

/// Picks duty or its complement: the stripe phase must be the darker one.
///
/// The fundamental's phase locates stripe centers along the projected
/// coordinate; mean luminance inside a window of the candidate width around
/// those centers is compared against the rest of the frame.
fn resolve_duty_side(
    lum: &[f64],
    mean: f64,
    w: usize,
    h: usize,
    theta: f64,
    period: f64,
    duty_folded: f64,
) -> f64 {
    let d = duty_folded.clamp(1e-3, 0.5);
    let (sin_t, cos_t) = theta.sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;

    // Fundamental along the projected coordinate, from raw luminance.
    let mut c1 = Complex::new(0.0, 0.0);
    for y in 0..h {
        let yc = y as f64 - cy;
        for x in 0..w {
            let xc = x as f64 - cx;
            let v = -sin_t * xc + cos_t * yc;
            c1 += Complex::from_polar(lum[y * w + x] - mean, -2.0 * PI * v / period);
        }
    }
    // A dark stripe train contributes a negative cosine: arg(c1) is pi minus
    // the phase angle of the stripe centers.
    let phase = (PI - c1.arg()) * period / (2.0 * PI);

    let half_window = d * period / 2.0;
    let (mut sum_in, mut n_in, mut sum_out, mut n_out) = (0.0, 0u64, 0.0, 0u64);
    for y in 0..h {
        let yc = y as f64 - cy;
        for x in 0..w {
            let xc = x as f64 - cx;
            let v = -sin_t * xc + cos_t * yc - phase;
            let t = v - period * (v / period).round();
            if t.abs() <= half_window {
                sum_in += lum[y * w + x];
                n_in += 1;
            } else {
                sum_out += lum[y * w + x];
                n_out += 1;
            }
        }
    }
    if n_in == 0 || n_out == 0 {
        return d;
    }
    let mean_in = sum_in / n_in as f64;
    let mean_out = sum_out / n_out as f64;
    if mean_in <= mean_out {
        d
    } else {
        1.0 - d
    }
}

/// Compares an estimate against the parameters that generated the image.
///
/// Angles compare modulo pi (stripes are unoriented); the period error is
/// relative, the duty error absolute.
pub fn estimate_errors(est: &BandingEstimate, truth: &BandingParams) -> (f64, f64, f64) {
    let period = truth.period();
    let duty = truth.width_w / period;
    let mut dt = (est.theta_hat - truth.theta).rem_euclid(PI);
    if dt > PI / 2.0 {
        dt = PI - dt;
    }
    let theta_err_deg = dt.to_degrees();
    let period_err_rel = (est.period_hat - period).abs() / period;
    let duty_err = (est.duty_hat - duty).abs();
    (theta_err_deg, period_err_rel, duty_err)
}

/// Estimator accuracy on one dataset record.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QaRow {
    pub id: String,
    pub detected: bool,
    pub confidence: f64,
    pub theta_err_deg: Option<f64>,
    pub period_err_rel: Option<f64>,
    pub duty_err: Option<f64>,
    pub note: String,
}

/// QA table over a whole manifest: per-record rows plus summary statistics
/// (medians and p95 use the nearest-rank convention over detected rows).
#[derive(Debug, Clone)]
pub struct QaReport {
    pub rows: Vec<QaRow>,
    pub detection_rate: f64,
    pub median_theta_err_deg: Option<f64>,
    pub median_period_err_rel: Option<f64>,
    pub median_duty_err: Option<f64>,
    pub p95_period_err_rel: Option<f64>,
}

fn nearest_rank(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Some(values[rank - 1])
}

impl QaReport {
    fn from_rows(rows: Vec<QaRow>) -> QaReport {
        let detected = rows.iter().filter(|r| r.detected).count();
        let detection_rate = detected as f64 / rows.len().max(1) as f64;
        let mut theta: Vec<f64> = rows.iter().filter_map(|r| r.theta_err_deg).collect();
        let mut period: Vec<f64> = rows.iter().filter_map(|r| r.period_err_rel).collect();
        let mut duty: Vec<f64> = rows.iter().filter_map(|r| r.duty_err).collect();
        let mut period95 = period.clone();
        QaReport {
            rows,
            detection_rate,
            median_theta_err_deg: nearest_rank(&mut theta, 0.5),
            median_period_err_rel: nearest_rank(&mut period, 0.5),
            median_duty_err: nearest_rank(&mut duty, 0.5),
            p95_period_err_rel: nearest_rank(&mut period95, 0.95),
        }
    }

    /// CSV table, one row per record; the note column is always quoted.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("id,detected,confidence,theta_err_deg,period_err_rel,duty_err,note\n");
        let cell = |v: Option<f64>| v.map(|v| format!("{:.6}", v)).unwrap_or_default();
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{:.4},{},{},{},\"{}\"\n",
                row.id,
                row.detected,
                row.confidence,
                cell(row.theta_err_deg),
                cell(row.period_err_rel),
                cell(row.duty_err),
                row.note.replace('"', "\"\"")
            ));
        }
        out
    }

    /// Human-readable summary block.
    pub fn format_summary(&self) -> String {
        let stat = |v: Option<f64>| {
            v.map(|v| format!("{:.4}", v))
                .unwrap_or_else(|| "n/a".into())
        };
        format!(
            "records: {}\ndetection rate: {:.1}%\nmedian theta error (deg): {}\nmedian period error (rel): {}\nmedian duty error: {}\np95 period error (rel): {}",
            self.rows.len(),
            100.0 * self.detection_rate,
            stat(self.median_theta_err_deg),
            stat(self.median_period_err_rel),
            stat(self.median_duty_err),
            stat(self.p95_period_err_rel),
        )
    }
}

/// Runs the estimator over every LQ image of a manifest and scores it
/// against the recorded ground-truth parameters.
///
/// Per-record problems (unreadable image, undersized image) become rows with
/// a note instead of aborting the sweep.
pub fn qa_manifest(manifest_path: &std::path::Path, opts: &EstimatorOptions) -> Result<QaReport> {
    let records = crate::pipeline::read_manifest(manifest_path)?;
    if records.is_empty() {
        return Err(Error::Manifest(format!(
            "{} holds no records",
            manifest_path.display()
        )));
    }
    let base = manifest_path
        .parent()
        .unwrap_or(std::path::Path::new("."))
        .to_path_buf();
    let mut rows = Vec::with_capacity(records.len());
    for record in &records {
        let row = match crate::imgio::load_rgb(&base.join(&record.lq_path))
            .and_then(|img| estimate_banding(&img, opts))
        {
            Ok(Detection::Banding(est)) => {
                let (theta_err_deg, period_err_rel, duty_err) =
                    estimate_errors(&est, &record.params);
                QaRow {
                    id: record.id.clone(),
                    detected: true,
                    confidence: est.confidence,
                    theta_err_deg: Some(theta_err_deg),
                    period_err_rel: Some(period_err_rel),
                    duty_err: Some(duty_err),
                    note: String::new(),
                }
            }
            Ok(Detection::NoBanding {
                prominence,
                threshold,
            }) => QaRow {
                id: record.id.clone(),
                detected: false,
                confidence: 0.0,
                theta_err_deg: None,
                period_err_rel: None,
                duty_err: None,
                note: format!(
                    "no banding detected (prominence {:.2} < {:.2})",
                    prominence, threshold
                ),
            },
            Err(e) => QaRow {
                id: record.id.clone(),
                detected: false,
                confidence: 0.0,
                theta_err_deg: None,
                period_err_rel: None,
                duty_err: None,
                note: e.to_string(),
            },
        };
        rows.push(row);
    }
    Ok(QaReport::from_rows(rows))
}
