//! Python bindings: file-based entry points for simulation, batch dataset
//! production, estimation, evaluation, and verification, plus the parameter
//! type itself. Build normally for a libpython-linked module, or with
//! `--features extension-module` for wheel-style builds.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use flickerband::degrade::mask_for_params;
use flickerband::estimator::EstimatorOptions;
use flickerband::metrics::{merged_loss, psnr, ssim, GradientProxy, MaskedLossWeights};
use flickerband::pipeline;
use flickerband::{imgio, mask_coverage, Detection};

fn to_py_err(err: flickerband::Error) -> PyErr {
    match &err {
        flickerband::Error::Io { .. }
        | flickerband::Error::Image { .. }
        | flickerband::Error::EmptyCorpus(_) => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Flicker-banding degradation parameters.
#[pyclass(name = "BandingParams", from_py_object)]
#[derive(Clone)]
struct PyBandingParams {
    #[pyo3(get, set)]
    theta: f64,
    #[pyo3(get, set)]
    width_w: f64,
    #[pyo3(get, set)]
    gap_g: f64,
    #[pyo3(get, set)]
    phase_phi: f64,
    #[pyo3(get, set)]
    sigma_theta: f64,
    #[pyo3(get, set)]
    delta_g: f64,
    #[pyo3(get, set)]
    delta_w: f64,
    #[pyo3(get, set)]
    delta_edge: f64,
    #[pyo3(get, set)]
    edge_corr_len: f64,
    #[pyo3(get, set)]
    feather_px: f64,
    #[pyo3(get, set)]
    v_y: f64,
    #[pyo3(get, set)]
    noise_alpha: f64,
    #[pyo3(get, set)]
    noise_sigma_r: f64,
    #[pyo3(get, set)]
    seed: u64,
}

impl PyBandingParams {
    fn to_core(&self) -> flickerband::BandingParams {
        flickerband::BandingParams {
            theta: self.theta,
            width_w: self.width_w,
            gap_g: self.gap_g,
            phase_phi: self.phase_phi,
            sigma_theta: self.sigma_theta,
            delta_g: self.delta_g,
            delta_w: self.delta_w,
            delta_edge: self.delta_edge,
            edge_corr_len: self.edge_corr_len,
            feather_px: self.feather_px,
            v_y: self.v_y,
            noise_alpha: self.noise_alpha,
            noise_sigma_r: self.noise_sigma_r,
            seed: self.seed,
        }
    }

    fn from_core(p: &flickerband::BandingParams) -> Self {
        PyBandingParams {
            theta: p.theta,
            width_w: p.width_w,
            gap_g: p.gap_g,
            phase_phi: p.phase_phi,
            sigma_theta: p.sigma_theta,
            delta_g: p.delta_g,
            delta_w: p.delta_w,
            delta_edge: p.delta_edge,
            edge_corr_len: p.edge_corr_len,
            feather_px: p.feather_px,
            v_y: p.v_y,
            noise_alpha: p.noise_alpha,
            noise_sigma_r: p.noise_sigma_r,
            seed: p.seed,
        }
    }
}

#[pymethods]
impl PyBandingParams {
    #[new]
    #[pyo3(signature = (theta=0.0, width_w=12.0, gap_g=36.0, phase_phi=0.0, sigma_theta=0.0,
        delta_g=0.0, delta_w=0.0, delta_edge=0.0, edge_corr_len=16.0, feather_px=2.0,
        v_y=0.6, noise_alpha=0.0, noise_sigma_r=0.0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        theta: f64,
        width_w: f64,
        gap_g: f64,
        phase_phi: f64,
        sigma_theta: f64,
        delta_g: f64,
        delta_w: f64,
        delta_edge: f64,
        edge_corr_len: f64,
        feather_px: f64,
        v_y: f64,
        noise_alpha: f64,
        noise_sigma_r: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let params = PyBandingParams {
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
        params.to_core().validate().map_err(to_py_err)?;
        Ok(params)
    }

    /// Stripe period (width plus gap) in pixels.
    #[getter]
    fn period(&self) -> f64 {
        self.width_w + self.gap_g
    }

    /// Raises ValueError when any field is out of range.
    fn validate(&self) -> PyResult<()> {
        self.to_core().validate().map_err(to_py_err)
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string_pretty(&self.to_core()).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let core: flickerband::BandingParams =
            toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        core.validate().map_err(to_py_err)?;
        Ok(PyBandingParams::from_core(&core))
    }

    fn __repr__(&self) -> String {
        format!(
            "BandingParams(theta={}, width_w={}, gap_g={}, phase_phi={}, v_y={}, seed={})",
            self.theta, self.width_w, self.gap_g, self.phase_phi, self.v_y, self.seed
        )
    }
}

/// Degrades one image; writes `<out_prefix>.lq.png` and `.mask.png`.
///
/// Params default to `BandingParams()`; returns a dict with the output
/// paths, the jitter-trace digest, and the mask coverage.
#[pyfunction]
#[pyo3(signature = (input_path, out_prefix, params=None))]
fn simulate<'py>(
    py: Python<'py>,
    input_path: PathBuf,
    out_prefix: String,
    params: Option<PyBandingParams>,
) -> PyResult<Bound<'py, PyDict>> {
    let core_params = params.map(|p| p.to_core()).unwrap_or_default();
    let hq = imgio::load_rgb(&input_path).map_err(to_py_err)?;
    let degraded = flickerband::synthesize_lq(&hq, &core_params).map_err(to_py_err)?;

    let lq_path = PathBuf::from(format!("{out_prefix}.lq.png"));
    let mask_path = PathBuf::from(format!("{out_prefix}.mask.png"));
    imgio::save_rgb_png(&lq_path, &degraded.lq).map_err(to_py_err)?;
    imgio::save_mask_png(&mask_path, &degraded.mask).map_err(to_py_err)?;

    let out = PyDict::new(py);
    out.set_item("lq", lq_path)?;
    out.set_item("mask", mask_path)?;
    out.set_item("trace_digest", degraded.trace.digest())?;
    out.set_item("mask_coverage", mask_coverage(&degraded.mask))?;
    Ok(out)
}

/// Renders just the stripe mask for the given parameters and size.
///
/// Returns (width, height, flat row-major weights in [0, 1]).
#[pyfunction]
fn stripe_mask(
    params: &PyBandingParams,
    width: usize,
    height: usize,
) -> PyResult<(usize, usize, Vec<f64>)> {
    let mask = mask_for_params(&params.to_core(), width, height).map_err(to_py_err)?;
    Ok((width, height, mask.data))
}

/// Recovers banding parameters from an image by spectral analysis.
#[pyfunction]
#[pyo3(signature = (image_path, peak_threshold=6.0, window=true))]
fn estimate<'py>(
    py: Python<'py>,
    image_path: PathBuf,
    peak_threshold: f64,
    window: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = EstimatorOptions {
        peak_threshold,
        apply_window: window,
    };
    opts.validate().map_err(to_py_err)?;
    let img = imgio::load_rgb(&image_path).map_err(to_py_err)?;
    let detection = flickerband::estimate_banding(&img, &opts).map_err(to_py_err)?;
    let out = PyDict::new(py);
    match detection {
        Detection::Banding(est) => {
            out.set_item("detected", true)?;
            out.set_item("theta_rad", est.theta_hat)?;
            out.set_item("theta_deg", est.theta_hat.to_degrees())?;
            out.set_item("period_px", est.period_hat)?;
            out.set_item("duty", est.duty_hat)?;
            out.set_item("confidence", est.confidence)?;
        }
        Detection::NoBanding {
            prominence,
            threshold,
        } => {
            out.set_item("detected", false)?;
            out.set_item("prominence", prominence)?;
            out.set_item("threshold", threshold)?;
        }
    }
    Ok(out)
}

/// Scores one prediction against its reference with the masked loss family.
#[pyfunction]
#[pyo3(signature = (pred_path, gt_path, mask_path, lambda_banding=0.8, lambda_pixel=1.0, lambda_perceptual=2.0))]
fn evaluate_pair<'py>(
    py: Python<'py>,
    pred_path: PathBuf,
    gt_path: PathBuf,
    mask_path: PathBuf,
    lambda_banding: f64,
    lambda_pixel: f64,
    lambda_perceptual: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let weights = MaskedLossWeights {
        lambda_banding,
        lambda_pixel,
        lambda_perceptual,
    };
    weights.validate().map_err(to_py_err)?;
    let pred = imgio::load_rgb(&pred_path).map_err(to_py_err)?;
    let gt = imgio::load_rgb(&gt_path).map_err(to_py_err)?;
    let mask = imgio::load_mask_png(&mask_path).map_err(to_py_err)?;
    let losses =
        merged_loss(&pred, &gt, &mask, "pair", &GradientProxy, &weights).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("psnr", psnr(&pred, &gt).map_err(to_py_err)?)?;
    out.set_item("ssim", ssim(&pred, &gt).map_err(to_py_err)?)?;
    out.set_item("masked_pixel", losses.pixel)?;
    out.set_item("masked_perceptual", losses.perceptual)?;
    out.set_item("merged", losses.merged)?;
    Ok(out)
}

/// Synthesizes a paired dataset from a directory of clean images.
#[pyfunction]
#[pyo3(signature = (src_dir, out_dir, config_toml=None, seed=None, workers=1))]
fn batch<'py>(
    py: Python<'py>,
    src_dir: PathBuf,
    out_dir: PathBuf,
    config_toml: Option<String>,
    seed: Option<u64>,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let mut ranges = match config_toml {
        Some(text) => pipeline::ParamRanges::from_toml(&text).map_err(to_py_err)?,
        None => pipeline::ParamRanges::default(),
    };
    if let Some(seed) = seed {
        ranges.master_seed = seed;
    }
    let summary = pipeline::synthesize_dataset(&src_dir, &out_dir, &ranges, workers.max(1))
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("records", summary.records)?;
    out.set_item("manifest", summary.manifest_path)?;
    let skipped = PyList::empty(py);
    for skip in &summary.skipped {
        let item = PyDict::new(py);
        item.set_item("source", skip.source.clone())?;
        item.set_item("reason", skip.reason.clone())?;
        skipped.append(item)?;
    }
    out.set_item("skipped", skipped)?;
    Ok(out)
}

/// Re-synthesizes every record of a manifest and compares bit for bit.
#[pyfunction]
fn verify<'py>(py: Python<'py>, manifest_path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let summary = pipeline::verify_manifest(&manifest_path).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("total", summary.total)?;
    out.set_item("passed", summary.passed)?;
    let failures = PyList::empty(py);
    for failure in &summary.failures {
        let item = PyDict::new(py);
        item.set_item("id", failure.id.clone())?;
        item.set_item("details", failure.details.clone())?;
        failures.append(item)?;
    }
    out.set_item("failures", failures)?;
    Ok(out)
}

/// Reads a dataset manifest into a list of per-record dicts.
#[pyfunction]
fn read_manifest<'py>(py: Python<'py>, manifest_path: PathBuf) -> PyResult<Bound<'py, PyList>> {
    let records = pipeline::read_manifest(&manifest_path).map_err(to_py_err)?;
    let list = PyList::empty(py);
    for record in &records {
        let item = PyDict::new(py);
        item.set_item("id", record.id.clone())?;
        item.set_item("hq_path", record.hq_path.clone())?;
        item.set_item("lq_path", record.lq_path.clone())?;
        item.set_item("mask_path", record.mask_path.clone())?;
        item.set_item("params", PyBandingParams::from_core(&record.params))?;
        item.set_item("trace_digest", record.trace_digest.clone())?;
        item.set_item("source_dataset", record.source_dataset.clone())?;
        list.append(item)?;
    }
    Ok(list)
}

#[pymodule]
fn flickerband_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBandingParams>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(stripe_mask, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_pair, m)?)?;
    m.add_function(wrap_pyfunction!(batch, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(read_manifest, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
