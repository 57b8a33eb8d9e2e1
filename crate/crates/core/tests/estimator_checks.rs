//! Spectral estimator round trips on synthesized degradations, plus
//! falsification on clean images.

use flickerband::degrade::synthesize_lq;
use flickerband::estimator::estimate_errors;
use flickerband::testimg;
use flickerband::{estimate_banding, BandingParams, Detection, EstimatorOptions};

fn zero_jitter(theta: f64, width: f64, gap: f64, phase: f64, v_y: f64, seed: u64) -> BandingParams {
    BandingParams {
        theta,
        width_w: width,
        gap_g: gap,
        phase_phi: phase,
        sigma_theta: 0.0,
        delta_g: 0.0,
        delta_w: 0.0,
        delta_edge: 0.0,
        edge_corr_len: 16.0,
        feather_px: 0.0,
        v_y,
        noise_alpha: 0.0,
        noise_sigma_r: 0.0,
        seed,
    }
}

#[test]
fn recovers_axis_aligned_geometry() {
    let hq = testimg::smooth_noise(320, 320, 23, 5);
    let params = zero_jitter(0.0, 12.0, 28.0, 7.0, 0.5, 1);
    let lq = synthesize_lq(&hq, &params).unwrap().lq;
    let det = estimate_banding(&lq, &EstimatorOptions::default()).unwrap();
    let est = match det {
        Detection::Banding(e) => e,
        Detection::NoBanding { prominence, .. } => {
            panic!("missed banding, prominence {prominence}")
        }
    };
    let (theta_err, period_err, duty_err) = estimate_errors(&est, &params);
    assert!(theta_err <= 0.5, "theta error {theta_err} deg");
    assert!(period_err <= 0.02, "period error {period_err}");
    assert!(duty_err <= 0.05, "duty error {duty_err}");
}

#[test]
fn recovers_tilted_geometry() {
    let hq = testimg::blobs(384, 384, 6, 11);
    for (theta_deg, width, gap) in [
        (-12.0_f64, 9.0, 31.0),
        (7.5, 15.0, 45.0),
        (14.0, 22.0, 66.0),
    ] {
        let params = zero_jitter(theta_deg.to_radians(), width, gap, 3.0, 0.45, 2);
        let lq = synthesize_lq(&hq, &params).unwrap().lq;
        let det = estimate_banding(&lq, &EstimatorOptions::default()).unwrap();
        let est = match det {
            Detection::Banding(e) => e,
            Detection::NoBanding { prominence, .. } => {
                panic!("missed banding at theta {theta_deg}, prominence {prominence}")
            }
        };
        let (theta_err, period_err, duty_err) = estimate_errors(&est, &params);
        assert!(theta_err <= 0.5, "theta {theta_deg}: error {theta_err} deg");
        assert!(
            period_err <= 0.02,
            "theta {theta_deg}: period error {period_err}"
        );
        assert!(duty_err <= 0.05, "theta {theta_deg}: duty error {duty_err}");
    }
}

#[test]
fn detection_survives_mild_jitter_and_noise() {
    let hq = testimg::smooth_noise(320, 320, 17, 8);
    let params = BandingParams {
        theta: 0.1,
        width_w: 11.0,
        gap_g: 33.0,
        phase_phi: 5.0,
        sigma_theta: 0.01,
        delta_g: 2.0,
        delta_w: 1.0,
        delta_edge: 1.0,
        edge_corr_len: 16.0,
        feather_px: 2.0,
        v_y: 0.55,
        noise_alpha: 0.003,
        noise_sigma_r: 0.01,
        seed: 33,
    };
    let lq = synthesize_lq(&hq, &params).unwrap().lq;
    let det = estimate_banding(&lq, &EstimatorOptions::default()).unwrap();
    let est = det
        .estimate()
        .expect("jittered banding should still be detected");
    let (_, period_err, _) = estimate_errors(est, &params);
    assert!(period_err <= 0.05, "period error {period_err}");
}

#[test]
fn clean_images_stay_clean() {
    let mut false_positives = 0;
    let total = 24;
    for i in 0..total {
        let img = testimg::clean_image(i, 256, 256, 77);
        let det = estimate_banding(&img, &EstimatorOptions::default()).unwrap();
        if det.is_banding() {
            false_positives += 1;
        }
    }
    assert!(
        false_positives * 10 <= total,
        "{false_positives}/{total} clean images misread as banded"
    );
}

#[test]
fn estimates_are_deterministic() {
    let hq = testimg::gradient(256, 256, 0.4);
    let params = zero_jitter(-0.05, 10.0, 30.0, 0.0, 0.6, 9);
    let lq = synthesize_lq(&hq, &params).unwrap().lq;
    let a = estimate_banding(&lq, &EstimatorOptions::default()).unwrap();
    let b = estimate_banding(&lq, &EstimatorOptions::default()).unwrap();
    match (a, b) {
        (Detection::Banding(x), Detection::Banding(y)) => {
            assert_eq!(x.theta_hat, y.theta_hat);
            assert_eq!(x.period_hat, y.period_hat);
            assert_eq!(x.duty_hat, y.duty_hat);
            assert_eq!(x.confidence, y.confidence);
        }
        _ => panic!("expected identical banding detections"),
    }
}

#[test]
fn threshold_gates_detection() {
    let hq = testimg::smooth_noise(256, 256, 19, 4);
    let params = zero_jitter(0.0, 10.0, 30.0, 0.0, 0.5, 3);
    let lq = synthesize_lq(&hq, &params).unwrap().lq;
    let strict = EstimatorOptions {
        peak_threshold: 1e9,
        apply_window: true,
    };
    match estimate_banding(&lq, &strict).unwrap() {
        Detection::NoBanding { threshold, .. } => assert_eq!(threshold, 1e9),
        Detection::Banding(_) => panic!("threshold 1e9 should never pass"),
    }
    let lax = EstimatorOptions {
        peak_threshold: 1.0,
        apply_window: true,
    };
    assert!(estimate_banding(&lq, &lax).unwrap().is_banding());
}

#[test]
fn window_toggle_still_detects_strong_banding() {
    let hq = testimg::smooth_noise(256, 256, 21, 6);
    let params = zero_jitter(0.04, 12.0, 36.0, 2.0, 0.4, 5);
    let lq = synthesize_lq(&hq, &params).unwrap().lq;
    let opts = EstimatorOptions {
        peak_threshold: 6.0,
        apply_window: false,
    };
    assert!(estimate_banding(&lq, &opts).unwrap().is_banding());
}

#[test]
fn confidence_reflects_prominence_margin() {
    let hq = testimg::smooth_noise(320, 320, 23, 5);
    let params = zero_jitter(0.0, 12.0, 28.0, 7.0, 0.5, 1);
    let lq = synthesize_lq(&hq, &params).unwrap().lq;
    match estimate_banding(&lq, &EstimatorOptions::default()).unwrap() {
        Detection::Banding(est) => {
            assert!(
                est.confidence > 0.5 && est.confidence <= 1.0,
                "confidence {}",
                est.confidence
            );
        }
        Detection::NoBanding { .. } => panic!("expected detection"),
    }
}
