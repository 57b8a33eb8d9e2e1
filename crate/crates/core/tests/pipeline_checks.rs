//! End-to-end dataset pipeline checks: batch synthesis, reproducibility
//! across runs and worker counts, verification, and evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

use flickerband::metrics::{GradientProxy, MaskedLossWeights};
use flickerband::{
    evaluate_manifest, read_manifest, synthesize_dataset, verify_manifest, Error, ParamRanges,
    PatchMode,
};

fn small_ranges() -> ParamRanges {
    ParamRanges {
        master_seed: 90210,
        records_per_source: 2,
        patch: PatchMode::Off,
        width_w: [4.0, 10.0],
        gap_g: [8.0, 24.0],
        ..ParamRanges::default()
    }
}

fn write_corpus(dir: &Path, count: usize) -> Vec<PathBuf> {
    flickerband::testimg::write_clean_corpus(dir, count, 96, 80, 31).unwrap()
}

/// SHA-256 over every file in a tree (relative path + contents), sorted.
fn tree_digest(root: &Path) -> String {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    let mut hasher = Sha256::new();
    for path in files {
        hasher.update(
            path.strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .as_bytes(),
        );
        hasher.update([0]);
        hasher.update(fs::read(&path).unwrap());
    }
    let mut hex = String::new();
    for byte in hasher.finalize() {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

#[test]
fn corrupt_sources_are_skipped_not_fatal() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 3);
    fs::write(src.path().join("broken.png"), b"not actually a png").unwrap();

    let ranges = small_ranges();
    let summary = synthesize_dataset(src.path(), out.path(), &ranges, 2).unwrap();
    assert_eq!(summary.records, 3 * 2);
    assert_eq!(summary.skipped.len(), ranges.records_per_source as usize);
    assert!(summary.skipped[0].source.ends_with("broken.png"));
    assert!(
        summary.skipped[0].reason.to_lowercase().contains("decod")
            || !summary.skipped[0].reason.is_empty()
    );

    let records = read_manifest(&summary.manifest_path).unwrap();
    assert_eq!(records.len(), 6);
    for record in &records {
        for rel in [&record.hq_path, &record.lq_path, &record.mask_path] {
            assert!(out.path().join(rel).is_file(), "missing {rel}");
        }
    }
}

#[test]
fn reruns_reproduce_the_output_tree_byte_for_byte() {
    let src = TempDir::new().unwrap();
    write_corpus(src.path(), 2);
    let ranges = small_ranges();

    let out_a = TempDir::new().unwrap();
    let out_b = TempDir::new().unwrap();
    synthesize_dataset(src.path(), out_a.path(), &ranges, 2).unwrap();
    synthesize_dataset(src.path(), out_b.path(), &ranges, 2).unwrap();
    assert_eq!(tree_digest(out_a.path()), tree_digest(out_b.path()));
}

#[test]
fn worker_count_never_changes_the_bytes() {
    let src = TempDir::new().unwrap();
    write_corpus(src.path(), 3);
    let ranges = small_ranges();

    let serial = TempDir::new().unwrap();
    let parallel = TempDir::new().unwrap();
    synthesize_dataset(src.path(), serial.path(), &ranges, 1).unwrap();
    synthesize_dataset(src.path(), parallel.path(), &ranges, 4).unwrap();
    assert_eq!(tree_digest(serial.path()), tree_digest(parallel.path()));
}

#[test]
fn fresh_datasets_verify_clean() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 2);
    let summary = synthesize_dataset(src.path(), out.path(), &small_ranges(), 2).unwrap();

    let verdict = verify_manifest(&summary.manifest_path).unwrap();
    assert_eq!(verdict.total, 4);
    assert_eq!(verdict.passed, 4);
    assert!(verdict.failures.is_empty());
}

#[test]
fn tampered_pixels_fail_verification() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 1);
    let summary = synthesize_dataset(src.path(), out.path(), &small_ranges(), 1).unwrap();
    let records = read_manifest(&summary.manifest_path).unwrap();

    // Flip one byte in the middle of the first LQ image's pixel data.
    let lq_path = out.path().join(&records[0].lq_path);
    let img = image::open(&lq_path).unwrap().to_rgb8();
    let mut img = img;
    let px = img.get_pixel_mut(10, 10);
    px.0[0] = px.0[0].wrapping_add(16);
    img.save(&lq_path).unwrap();

    let verdict = verify_manifest(&summary.manifest_path).unwrap();
    assert_eq!(verdict.passed, verdict.total - 1);
    assert_eq!(verdict.failures.len(), 1);
    assert_eq!(verdict.failures[0].id, records[0].id);
    assert!(!verdict.failures[0].details.is_empty());
}

#[test]
fn tampered_manifest_params_fail_verification() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 1);
    let summary = synthesize_dataset(src.path(), out.path(), &small_ranges(), 1).unwrap();

    let text = fs::read_to_string(&summary.manifest_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut first: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    let v_y = first["params"]["v_y"].as_f64().unwrap();
    first["params"]["v_y"] = serde_json::json!(v_y * 0.9);
    lines[0] = first.to_string();
    fs::write(&summary.manifest_path, lines.join("\n") + "\n").unwrap();

    let verdict = verify_manifest(&summary.manifest_path).unwrap();
    assert!(!verdict.failures.is_empty());
}

#[test]
fn empty_source_directories_are_an_error() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    let err = synthesize_dataset(src.path(), out.path(), &small_ranges(), 1).unwrap_err();
    assert!(matches!(err, Error::EmptyCorpus(_)), "got {err:?}");
}

#[test]
fn center_patches_come_out_at_the_fixed_edge() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    flickerband::testimg::write_clean_corpus(src.path(), 1, 540, 600, 7).unwrap();

    let mut ranges = small_ranges();
    ranges.records_per_source = 1;
    ranges.patch = PatchMode::Center;
    let summary = synthesize_dataset(src.path(), out.path(), &ranges, 1).unwrap();
    let records = read_manifest(&summary.manifest_path).unwrap();
    let lq = image::open(out.path().join(&records[0].lq_path)).unwrap();
    assert_eq!((lq.width(), lq.height()), (512, 512));
    let hq = image::open(out.path().join(&records[0].hq_path)).unwrap();
    assert_eq!((hq.width(), hq.height()), (512, 512));
}

#[test]
fn random_patches_stay_in_bounds_and_reproduce() {
    let src = TempDir::new().unwrap();
    flickerband::testimg::write_clean_corpus(src.path(), 1, 530, 520, 3).unwrap();

    let mut ranges = small_ranges();
    ranges.records_per_source = 2;
    ranges.patch = PatchMode::Random;

    let out_a = TempDir::new().unwrap();
    let out_b = TempDir::new().unwrap();
    let summary = synthesize_dataset(src.path(), out_a.path(), &ranges, 1).unwrap();
    synthesize_dataset(src.path(), out_b.path(), &ranges, 2).unwrap();

    let records = read_manifest(&summary.manifest_path).unwrap();
    assert_eq!(records.len(), 2);
    for record in &records {
        let lq = image::open(out_a.path().join(&record.lq_path)).unwrap();
        assert_eq!((lq.width(), lq.height()), (512, 512));
    }
    assert_eq!(tree_digest(out_a.path()), tree_digest(out_b.path()));
}

#[test]
fn undersized_sources_are_skipped_under_patching() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 1);

    let mut ranges = small_ranges();
    ranges.records_per_source = 1;
    ranges.patch = PatchMode::Center;
    let summary = synthesize_dataset(src.path(), out.path(), &ranges, 1).unwrap();
    assert_eq!(summary.records, 0);
    assert_eq!(summary.skipped.len(), 1);
}

#[test]
fn perfect_predictions_score_perfectly() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    let pred = TempDir::new().unwrap();
    write_corpus(src.path(), 2);
    let summary = synthesize_dataset(src.path(), out.path(), &small_ranges(), 2).unwrap();

    // Predictions identical to the stored HQ references.
    for record in read_manifest(&summary.manifest_path).unwrap() {
        fs::copy(
            out.path().join(&record.hq_path),
            pred.path().join(format!("{}.png", record.id)),
        )
        .unwrap();
    }

    let weights = MaskedLossWeights {
        lambda_banding: 0.8,
        lambda_pixel: 1.0,
        lambda_perceptual: 2.0,
    };
    let report = evaluate_manifest(
        &summary.manifest_path,
        Some(pred.path()),
        &GradientProxy,
        "proxy",
        &weights,
    )
    .unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert_eq!(row.psnr, 100.0, "{}", row.id);
        assert!(row.merged.abs() < 1e-15, "{} merged {}", row.id, row.merged);
        assert!((row.ssim - 1.0).abs() < 1e-9);
    }
    assert_eq!(report.aggregate.psnr, 100.0);
}

#[test]
fn stored_degradations_score_worse_than_perfect() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 1);
    let mut ranges = small_ranges();
    ranges.v_y = [0.4, 0.4];
    let summary = synthesize_dataset(src.path(), out.path(), &ranges, 1).unwrap();

    let weights = MaskedLossWeights {
        lambda_banding: 0.8,
        lambda_pixel: 1.0,
        lambda_perceptual: 2.0,
    };
    let report = evaluate_manifest(
        &summary.manifest_path,
        None,
        &GradientProxy,
        "proxy",
        &weights,
    )
    .unwrap();
    for row in &report.rows {
        assert!(
            row.psnr < 60.0,
            "{} suspiciously clean psnr {}",
            row.id,
            row.psnr
        );
        assert!(row.merged > 0.0);
    }
}

#[test]
fn run_config_snapshot_round_trips() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 1);
    let ranges = small_ranges();
    let summary = synthesize_dataset(src.path(), out.path(), &ranges, 1).unwrap();

    let text = fs::read_to_string(&summary.config_path).unwrap();
    let restored = ParamRanges::from_toml(&text).unwrap();
    assert_eq!(restored, ranges);
}

#[test]
fn manifest_ids_are_unique_and_ordered() {
    let src = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    write_corpus(src.path(), 3);
    let summary = synthesize_dataset(src.path(), out.path(), &small_ranges(), 3).unwrap();
    let records = read_manifest(&summary.manifest_path).unwrap();
    let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), records.len(), "duplicate ids in {ids:?}");
    let mut resorted = ids.clone();
    resorted.sort();
    assert_eq!(ids, resorted, "manifest rows should be in id order");
}
