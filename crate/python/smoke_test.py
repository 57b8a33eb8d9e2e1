#!/usr/bin/env python3
"""Smoke test for the flickerband_py extension module.

Builds nothing itself: expects `cargo build -p flickerband-py` to have
produced target/debug/libflickerband_py.so. The library is copied into a
temp directory under the importable name flickerband_py.so, imported, and
exercised end to end on Pillow-generated images.

Run from anywhere:  python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

from PIL import Image

REPO_ROOT = Path(__file__).resolve().parent.parent


def import_extension(staging: Path):
    candidates = [
        REPO_ROOT / "target" / "debug" / "libflickerband_py.so",
        REPO_ROOT / "target" / "release" / "libflickerband_py.so",
    ]
    built = next((p for p in candidates if p.is_file()), None)
    if built is None:
        sys.exit(
            "libflickerband_py.so not found; run `cargo build -p flickerband-py` first"
        )
    shutil.copy2(built, staging / "flickerband_py.so")
    sys.path.insert(0, str(staging))
    import flickerband_py

    return flickerband_py


def make_clean_image(path: Path, size=(256, 256)):
    """Smooth diagonal gradient with a soft blob, aperiodic by construction."""
    w, h = size
    img = Image.new("RGB", size)
    px = img.load()
    for y in range(h):
        for x in range(w):
            base = 0.25 + 0.5 * (x + y) / (w + h)
            bump = 0.18 * math.exp(-(((x - 90) / 60.0) ** 2 + ((y - 140) / 52.0) ** 2))
            v = base + bump
            px[x, y] = (
                int(round(255 * min(1.0, v * 1.05))),
                int(round(255 * v)),
                int(round(255 * min(1.0, v * 0.92))),
            )
    img.save(path)


def expect(condition, message):
    if not condition:
        sys.exit(f"FAIL: {message}")
    print(f"  ok: {message}")


def main():
    with tempfile.TemporaryDirectory() as tmp_str:
        tmp = Path(tmp_str)
        fb = import_extension(tmp)
        print(f"imported flickerband_py {fb.__version__}")

        # Parameter type: defaults, validation, TOML round trip.
        params = fb.BandingParams(width_w=10.0, gap_g=30.0, v_y=0.5, feather_px=0.0)
        expect(params.period == 40.0, "period getter returns width + gap")
        params.validate()
        round_tripped = fb.BandingParams.from_toml(params.to_toml())
        expect(
            round_tripped.width_w == params.width_w
            and round_tripped.v_y == params.v_y,
            "params survive a TOML round trip",
        )
        try:
            fb.BandingParams(v_y=1.5)
            sys.exit("FAIL: out-of-range v_y accepted")
        except ValueError:
            print("  ok: constructor rejects out-of-range v_y")

        # Mask rendering: hard axis-aligned stripes have analytic coverage.
        w, h, weights = fb.stripe_mask(params, 512, 512)
        expect(len(weights) == w * h, "stripe_mask returns a full weight grid")
        coverage = sum(weights) / len(weights)
        expect(abs(coverage - 130.0 / 512.0) < 1e-9, f"hard-stripe coverage {coverage:.6f}")

        # Simulation on a Pillow-generated clean image.
        clean = tmp / "clean.png"
        make_clean_image(clean)
        summary = fb.simulate(str(clean), str(tmp / "demo"), params)
        lq_path = Path(summary["lq"])
        mask_path = Path(summary["mask"])
        expect(lq_path.is_file() and mask_path.is_file(), "simulate writes lq and mask")
        expect(len(summary["trace_digest"]) == 64, "trace digest is a sha-256 hex string")
        expect(0.0 < summary["mask_coverage"] < 1.0, "mask coverage is a proper fraction")

        # Estimator round trip on the degraded image.
        est = fb.estimate(str(lq_path))
        expect(est["detected"], "estimator detects the synthetic banding")
        expect(
            abs(est["period_px"] - 40.0) / 40.0 < 0.02,
            f"estimated period {est['period_px']:.2f} within 2% of 40",
        )
        expect(abs(est["theta_deg"]) < 0.5, f"estimated angle {est['theta_deg']:.3f} deg near 0")

        neg = fb.estimate(str(clean))
        expect(not neg["detected"], "clean input reports no banding")

        # Evaluation: identical pair scores perfectly.
        same = fb.evaluate_pair(str(clean), str(clean), str(mask_path))
        expect(same["psnr"] == 100.0, "identical pair hits the psnr cap")
        expect(same["merged"] == 0.0, "identical pair has zero merged loss")
        degraded_score = fb.evaluate_pair(str(lq_path), str(clean), str(mask_path))
        expect(degraded_score["merged"] > 0.0, "degraded pair scores above zero")
        expect(degraded_score["psnr"] < 40.0, "degraded pair sits below the cap")

        # Batch + verify + manifest reading.
        src = tmp / "src"
        src.mkdir()
        for i in range(2):
            make_clean_image(src / f"clean_{i}.png", size=(96, 80))
        out = tmp / "dataset"
        batch_summary = fb.batch(str(src), str(out), seed=11, workers=2)
        expect(batch_summary["records"] == 2, "batch yields one record per source")
        expect(batch_summary["skipped"] == [], "nothing skipped on a clean corpus")

        manifest = batch_summary["manifest"]
        verdict = fb.verify(str(manifest))
        expect(
            verdict["passed"] == verdict["total"] == 2 and verdict["failures"] == [],
            "fresh dataset verifies bit for bit",
        )

        records = fb.read_manifest(str(manifest))
        expect(len(records) == 2, "manifest lists both records")
        first = records[0]
        expect(isinstance(first["params"], fb.BandingParams), "params come back typed")
        expect((out / first["lq_path"]).is_file(), "record paths resolve against the dataset dir")

    print("smoke test passed")


if __name__ == "__main__":
    main()
