//! Deterministic synthetic images: gradients, Gaussian blobs, and smooth
//! value noise. They are band-limited and aperiodic on purpose, which makes
//! them safe "clean" references for detector falsification tests and cheap
//! corpora for batch tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::RgbImage;
use crate::error::Result;
use crate::imgio;

/// Linear ramp along `angle` (radians from the x axis), per-channel offsets
/// so the image is not gray.
pub fn gradient(width: usize, height: usize, angle: f64) -> RgbImage {
    let (sin_a, cos_a) = angle.sin_cos();
    let span = (width as f64 - 1.0).abs() * cos_a.abs() + (height as f64 - 1.0).abs() * sin_a.abs();
    let span = span.max(1.0);
    let mut img = RgbImage::filled(width, height, [0.0, 0.0, 0.0]);
    for y in 0..height {
        for x in 0..width {
            let proj = x as f64 * cos_a + y as f64 * sin_a;
            let t = ((proj / span) + 0.5).rem_euclid(1.0);
            let i = y * width + x;
            img.r[i] = 0.15 + 0.7 * t;
            img.g[i] = 0.15 + 0.7 * (1.0 - t);
            img.b[i] = 0.15 + 0.7 * (0.5 + 0.5 * (t - 0.5).abs());
        }
    }
    img
}

/// Sum of random Gaussian bumps with random colors, rescaled into [0.05, 0.95].
pub fn blobs(width: usize, height: usize, count: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = RgbImage::filled(width, height, [0.0, 0.0, 0.0]);
    let min_edge = width.min(height) as f64;
    for _ in 0..count.max(1) {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let sigma = rng.random_range(min_edge * 0.06..min_edge * 0.25);
        let color = [
            rng.random_range(0.1..1.0),
            rng.random_range(0.1..1.0),
            rng.random_range(0.1..1.0),
        ];
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in 0..height {
            for x in 0..width {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let w = (-(dx * dx + dy * dy) * inv).exp();
                let i = y * width + x;
                img.r[i] += color[0] * w;
                img.g[i] += color[1] * w;
                img.b[i] += color[2] * w;
            }
        }
    }
    rescale(&mut img);
    img
}

/// Bilinearly interpolated coarse random grid: smooth, aperiodic color noise.
pub fn smooth_noise(width: usize, height: usize, cell: usize, seed: u64) -> RgbImage {
    let cell = cell.max(2);
    let gw = width.div_ceil(cell) + 2;
    let gh = height.div_ceil(cell) + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid: Vec<[f64; 3]> = (0..gw * gh)
        .map(|_| {
            [
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ]
        })
        .collect();
    let mut img = RgbImage::filled(width, height, [0.0, 0.0, 0.0]);
    for y in 0..height {
        let gy = y as f64 / cell as f64;
        let y0 = gy as usize;
        let fy = gy - y0 as f64;
        for x in 0..width {
            let gx = x as f64 / cell as f64;
            let x0 = gx as usize;
            let fx = gx - x0 as f64;
            let at = |ix: usize, iy: usize| grid[iy.min(gh - 1) * gw + ix.min(gw - 1)];
            let mut px = [0.0; 3];
            for (c, out) in px.iter_mut().enumerate() {
                let top = at(x0, y0)[c] * (1.0 - fx) + at(x0 + 1, y0)[c] * fx;
                let bot = at(x0, y0 + 1)[c] * (1.0 - fx) + at(x0 + 1, y0 + 1)[c] * fx;
                *out = top * (1.0 - fy) + bot * fy;
            }
            let i = y * width + x;
            img.r[i] = 0.05 + 0.9 * px[0];
            img.g[i] = 0.05 + 0.9 * px[1];
            img.b[i] = 0.05 + 0.9 * px[2];
        }
    }
    img
}

fn rescale(img: &mut RgbImage) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for plane in [&img.r, &img.g, &img.b] {
        for &v in plane {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = (hi - lo).max(1e-12);
    for plane in [&mut img.r, &mut img.g, &mut img.b] {
        for v in plane.iter_mut() {
            *v = 0.05 + 0.9 * (*v - lo) / span;
        }
    }
}

/// The i-th clean image of a virtual corpus: cycles through the generator
/// families with varied parameters. Same (index, size, seed) in, same image
/// out.
pub fn clean_image(index: usize, width: usize, height: usize, seed: u64) -> RgbImage {
    let variant_seed = seed.wrapping_mul(1_000_003).wrapping_add(index as u64);
    match index % 3 {
        0 => gradient(width, height, 0.13 + 0.37 * index as f64),
        1 => blobs(width, height, 4 + index % 5, variant_seed),
        _ => smooth_noise(width, height, 12 + (index % 4) * 7, variant_seed),
    }
}

/// Writes `count` clean PNGs into `dir` (created if missing), named
/// `clean_{index:04}.png`. Returns their paths in index order.
pub fn write_clean_corpus(
    dir: &std::path::Path,
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let img = clean_image(i, width, height, seed);
        let path = dir.join(format!("clean_{:04}.png", i));
        imgio::save_rgb_png(&path, &img)?;
        paths.push(path);
    }
    Ok(paths)
}
