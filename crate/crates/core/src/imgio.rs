//! Image and file I/O: 8-bit PNG storage, quantization, atomic writes.
//!
//! Float images are stored as 8-bit PNGs with `round(255 * v)` quantization,
//! so a stored value reloads within 1/510 of the original. All writes go
//! through a temp file in the destination directory followed by a rename;
//! readers never observe partial files.

use std::io::Cursor;
use std::path::Path;

use crate::color::RgbImage;
use crate::error::{Error, Result};
use crate::mask::FlickerMask;
use crate::metrics::DistMap;

/// Quantizes a unit-range float to 8 bits.
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Inverse of [`quantize_u8`].
pub fn dequantize_u8(q: u8) -> f64 {
    q as f64 / 255.0
}

/// Writes bytes to `path` atomically (temp file + rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-write-")
        .tempfile_in(dir)
        .map_err(|e| Error::io(path, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Loads any decodable image as planar RGB floats in [0, 1].
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let decoded = image::open(path)
        .map_err(|e| Error::image(path, e))?
        .into_rgb8();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let n = w * h;
    let mut r = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut b = vec![0.0; n];
    for (i, px) in decoded.pixels().enumerate() {
        r[i] = dequantize_u8(px.0[0]);
        g[i] = dequantize_u8(px.0[1]);
        b[i] = dequantize_u8(px.0[2]);
    }
    RgbImage::from_planes(w, h, r, g, b)
}

/// Encodes a float image as an 8-bit RGB PNG in memory.
pub fn encode_rgb_png(img: &RgbImage) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut buf = image::RgbImage::new(w, h);
    for (i, px) in buf.pixels_mut().enumerate() {
        px.0 = [
            quantize_u8(img.r[i]),
            quantize_u8(img.g[i]),
            quantize_u8(img.b[i]),
        ];
    }
    let mut bytes = Vec::new();
    buf.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::image("<memory>", e))?;
    Ok(bytes)
}

/// Saves a float image as an 8-bit RGB PNG, atomically.
pub fn save_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    atomic_write(path, &encode_rgb_png(img)?)
}

/// Encodes a mask as a single-channel 8-bit PNG (`round(255 * m)`).
pub fn encode_mask_png(mask: &FlickerMask) -> Result<Vec<u8>> {
    let (w, h) = (mask.width() as u32, mask.height() as u32);
    let mut buf = image::GrayImage::new(w, h);
    for (i, px) in buf.pixels_mut().enumerate() {
        px.0 = [quantize_u8(mask.data[i])];
    }
    let mut bytes = Vec::new();
    buf.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::image("<memory>", e))?;
    Ok(bytes)
}

/// Saves a mask as a single-channel 8-bit PNG, atomically.
pub fn save_mask_png(path: &Path, mask: &FlickerMask) -> Result<()> {
    atomic_write(path, &encode_mask_png(mask)?)
}

/// Loads a single-channel 8-bit PNG back into a float mask.
pub fn load_mask_png(path: &Path) -> Result<FlickerMask> {
    let decoded = image::open(path)
        .map_err(|e| Error::image(path, e))?
        .into_luma8();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = decoded.into_raw().into_iter().map(dequantize_u8).collect();
    FlickerMask::from_data(w, h, data)
}

/// Loads a precomputed distance map stored as a grayscale PNG.
///
/// Values are divided by the bit-depth maximum (255 or 65535).
pub fn load_dist_png(path: &Path) -> Result<DistMap> {
    let decoded = image::open(path).map_err(|e| Error::image(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        image::DynamicImage::ImageLuma16(img) => img
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        other => other
            .into_luma8()
            .into_raw()
            .into_iter()
            .map(dequantize_u8)
            .collect(),
    };
    DistMap::from_data(w, h, data)
}

/// Loads a raw distance map: two little-endian u32 dims, then w*h
/// little-endian f32 values row-major.
pub fn load_dist_f32(path: &Path) -> Result<DistMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::Manifest(format!(
            "{} is too short for a distance map header",
            path.display()
        )));
    }
    let w = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let h = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let expect = 8 + 4 * w * h;
    if bytes.len() != expect {
        return Err(Error::Manifest(format!(
            "{} holds {} bytes, expected {} for {}x{}",
            path.display(),
            bytes.len(),
            expect,
            w,
            h
        )));
    }
    let data = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    DistMap::from_data(w, h, data)
}
