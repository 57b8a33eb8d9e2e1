//! Planar float image containers and the luma/chroma transform pair.
//!
//! Values are full-range floats in [0, 1]. The transform uses the classic
//! K_R = 0.299 / K_B = 0.114 luma weights with analog (unquantized) chroma
//! scaling, so the inverse is an exact algebraic mirror of the forward
//! direction. Nothing is clamped except the final return to RGB.

use crate::error::{Error, Result};

/// Luma weight of the red channel.
pub const KR: f64 = 0.299;
/// Luma weight of the green channel.
pub const KG: f64 = 0.587;
/// Luma weight of the blue channel.
pub const KB: f64 = 0.114;

/// Planar RGB image, each channel `h * w` long in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

impl RgbImage {
    /// Builds an image from three equally sized planes.
    pub fn from_planes(
        width: usize,
        height: usize,
        r: Vec<f64>,
        g: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::DimensionMismatch("image area overflows".into()))?;
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "plane lengths {}/{}/{} do not match {}x{}",
                r.len(),
                g.len(),
                b.len(),
                width,
                height
            )));
        }
        Ok(RgbImage {
            width,
            height,
            r,
            g,
            b,
        })
    }

    /// Constant-color image.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let n = width * height;
        RgbImage {
            width,
            height,
            r: vec![rgb[0]; n],
            g: vec![rgb[1]; n],
            b: vec![rgb[2]; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels per plane.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the two images have identical dimensions.
    pub fn same_shape(&self, other: &RgbImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Planar luma/chroma image matching [`RgbImage`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct YccImage {
    width: usize,
    height: usize,
    pub y: Vec<f64>,
    pub cb: Vec<f64>,
    pub cr: Vec<f64>,
}

impl YccImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same chroma, replaced luma plane.
    pub fn with_luma(&self, y: Vec<f64>) -> crate::error::Result<YccImage> {
        if y.len() != self.len() {
            return Err(crate::error::Error::DimensionMismatch(format!(
                "replacement luma plane has {} samples, image needs {}",
                y.len(),
                self.len()
            )));
        }
        Ok(YccImage {
            width: self.width,
            height: self.height,
            y,
            cb: self.cb.clone(),
            cr: self.cr.clone(),
        })
    }
}

/// Forward transform: Y = 0.299 R + 0.587 G + 0.114 B with analog chroma.
///
/// Cb = (B - Y) / (2 (1 - K_B)), Cr = (R - Y) / (2 (1 - K_R)); chroma is
/// signed and approximately in [-0.5, 0.5] for inputs in [0, 1].
pub fn rgb_to_ycc(img: &RgbImage) -> YccImage {
    let n = img.len();
    let mut y = vec![0.0; n];
    let mut cb = vec![0.0; n];
    let mut cr = vec![0.0; n];
    let cb_scale = 2.0 * (1.0 - KB);
    let cr_scale = 2.0 * (1.0 - KR);
    for i in 0..n {
        let lum = KR * img.r[i] + KG * img.g[i] + KB * img.b[i];
        y[i] = lum;
        cb[i] = (img.b[i] - lum) / cb_scale;
        cr[i] = (img.r[i] - lum) / cr_scale;
    }
    YccImage {
        width: img.width,
        height: img.height,
        y,
        cb,
        cr,
    }
}

/// Inverse transform, clamping the reconstructed RGB into [0, 1].
///
/// R = Y + 2 (1 - K_R) Cr, B = Y + 2 (1 - K_B) Cb, and G recovers the luma
/// residue: G = (Y - K_R R - K_B B) / K_G. Apart from the final clamp this is
/// the exact algebraic inverse of [`rgb_to_ycc`].
pub fn ycc_to_rgb(img: &YccImage) -> RgbImage {
    let n = img.len();
    let mut r = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut b = vec![0.0; n];
    let cb_scale = 2.0 * (1.0 - KB);
    let cr_scale = 2.0 * (1.0 - KR);
    for i in 0..n {
        let red = img.y[i] + cr_scale * img.cr[i];
        let blue = img.y[i] + cb_scale * img.cb[i];
        let green = (img.y[i] - KR * red - KB * blue) / KG;
        r[i] = red.clamp(0.0, 1.0);
        g[i] = green.clamp(0.0, 1.0);
        b[i] = blue.clamp(0.0, 1.0);
    }
    RgbImage {
        width: img.width,
        height: img.height,
        r,
        g,
        b,
    }
}

/// Luma plane of an RGB image.
pub fn luminance(img: &RgbImage) -> Vec<f64> {
    (0..img.len())
        .map(|i| KR * img.r[i] + KG * img.g[i] + KB * img.b[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_maps_to_unit_luma_and_zero_chroma() {
        // KR + KG + KB is 1 in decimal but rounds in binary, so white gets a
        // one-ulp allowance; the pure-primary cases below stay exact.
        let img = RgbImage::filled(2, 1, [1.0, 1.0, 1.0]);
        let ycc = rgb_to_ycc(&img);
        assert!((ycc.y[0] - 1.0).abs() <= 1e-15, "got {}", ycc.y[0]);
        assert!(ycc.cb[0].abs() <= 1e-15);
        assert!(ycc.cr[0].abs() <= 1e-15);
    }

    #[test]
    fn pure_red_luma_is_exactly_kr() {
        let img = RgbImage::filled(1, 1, [1.0, 0.0, 0.0]);
        let ycc = rgb_to_ycc(&img);
        assert_eq!(ycc.y[0], 0.299);
        // (R - Y) / (2 (1 - K_R)) with R = 1: numerator and denominator are
        // the same rounded quantity halved, so the ratio is exactly 0.5.
        assert_eq!(ycc.cr[0], 0.5);
    }

    #[test]
    fn pure_blue_luma_is_exactly_kb() {
        let img = RgbImage::filled(1, 1, [0.0, 0.0, 1.0]);
        let ycc = rgb_to_ycc(&img);
        assert_eq!(ycc.y[0], 0.114);
        assert_eq!(ycc.cb[0], 0.5);
    }

    #[test]
    fn mismatched_planes_are_rejected() {
        let err = RgbImage::from_planes(2, 2, vec![0.0; 4], vec![0.0; 3], vec![0.0; 4]);
        assert!(err.is_err());
    }
}
