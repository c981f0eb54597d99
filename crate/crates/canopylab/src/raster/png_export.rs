//! PNG export: 8-bit grayscale for a single band, 8-bit RGB for 3-band
//! composites.
//!
//! With no fixed range, each band is scaled by its own min/max over valid
//! cells; fractional intensities truncate toward zero. Nodata renders black.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, MultibandRaster, Raster};

/// Clamp to [0, 255] and truncate to a byte.
pub(crate) fn to_byte(v: f64) -> u8 {
    v.clamp(0.0, 255.0) as u8
}

fn scale(v: f64, lo: f64, hi: f64) -> u8 {
    if hi <= lo {
        return 0;
    }
    to_byte((v - lo) / (hi - lo) * 255.0)
}

fn band_range(values: &[f64], nodata: &[bool]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, n) in values.iter().zip(nodata) {
        if !n {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    (lo, hi)
}

pub(crate) fn encode_gray(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    encode(width, height, pixels, png::ColorType::Grayscale)
}

pub(crate) fn encode_rgb(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    encode(width, height, pixels, png::ColorType::Rgb)
}

fn encode(width: usize, height: usize, pixels: &[u8], color: png::ColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Numeric(format!("PNG header: {e}")))?;
        writer
            .write_image_data(pixels)
            .map_err(|e| Error::Numeric(format!("PNG data: {e}")))?;
    }
    Ok(out)
}

/// Single band to grayscale; `range` fixes the scaling, otherwise min/max.
pub fn export_png_gray(raster: &Raster, range: Option<(f64, f64)>) -> Result<Vec<u8>> {
    let (lo, hi) = range.unwrap_or_else(|| band_range(&raster.values, &raster.nodata));
    let pixels: Vec<u8> = raster
        .values
        .iter()
        .zip(&raster.nodata)
        .map(|(v, n)| if *n { 0 } else { scale(*v, lo, hi) })
        .collect();
    encode_gray(raster.spec.width, raster.spec.height, &pixels)
}

/// First three bands to RGB; `range` applies to every band when given,
/// otherwise each band scales independently.
pub fn export_png_rgb(mb: &MultibandRaster, range: Option<(f64, f64)>) -> Result<Vec<u8>> {
    if mb.band_count() < 3 {
        return Err(Error::BandMismatch {
            msg: format!("RGB export needs at least 3 bands, found {}", mb.band_count()),
        });
    }
    let ranges: Vec<(f64, f64)> = (0..3)
        .map(|b| range.unwrap_or_else(|| band_range(&mb.planes[b], &mb.nodata)))
        .collect();
    let n = mb.spec.len();
    let mut pixels = Vec::with_capacity(n * 3);
    for i in 0..n {
        if mb.nodata[i] {
            pixels.extend_from_slice(&[0, 0, 0]);
        } else {
            for (b, (lo, hi)) in ranges.iter().enumerate() {
                pixels.push(scale(mb.planes[b][i], *lo, *hi));
            }
        }
    }
    encode_rgb(mb.spec.width, mb.spec.height, &pixels)
}

/// Mask to grayscale: tree 255, non-tree 0, invalid mid-gray 128.
pub fn export_png_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let pixels: Vec<u8> = mask
        .bits
        .iter()
        .zip(&mask.valid)
        .map(|(b, v)| match (v, b) {
            (false, _) => 128,
            (true, true) => 255,
            (true, false) => 0,
        })
        .collect();
    encode_gray(mask.spec.width, mask.spec.height, &pixels)
}
