//! Tree-cover change between two temporal masks, plus the red loss overlay.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::map_rows;
use crate::raster::{BinaryMask, MultibandRaster, require_same_grid};
use crate::raster::png_export::{encode_rgb, to_byte};

/// Rectangular area of interest in cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AoiWindow {
    pub col0: usize,
    pub row0: usize,
    pub width: usize,
    pub height: usize,
}

impl AoiWindow {
    fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row0
            && row < self.row0 + self.height
            && col >= self.col0
            && col < self.col0 + self.width
    }
}

/// Epoch-to-epoch tree cover comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeReport {
    /// Tree pixels in the earlier epoch (within the AOI, jointly valid cells).
    pub area_t1_px: u64,
    /// Tree pixels in the later epoch.
    pub area_t2_px: u64,
    /// 100 * (area_t2 - area_t1) / area_t1.
    pub relative_change_pct: f64,
    /// Tree in t1 and not in t2.
    pub loss_mask: BinaryMask,
    /// Tree in t2 and not in t1.
    pub gain_mask: BinaryMask,
    pub window: Option<AoiWindow>,
}

/// Compare two epochs of tree masks on one grid.
///
/// Only cells valid in both masks count; cells valid in a single epoch are
/// excluded from both areas. A zero-tree baseline refuses to report rather
/// than divide by zero.
pub fn change(
    mask_t1: &BinaryMask,
    mask_t2: &BinaryMask,
    aoi: Option<AoiWindow>,
) -> Result<ChangeReport> {
    require_same_grid(&mask_t1.spec, &mask_t2.spec, "change epochs")?;
    let spec = mask_t1.spec;
    if let Some(w) = &aoi
        && (w.width == 0
            || w.height == 0
            || w.col0 + w.width > spec.width
            || w.row0 + w.height > spec.height)
        {
            return Err(Error::OutOfRange {
                msg: format!(
                    "AOI {w:?} does not fit a {}x{} grid",
                    spec.width, spec.height
                ),
            });
        }

    struct RowAcc {
        t1: u64,
        t2: u64,
        loss_bits: Vec<bool>,
        gain_bits: Vec<bool>,
        valid: Vec<bool>,
    }

    let rows = map_rows(spec.height, |row| {
        let mut acc = RowAcc {
            t1: 0,
            t2: 0,
            loss_bits: vec![false; spec.width],
            gain_bits: vec![false; spec.width],
            valid: vec![false; spec.width],
        };
        for col in 0..spec.width {
            if let Some(w) = &aoi
                && !w.contains(row, col) {
                    continue;
                }
            let i = spec.index(row, col);
            if !(mask_t1.valid[i] && mask_t2.valid[i]) {
                continue;
            }
            acc.valid[col] = true;
            let (b1, b2) = (mask_t1.bits[i], mask_t2.bits[i]);
            acc.t1 += b1 as u64;
            acc.t2 += b2 as u64;
            acc.loss_bits[col] = b1 && !b2;
            acc.gain_bits[col] = !b1 && b2;
        }
        acc
    });

    let mut area_t1 = 0u64;
    let mut area_t2 = 0u64;
    let mut loss_bits = Vec::with_capacity(spec.len());
    let mut gain_bits = Vec::with_capacity(spec.len());
    let mut valid = Vec::with_capacity(spec.len());
    for acc in rows {
        area_t1 += acc.t1;
        area_t2 += acc.t2;
        loss_bits.extend(acc.loss_bits);
        gain_bits.extend(acc.gain_bits);
        valid.extend(acc.valid);
    }

    if area_t1 == 0 {
        return Err(Error::UndefinedBaseline);
    }
    let relative_change_pct = 100.0 * (area_t2 as f64 - area_t1 as f64) / area_t1 as f64;

    Ok(ChangeReport {
        area_t1_px: area_t1,
        area_t2_px: area_t2,
        relative_change_pct,
        loss_mask: BinaryMask::new(spec, loss_bits, valid.clone())?,
        gain_mask: BinaryMask::new(spec, gain_bits, valid)?,
        window: aoi,
    })
}

/// Render the first three bands of `base` with loss cells alpha-blended
/// toward pure red: out = (1 - alpha) * base + alpha * (255, 0, 0).
///
/// Band values are treated as 8-bit intensities; fractional results truncate
/// toward zero, which keeps alpha = 0 byte-identical to a plain RGB export.
pub fn overlay_png(base: &MultibandRaster, loss: &BinaryMask, alpha: f64) -> Result<Vec<u8>> {
    require_same_grid(&base.spec, &loss.spec, "overlay base vs loss mask")?;
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            msg: format!("must lie in [0, 1], got {alpha}"),
        });
    }
    if base.band_count() < 3 {
        return Err(Error::BandMismatch {
            msg: format!("overlay needs at least 3 bands, found {}", base.band_count()),
        });
    }

    let spec = base.spec;
    let rows = map_rows(spec.height, |row| {
        let mut line = Vec::with_capacity(spec.width * 3);
        for col in 0..spec.width {
            let i = spec.index(row, col);
            if base.nodata[i] {
                line.extend_from_slice(&[0, 0, 0]);
                continue;
            }
            let lost = loss.valid[i] && loss.bits[i];
            for (band, red) in [(0usize, 255.0), (1, 0.0), (2, 0.0)] {
                let v = base.planes[band][i];
                let out = if lost { (1.0 - alpha) * v + alpha * red } else { v };
                line.push(to_byte(out));
            }
        }
        line
    });
    let mut pixels = Vec::with_capacity(spec.len() * 3);
    for line in rows {
        pixels.extend(line);
    }
    encode_rgb(spec.width, spec.height, &pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridSpec;

    fn mask(bits: Vec<bool>, valid: Vec<bool>, w: usize, h: usize) -> BinaryMask {
        let spec = GridSpec::new(0.0, h as f64, 1.0, w, h).unwrap();
        BinaryMask::new(spec, bits, valid).unwrap()
    }

    #[test]
    fn identical_masks_report_zero_change() {
        let bits: Vec<bool> = (0..16).map(|i| i % 3 == 0).collect();
        let a = mask(bits.clone(), vec![true; 16], 4, 4);
        let b = mask(bits, vec![true; 16], 4, 4);
        let r = change(&a, &b, None).unwrap();
        assert_eq!(r.relative_change_pct, 0.0);
        assert_eq!(r.loss_mask.count_set(), 0);
        assert_eq!(r.gain_mask.count_set(), 0);
    }

    #[test]
    fn zero_baseline_is_refused() {
        let a = mask(vec![false; 16], vec![true; 16], 4, 4);
        let b = mask(vec![true; 16], vec![true; 16], 4, 4);
        assert!(matches!(change(&a, &b, None), Err(Error::UndefinedBaseline)));
    }

    #[test]
    fn loss_and_gain_partition_the_difference() {
        let t1 = mask(vec![true, true, false, false], vec![true; 4], 2, 2);
        let t2 = mask(vec![true, false, true, false], vec![true; 4], 2, 2);
        let r = change(&t1, &t2, None).unwrap();
        assert_eq!(r.area_t1_px, 2);
        assert_eq!(r.area_t2_px, 2);
        assert_eq!(r.loss_mask.bits, vec![false, true, false, false]);
        assert_eq!(r.gain_mask.bits, vec![false, false, true, false]);
        // area_t2 = area_t1 - |loss| + |gain|
        assert_eq!(
            r.area_t2_px,
            r.area_t1_px - r.loss_mask.count_set() + r.gain_mask.count_set()
        );
    }

    #[test]
    fn aoi_restricts_the_count() {
        let bits = vec![
            true, true, false, false, //
            true, true, false, false, //
            false, false, true, false, //
            false, false, false, true,
        ];
        let t1 = mask(bits.clone(), vec![true; 16], 4, 4);
        let t2 = mask(vec![false; 16], vec![true; 16], 4, 4);
        let aoi = AoiWindow {
            col0: 0,
            row0: 0,
            width: 2,
            height: 2,
        };
        let r = change(&t1, &t2, Some(aoi)).unwrap();
        assert_eq!(r.area_t1_px, 4);
        assert_eq!(r.relative_change_pct, -100.0);
        assert!(!r.loss_mask.valid[10], "cells outside the AOI stay invalid");
    }

    #[test]
    fn aoi_must_fit() {
        let a = mask(vec![true; 16], vec![true; 16], 4, 4);
        let w = AoiWindow {
            col0: 2,
            row0: 2,
            width: 4,
            height: 1,
        };
        assert!(matches!(
            change(&a, &a, Some(w)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn table_percentage_arithmetic() {
        // 10 000 -> 8 600 tree pixels is exactly -14 percent.
        let w = 200;
        let h = 50;
        let n = w * h;
        let t1: Vec<bool> = (0..n).map(|_| true).collect();
        let t2: Vec<bool> = (0..n).map(|i| i >= 1400).collect();
        let a = mask(t1, vec![true; n], w, h);
        let b = mask(t2, vec![true; n], w, h);
        let r = change(&a, &b, None).unwrap();
        assert_eq!(r.area_t1_px, 10_000);
        assert_eq!(r.area_t2_px, 8_600);
        assert_eq!(r.relative_change_pct, -14.0);
    }

    #[test]
    fn overlay_alpha_one_paints_pure_red() {
        use crate::raster::{GridSpec, MultibandRaster};
        let spec = GridSpec::new(0.0, 2.0, 1.0, 2, 2).unwrap();
        let base = MultibandRaster::new(
            spec,
            vec!["r".into(), "g".into(), "b".into()],
            vec![vec![37.0; 4], vec![98.0; 4], vec![211.0; 4]],
            vec![false; 4],
        )
        .unwrap();
        let loss = BinaryMask::new(spec, vec![true; 4], vec![true; 4]).unwrap();
        let bytes = overlay_png(&base, &loss, 1.0).unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(&bytes[..]));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0u8; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        assert_eq!(buf, [255, 0, 0].repeat(4));
    }

    #[test]
    fn overlay_touches_only_loss_pixels() {
        use crate::raster::{GridSpec, MultibandRaster};
        use crate::raster::png_export::export_png_rgb;
        let spec = GridSpec::new(0.0, 1.0, 1.0, 3, 1).unwrap();
        let base = MultibandRaster::new(
            spec,
            vec!["r".into(), "g".into(), "b".into()],
            vec![vec![10.0, 20.0, 30.0]; 3],
            vec![false; 3],
        )
        .unwrap();
        let loss = BinaryMask::new(spec, vec![false, true, false], vec![true; 3]).unwrap();
        let decode = |bytes: &[u8]| -> Vec<u8> {
            let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
            let mut reader = decoder.read_info().unwrap();
            let mut buf = vec![0u8; reader.output_buffer_size().unwrap()];
            let info = reader.next_frame(&mut buf).unwrap();
            buf.truncate(info.buffer_size());
            buf
        };
        let blended = decode(&overlay_png(&base, &loss, 0.7).unwrap());
        let plain = decode(&export_png_rgb(&base, Some((0.0, 255.0))).unwrap());
        assert_eq!(&blended[0..3], &plain[0..3]);
        assert_ne!(&blended[3..6], &plain[3..6]);
        assert_eq!(&blended[6..9], &plain[6..9]);
    }

    #[test]
    fn asymmetric_validity_is_excluded_from_both_areas() {
        let t1 = mask(vec![true, true, true, true], vec![true, true, false, true], 2, 2);
        let t2 = mask(vec![true, false, true, true], vec![true, true, true, false], 2, 2);
        let r = change(&t1, &t2, None).unwrap();
        // Only cells 0 and 1 are jointly valid.
        assert_eq!(r.area_t1_px, 2);
        assert_eq!(r.area_t2_px, 1);
    }
}
