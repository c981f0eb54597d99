//! Independent LAS byte builder used to exercise the parser. Assembles
//! headers and point records directly from the published layout, without
//! touching the production reader.

use canopylab::pointcloud::LidarPoint;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct LasLayout {
    /// 2, 3, or 4.
    pub version_minor: u8,
    /// 0-3, 6, 7.
    pub format: u8,
    pub scale: (f64, f64, f64),
    pub offset: (f64, f64, f64),
    /// Extra per-record payload beyond the standard size.
    pub extra_record_bytes: u16,
    /// Filler between header and point data, standing in for VLRs.
    pub padding_after_header: u32,
    /// For 1.4 files: put the count only in the legacy u32 field.
    pub legacy_count_only: bool,
}

impl Default for LasLayout {
    fn default() -> Self {
        LasLayout {
            version_minor: 2,
            format: 0,
            scale: (0.01, 0.01, 0.01),
            offset: (0.0, 0.0, 0.0),
            extra_record_bytes: 0,
            padding_after_header: 0,
            legacy_count_only: false,
        }
    }
}

pub fn header_size(version_minor: u8) -> usize {
    match version_minor {
        2 => 227,
        3 => 235,
        _ => 375,
    }
}

pub fn standard_record_len(format: u8) -> usize {
    match format {
        0 => 20,
        1 => 28,
        2 => 26,
        3 => 34,
        6 => 30,
        7 => 36,
        other => panic!("no layout for format {other}"),
    }
}

/// Serialize points into a LAS file per the layout.
pub fn write_las(points: &[LidarPoint], layout: &LasLayout) -> Vec<u8> {
    let hsize = header_size(layout.version_minor);
    let record_len = standard_record_len(layout.format) + layout.extra_record_bytes as usize;
    let point_offset = hsize + layout.padding_after_header as usize;

    let mut h = vec![0u8; hsize];
    h[0..4].copy_from_slice(b"LASF");
    h[24] = 1;
    h[25] = layout.version_minor;
    h[94..96].copy_from_slice(&(hsize as u16).to_le_bytes());
    h[96..100].copy_from_slice(&(point_offset as u32).to_le_bytes());
    h[104] = layout.format;
    h[105..107].copy_from_slice(&(record_len as u16).to_le_bytes());
    let count = points.len() as u64;
    if layout.version_minor < 4 || layout.legacy_count_only {
        h[107..111].copy_from_slice(&(count as u32).to_le_bytes());
    }
    h[131..139].copy_from_slice(&layout.scale.0.to_le_bytes());
    h[139..147].copy_from_slice(&layout.scale.1.to_le_bytes());
    h[147..155].copy_from_slice(&layout.scale.2.to_le_bytes());
    h[155..163].copy_from_slice(&layout.offset.0.to_le_bytes());
    h[163..171].copy_from_slice(&layout.offset.1.to_le_bytes());
    h[171..179].copy_from_slice(&layout.offset.2.to_le_bytes());
    // Extent fields (max/min x, y, z); informational.
    let fold = |f: fn(f64, f64) -> f64, pick: fn(&LidarPoint) -> f64, init: f64| {
        points.iter().map(pick).fold(init, f)
    };
    let exts = [
        fold(f64::max, |p| p.x, f64::NEG_INFINITY),
        fold(f64::min, |p| p.x, f64::INFINITY),
        fold(f64::max, |p| p.y, f64::NEG_INFINITY),
        fold(f64::min, |p| p.y, f64::INFINITY),
        fold(f64::max, |p| p.z, f64::NEG_INFINITY),
        fold(f64::min, |p| p.z, f64::INFINITY),
    ];
    for (slot, v) in exts.iter().enumerate() {
        let at = 179 + slot * 8;
        h[at..at + 8].copy_from_slice(&v.to_le_bytes());
    }
    if layout.version_minor == 4 && !layout.legacy_count_only {
        h[247..255].copy_from_slice(&count.to_le_bytes());
    }

    let mut out = h;
    out.extend(std::iter::repeat_n(0u8, layout.padding_after_header as usize));
    for p in points {
        out.extend_from_slice(&record_bytes(p, layout, record_len));
    }
    out
}

fn record_bytes(p: &LidarPoint, layout: &LasLayout, record_len: usize) -> Vec<u8> {
    let mut rec = vec![0u8; record_len];
    let raw = |v: f64, scale: f64, offset: f64| ((v - offset) / scale).round() as i32;
    rec[0..4].copy_from_slice(&raw(p.x, layout.scale.0, layout.offset.0).to_le_bytes());
    rec[4..8].copy_from_slice(&raw(p.y, layout.scale.1, layout.offset.1).to_le_bytes());
    rec[8..12].copy_from_slice(&raw(p.z, layout.scale.2, layout.offset.2).to_le_bytes());
    rec[12..14].copy_from_slice(&p.intensity.to_le_bytes());
    if layout.format >= 6 {
        rec[14] = (p.return_number & 0x0f) | (p.num_returns << 4);
    } else {
        rec[14] = (p.return_number & 0x07) | ((p.num_returns & 0x07) << 3);
    }
    rec
}

/// A cloud whose coordinates are exactly representable under the layout's
/// scale/offset, so a decode must reproduce every field bit for bit.
pub fn grid_aligned_cloud(n: usize, layout: &LasLayout, seed: u64) -> Vec<LidarPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_returns = if layout.format >= 6 { 15 } else { 7 };
    (0..n)
        .map(|_| {
            let num_returns = rng.random_range(1..=max_returns);
            LidarPoint {
                x: layout.offset.0 + rng.random_range(-5_000_000..5_000_000) as f64 * layout.scale.0,
                y: layout.offset.1 + rng.random_range(-5_000_000..5_000_000) as f64 * layout.scale.1,
                z: layout.offset.2 + rng.random_range(-500_000..500_000) as f64 * layout.scale.2,
                intensity: rng.random_range(0..=u16::MAX),
                return_number: rng.random_range(1..=num_returns),
                num_returns,
            }
        })
        .collect()
}
