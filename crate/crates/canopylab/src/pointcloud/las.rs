//! LAS 1.2–1.4 reader for point record formats 0–3 and 6–7.
//!
//! Only the fields this pipeline consumes are decoded: scaled coordinates,
//! intensity, and the return counters. Everything else in a record (GPS time,
//! RGB, classification, extra bytes) is skipped by stride. All values are
//! little-endian per the format. LAZ-compressed files are rejected.

use super::{LidarPoint, PointCloud};
use crate::error::{Error, Result};

const SIGNATURE: &[u8; 4] = b"LASF";

/// Minimum record length per point data format id.
fn format_min_len(format: u8) -> Option<usize> {
    match format {
        0 => Some(20),
        1 => Some(28),
        2 => Some(26),
        3 => Some(34),
        6 => Some(30),
        7 => Some(36),
        _ => None,
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn need(&self, offset: usize, len: usize) -> Result<&'a [u8]> {
        let end = offset.checked_add(len).ok_or(Error::Malformed {
            context: "LAS header",
            detail: "offset overflow".into(),
        })?;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                offset: self.bytes.len(),
                needed: end - self.bytes.len(),
            });
        }
        Ok(&self.bytes[offset..end])
    }

    fn u8(&self, offset: usize) -> Result<u8> {
        Ok(self.need(offset, 1)?[0])
    }

    fn u16(&self, offset: usize) -> Result<u16> {
        Ok(u16::from_le_bytes(self.need(offset, 2)?.try_into().unwrap()))
    }

    fn u32(&self, offset: usize) -> Result<u32> {
        Ok(u32::from_le_bytes(self.need(offset, 4)?.try_into().unwrap()))
    }

    fn u64(&self, offset: usize) -> Result<u64> {
        Ok(u64::from_le_bytes(self.need(offset, 8)?.try_into().unwrap()))
    }

    fn i32(&self, offset: usize) -> Result<i32> {
        Ok(i32::from_le_bytes(self.need(offset, 4)?.try_into().unwrap()))
    }

    fn f64(&self, offset: usize) -> Result<f64> {
        Ok(f64::from_le_bytes(self.need(offset, 8)?.try_into().unwrap()))
    }
}

/// Parse a complete LAS file held in memory.
pub fn parse_las(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() < 4 || &bytes[0..4] != SIGNATURE {
        return Err(Error::Malformed {
            context: "LAS file",
            detail: "missing LASF signature".into(),
        });
    }
    let cur = Cursor { bytes };

    let version_major = cur.u8(24)?;
    let version_minor = cur.u8(25)?;
    if version_major != 1 || !(2..=4).contains(&version_minor) {
        return Err(Error::Unsupported {
            what: format!("LAS version {version_major}.{version_minor}"),
        });
    }

    let header_size = cur.u16(94)? as usize;
    let min_header = match version_minor {
        2 => 227,
        3 => 235,
        _ => 375,
    };
    if header_size < min_header {
        return Err(Error::Malformed {
            context: "LAS header",
            detail: format!(
                "header size {header_size} below the {min_header} bytes LAS 1.{version_minor} requires"
            ),
        });
    }
    cur.need(0, header_size)?;

    let point_offset = cur.u32(96)? as usize;
    if point_offset < header_size {
        return Err(Error::Malformed {
            context: "LAS header",
            detail: "point data offset lies inside the header".into(),
        });
    }

    let format = cur.u8(104)?;
    if format & 0x80 != 0 {
        return Err(Error::Unsupported {
            what: format!("LAZ compression (point format id {format})"),
        });
    }
    let min_len = format_min_len(format).ok_or_else(|| Error::Unsupported {
        what: format!("point data format {format}"),
    })?;
    let record_len = cur.u16(105)? as usize;
    if record_len < min_len {
        return Err(Error::Malformed {
            context: "LAS header",
            detail: format!("record length {record_len} below format {format} minimum {min_len}"),
        });
    }

    let legacy_count = cur.u32(107)? as u64;
    let count = if version_minor == 4 {
        let extended = cur.u64(247)?;
        if extended != 0 { extended } else { legacy_count }
    } else {
        legacy_count
    };
    let count = usize::try_from(count).map_err(|_| Error::Unsupported {
        what: format!("point count {count} exceeding this platform"),
    })?;

    let scale = (cur.f64(131)?, cur.f64(139)?, cur.f64(147)?);
    let offset = (cur.f64(155)?, cur.f64(163)?, cur.f64(171)?);

    let need = count
        .checked_mul(record_len)
        .and_then(|n| n.checked_add(point_offset))
        .ok_or(Error::Malformed {
            context: "LAS header",
            detail: "point data size overflow".into(),
        })?;
    if need > bytes.len() {
        return Err(Error::Truncated {
            offset: bytes.len(),
            needed: need - bytes.len(),
        });
    }

    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let base = point_offset + i * record_len;
        let raw_x = cur.i32(base)?;
        let raw_y = cur.i32(base + 4)?;
        let raw_z = cur.i32(base + 8)?;
        let intensity = cur.u16(base + 12)?;
        let (return_number, num_returns) = if format >= 6 {
            let flags = cur.u8(base + 14)?;
            (flags & 0x0f, flags >> 4)
        } else {
            let flags = cur.u8(base + 14)?;
            (flags & 0x07, (flags >> 3) & 0x07)
        };
        let p = LidarPoint {
            x: offset.0 + raw_x as f64 * scale.0,
            y: offset.1 + raw_y as f64 * scale.1,
            z: offset.2 + raw_z as f64 * scale.2,
            intensity,
            return_number,
            num_returns,
        };
        p.validate().map_err(|e| Error::Malformed {
            context: "LAS point record",
            detail: format!("record {i}: {e}"),
        })?;
        points.push(p);
    }

    Ok(PointCloud::new(
        points,
        format!("LAS 1.{version_minor} format {format}"),
    ))
}
