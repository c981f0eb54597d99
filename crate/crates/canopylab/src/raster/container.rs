//! The multiband container: a little-endian binary format for band stacks and
//! binary masks.
//!
//! Layout: magic `CNPY`, version u16, band count u16, width u32, height u32,
//! cell_size f64, origin_x f64, origin_y f64, then per band a u16 name length,
//! the UTF-8 name, row-major f32 values, and a nodata bitmap (1 bit per cell,
//! row-major, MSB first, each row padded to a whole byte).
//!
//! Values are stored as f32; reading widens exactly, so container -> memory ->
//! container is byte-identical. Masks ride the same format as one band named
//! `mask` with 0/1 values and the validity carried by the nodata bitmap.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GridSpec, MultibandRaster};

const MAGIC: &[u8; 4] = b"CNPY";
const VERSION: u16 = 1;
pub const MASK_BAND: &str = "mask";

fn row_bitmap_len(width: usize) -> usize {
    width.div_ceil(8)
}

/// Serialize a multiband raster.
pub fn write_multiband(mb: &MultibandRaster) -> Vec<u8> {
    let spec = &mb.spec;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(mb.band_count() as u16).to_le_bytes());
    out.extend_from_slice(&(spec.width as u32).to_le_bytes());
    out.extend_from_slice(&(spec.height as u32).to_le_bytes());
    out.extend_from_slice(&spec.cell_size.to_le_bytes());
    out.extend_from_slice(&spec.origin_x.to_le_bytes());
    out.extend_from_slice(&spec.origin_y.to_le_bytes());
    for (name, plane) in mb.band_names.iter().zip(&mb.planes) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for v in plane {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        for row in 0..spec.height {
            let mut bytes = vec![0u8; row_bitmap_len(spec.width)];
            for col in 0..spec.width {
                if mb.nodata[spec.index(row, col)] {
                    bytes[col / 8] |= 0x80 >> (col % 8);
                }
            }
            out.extend_from_slice(&bytes);
        }
    }
    out
}

/// Parse a multiband container.
pub fn read_multiband(bytes: &[u8]) -> Result<MultibandRaster> {
    let mut cur = Reader { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::Malformed {
            context: "multiband container",
            detail: "bad magic".into(),
        });
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(Error::Unsupported {
            what: format!("container version {version}"),
        });
    }
    let band_count = cur.u16()? as usize;
    let width = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let cell_size = cur.f64()?;
    let origin_x = cur.f64()?;
    let origin_y = cur.f64()?;
    if band_count == 0 {
        return Err(Error::Malformed {
            context: "multiband container",
            detail: "zero bands".into(),
        });
    }
    let spec = GridSpec::new(origin_x, origin_y, cell_size, width, height).map_err(|e| {
        Error::Malformed {
            context: "multiband container",
            detail: e.to_string(),
        }
    })?;

    let n = spec.len();
    let mut band_names = Vec::with_capacity(band_count);
    let mut planes = Vec::with_capacity(band_count);
    let mut nodata = vec![false; n];
    for _ in 0..band_count {
        let name_len = cur.u16()? as usize;
        let name_bytes = cur.take(name_len)?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| Error::Malformed {
                context: "multiband container",
                detail: "band name is not UTF-8".into(),
            })?
            .to_string();
        let mut plane = Vec::with_capacity(n);
        for _ in 0..n {
            plane.push(cur.f32()? as f64);
        }
        for row in 0..height {
            let row_bytes = cur.take(row_bitmap_len(width))?;
            for col in 0..width {
                if row_bytes[col / 8] & (0x80 >> (col % 8)) != 0 {
                    nodata[spec.index(row, col)] = true;
                }
            }
        }
        band_names.push(name);
        planes.push(plane);
    }
    MultibandRaster::new(spec, band_names, planes, nodata)
}

/// Store a binary mask as a 1-band container.
pub fn write_mask(mask: &BinaryMask) -> Vec<u8> {
    let values = mask
        .bits
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let nodata = mask.valid.iter().map(|v| !v).collect();
    let mb = MultibandRaster::new(mask.spec, vec![MASK_BAND.to_string()], vec![values], nodata)
        .expect("mask dimensions are consistent");
    write_multiband(&mb)
}

/// Read a binary mask back from its 1-band container.
pub fn read_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let mb = read_multiband(bytes)?;
    if mb.band_count() != 1 || mb.band_names[0] != MASK_BAND {
        return Err(Error::BandMismatch {
            msg: format!(
                "mask container wants a single `{MASK_BAND}` band, found {:?}",
                mb.band_names
            ),
        });
    }
    let bits = mb.planes[0].iter().map(|&v| v != 0.0).collect();
    let valid = mb.nodata.iter().map(|n| !n).collect();
    BinaryMask::new(mb.spec, bits, valid)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or(Error::Malformed {
            context: "multiband container",
            detail: "length overflow".into(),
        })?;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                offset: self.bytes.len(),
                needed: end - self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
