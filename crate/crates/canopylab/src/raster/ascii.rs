//! Esri ASCII grid reader/writer for single-band rasters.
//!
//! Header lines `ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize`, and
//! `NODATA_value` are followed by rows top to bottom. Values are printed in
//! Rust's shortest exact form, so write-then-read reproduces every value
//! bit-for-bit; the nodata sentinel appears only in the file.

use crate::error::{Error, Result};
use crate::raster::{GridSpec, Raster};

const NODATA_SENTINEL: f64 = -9999.0;

/// Serialize a raster as an ASCII grid.
pub fn write_ascii_grid(raster: &Raster) -> String {
    let spec = &raster.spec;
    let yll = spec.origin_y - spec.height as f64 * spec.cell_size;
    let mut out = String::new();
    out.push_str(&format!("ncols {}\n", spec.width));
    out.push_str(&format!("nrows {}\n", spec.height));
    out.push_str(&format!("xllcorner {}\n", spec.origin_x));
    out.push_str(&format!("yllcorner {}\n", yll));
    out.push_str(&format!("cellsize {}\n", spec.cell_size));
    out.push_str(&format!("NODATA_value {}\n", NODATA_SENTINEL));
    for row in 0..spec.height {
        let mut first = true;
        for col in 0..spec.width {
            if !first {
                out.push(' ');
            }
            first = false;
            let i = spec.index(row, col);
            if raster.nodata[i] {
                out.push_str(&format!("{NODATA_SENTINEL}"));
            } else {
                out.push_str(&format!("{}", raster.values[i]));
            }
        }
        out.push('\n');
    }
    out
}

/// Parse an ASCII grid.
pub fn read_ascii_grid(text: &str) -> Result<Raster> {
    let mut lines = text.lines().enumerate();
    let mut header = std::collections::HashMap::new();
    for _ in 0..6 {
        let (idx, line) = lines.next().ok_or(Error::ParseLine {
            line: 0,
            msg: "ASCII grid header ended early".into(),
        })?;
        let mut parts = line.split_whitespace();
        let key = parts.next().ok_or(Error::ParseLine {
            line: idx + 1,
            msg: "empty header line".into(),
        })?;
        let value = parts.next().ok_or(Error::ParseLine {
            line: idx + 1,
            msg: format!("header key `{key}` missing its value"),
        })?;
        header.insert(key.to_ascii_lowercase(), (idx + 1, value.to_string()));
    }

    let field = |key: &str| -> Result<(usize, String)> {
        header.get(key).cloned().ok_or(Error::ParseLine {
            line: 0,
            msg: format!("header key `{key}` missing"),
        })
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        let (line, v) = field(key)?;
        v.parse().map_err(|_| Error::ParseLine {
            line,
            msg: format!("bad {key} value `{v}`"),
        })
    };
    let parse_usize = |key: &str| -> Result<usize> {
        let (line, v) = field(key)?;
        v.parse().map_err(|_| Error::ParseLine {
            line,
            msg: format!("bad {key} value `{v}`"),
        })
    };

    let ncols = parse_usize("ncols")?;
    let nrows = parse_usize("nrows")?;
    let xll = parse_f64("xllcorner")?;
    let yll = parse_f64("yllcorner")?;
    let cell = parse_f64("cellsize")?;
    let nodata_value = parse_f64("nodata_value")?;

    let spec = GridSpec::new(xll, yll + nrows as f64 * cell, cell, ncols, nrows)?;
    let mut values = vec![0.0; spec.len()];
    let mut nodata = vec![false; spec.len()];
    let mut filled = 0usize;
    for (idx, line) in lines {
        for tok in line.split_whitespace() {
            if filled >= spec.len() {
                return Err(Error::ParseLine {
                    line: idx + 1,
                    msg: format!("more than {} data values", spec.len()),
                });
            }
            let v: f64 = tok.parse().map_err(|_| Error::ParseLine {
                line: idx + 1,
                msg: format!("bad cell value `{tok}`"),
            })?;
            if v == nodata_value {
                nodata[filled] = true;
            } else {
                values[filled] = v;
            }
            filled += 1;
        }
    }
    if filled != spec.len() {
        return Err(Error::ParseLine {
            line: 0,
            msg: format!("expected {} data values, found {filled}", spec.len()),
        });
    }
    Raster::from_values(spec, values, nodata)
}
