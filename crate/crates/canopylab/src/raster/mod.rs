//! Geo-referenced grid types shared by every pipeline stage.
//!
//! Grids use a row-0-at-top orientation: cell (r, c) covers
//! `x in [origin_x + c*s, origin_x + (c+1)*s)` and
//! `y in (origin_y - (r+1)*s, origin_y - r*s]` with `s` the cell size, so y
//! decreases as rows increase. Nodata is tracked as a mask, never as a
//! sentinel value; sentinels appear only inside file formats.

pub mod ascii;
pub mod container;
pub mod png_export;

use crate::error::{Error, Result};
use crate::parallel::map_rows;

/// Grid geometry: top-left corner, square cell size, and cell counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        cell_size: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !cell_size.is_finite() || cell_size <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "cell_size",
                msg: format!("must be a positive finite number, got {cell_size}"),
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter {
                name: "width/height",
                msg: format!("must be at least 1, got {width}x{height}"),
            });
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::InvalidParameter {
                name: "origin",
                msg: "must be finite".into(),
            });
        }
        Ok(GridSpec {
            origin_x,
            origin_y,
            cell_size,
            width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat row-major index of cell (row, col).
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// The cell whose half-open extent contains (x, y), if any.
    ///
    /// The x interval is closed on the left, open on the right; the y interval
    /// is closed on the top, open on the bottom. A point on the right or
    /// bottom outer boundary is therefore outside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = ((x - self.origin_x) / self.cell_size).floor();
        // Row r covers (origin_y - (r+1)s, origin_y - r*s], i.e. the distance
        // below the top edge falls in [r, r+1), so a plain floor suffices.
        let row = ((self.origin_y - y) / self.cell_size).floor();
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        if row >= self.height || col >= self.width {
            return None;
        }
        Some((row, col))
    }

    /// Center coordinates of an in-range cell.
    pub fn center_of(&self, row: usize, col: usize) -> Result<(f64, f64)> {
        if row >= self.height || col >= self.width {
            return Err(Error::OutOfRange {
                msg: format!(
                    "cell ({row}, {col}) outside {}x{} grid",
                    self.height, self.width
                ),
            });
        }
        Ok((
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y - (row as f64 + 0.5) * self.cell_size,
        ))
    }

    /// (xmin, ymin, xmax, ymax) of the grid's outer boundary.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y - self.height as f64 * self.cell_size,
            self.origin_x + self.width as f64 * self.cell_size,
            self.origin_y,
        )
    }

    /// True when the two grid extents share positive area.
    pub fn overlaps(&self, other: &GridSpec) -> bool {
        let (ax0, ay0, ax1, ay1) = self.extent();
        let (bx0, by0, bx1, by1) = other.extent();
        ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1
    }

    fn require_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                msg: format!("{what}: {self:?} vs {other:?}"),
            });
        }
        Ok(())
    }
}

/// Single-band grid of real values with a nodata mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub spec: GridSpec,
    /// Row-major cell values; cells flagged nodata carry no meaning.
    pub values: Vec<f64>,
    /// True where the cell has no data.
    pub nodata: Vec<bool>,
}

impl Raster {
    /// All-nodata raster on the given grid.
    pub fn filled_nodata(spec: GridSpec) -> Raster {
        Raster {
            spec,
            values: vec![0.0; spec.len()],
            nodata: vec![true; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>, nodata: Vec<bool>) -> Result<Raster> {
        if values.len() != spec.len() || nodata.len() != spec.len() {
            return Err(Error::GridMismatch {
                msg: format!(
                    "value array length {} / mask length {} vs grid {}x{}",
                    values.len(),
                    nodata.len(),
                    spec.width,
                    spec.height
                ),
            });
        }
        Ok(Raster {
            spec,
            values,
            nodata,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.spec.index(row, col);
        if self.nodata[i] { None } else { Some(self.values[i]) }
    }

    /// Nearest-neighbor resample onto a target grid.
    ///
    /// Each target cell takes the value of the source cell containing the
    /// target cell's center; centers outside the source, or over source
    /// nodata, become nodata.
    pub fn resample_nearest(&self, target: &GridSpec) -> Result<Raster> {
        if self.spec == *target {
            return Ok(self.clone());
        }
        let lookup = source_lookup(&self.spec, target)?;
        let mut values = vec![0.0; target.len()];
        let mut nodata = vec![true; target.len()];
        for (i, src) in lookup.iter().enumerate() {
            if let Some(j) = src
                && !self.nodata[*j] {
                    values[i] = self.values[*j];
                    nodata[i] = false;
                }
        }
        Ok(Raster {
            spec: *target,
            values,
            nodata,
        })
    }
}

/// Ordered named bands over a single grid, sharing one nodata mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MultibandRaster {
    pub spec: GridSpec,
    pub band_names: Vec<String>,
    /// One row-major value plane per band, each `spec.len()` long.
    pub planes: Vec<Vec<f64>>,
    /// Shared nodata mask: true where all bands lack data.
    pub nodata: Vec<bool>,
}

impl MultibandRaster {
    pub fn new(
        spec: GridSpec,
        band_names: Vec<String>,
        planes: Vec<Vec<f64>>,
        nodata: Vec<bool>,
    ) -> Result<MultibandRaster> {
        if band_names.len() != planes.len() {
            return Err(Error::BandMismatch {
                msg: format!("{} names for {} planes", band_names.len(), planes.len()),
            });
        }
        if band_names.is_empty() {
            return Err(Error::BandMismatch {
                msg: "at least one band required".into(),
            });
        }
        for (n, p) in band_names.iter().zip(&planes) {
            if p.len() != spec.len() {
                return Err(Error::GridMismatch {
                    msg: format!("band `{n}` has {} cells, grid wants {}", p.len(), spec.len()),
                });
            }
        }
        if nodata.len() != spec.len() {
            return Err(Error::GridMismatch {
                msg: "nodata mask length does not match grid".into(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for n in &band_names {
            if !seen.insert(n.as_str()) {
                return Err(Error::BandMismatch {
                    msg: format!("duplicate band name `{n}`"),
                });
            }
        }
        Ok(MultibandRaster {
            spec,
            band_names,
            planes,
            nodata,
        })
    }

    pub fn band_count(&self) -> usize {
        self.planes.len()
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.band_names.iter().position(|n| n == name)
    }

    pub fn band(&self, name: &str) -> Option<&[f64]> {
        self.band_index(name).map(|i| self.planes[i].as_slice())
    }

    /// Nearest-neighbor resample of every band onto a target grid.
    pub fn resample_nearest(&self, target: &GridSpec) -> Result<MultibandRaster> {
        if self.spec == *target {
            return Ok(self.clone());
        }
        let lookup = source_lookup(&self.spec, target)?;
        let mut planes = vec![vec![0.0; target.len()]; self.planes.len()];
        let mut nodata = vec![true; target.len()];
        for (i, src) in lookup.iter().enumerate() {
            if let Some(j) = src
                && !self.nodata[*j] {
                    nodata[i] = false;
                    for (b, plane) in self.planes.iter().enumerate() {
                        planes[b][i] = plane[*j];
                    }
                }
        }
        MultibandRaster::new(*target, self.band_names.clone(), planes, nodata)
    }
}

/// Binary segmentation map with an explicit validity mask.
///
/// A cell is (valid, true), (valid, false), or invalid; invalid cells never
/// count as tree or non-tree.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub spec: GridSpec,
    pub bits: Vec<bool>,
    pub valid: Vec<bool>,
}

impl BinaryMask {
    pub fn new(spec: GridSpec, bits: Vec<bool>, valid: Vec<bool>) -> Result<BinaryMask> {
        if bits.len() != spec.len() || valid.len() != spec.len() {
            return Err(Error::GridMismatch {
                msg: "mask array length does not match grid".into(),
            });
        }
        Ok(BinaryMask { spec, bits, valid })
    }

    /// All-invalid mask.
    pub fn invalid(spec: GridSpec) -> BinaryMask {
        BinaryMask {
            spec,
            bits: vec![false; spec.len()],
            valid: vec![false; spec.len()],
        }
    }

    /// Count of valid tree cells.
    pub fn count_set(&self) -> u64 {
        self.bits
            .iter()
            .zip(&self.valid)
            .filter(|(b, v)| **b && **v)
            .count() as u64
    }

    pub fn resample_nearest(&self, target: &GridSpec) -> Result<BinaryMask> {
        if self.spec == *target {
            return Ok(self.clone());
        }
        let lookup = source_lookup(&self.spec, target)?;
        let mut bits = vec![false; target.len()];
        let mut valid = vec![false; target.len()];
        for (i, src) in lookup.iter().enumerate() {
            if let Some(j) = src
                && self.valid[*j] {
                    bits[i] = self.bits[*j];
                    valid[i] = true;
                }
        }
        Ok(BinaryMask {
            spec: *target,
            bits,
            valid,
        })
    }
}

/// Small-integer class grid with a class-name table, e.g. a land cover map.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalRaster {
    pub spec: GridSpec,
    pub classes: Vec<u16>,
    pub class_names: std::collections::BTreeMap<u16, String>,
    pub nodata_id: u16,
}

impl CategoricalRaster {
    pub fn new(
        spec: GridSpec,
        classes: Vec<u16>,
        class_names: std::collections::BTreeMap<u16, String>,
        nodata_id: u16,
    ) -> Result<CategoricalRaster> {
        if classes.len() != spec.len() {
            return Err(Error::GridMismatch {
                msg: "class array length does not match grid".into(),
            });
        }
        for id in &classes {
            if *id != nodata_id && !class_names.contains_key(id) {
                return Err(Error::Malformed {
                    context: "categorical raster",
                    detail: format!("class id {id} missing from the name table"),
                });
            }
        }
        Ok(CategoricalRaster {
            spec,
            classes,
            class_names,
            nodata_id,
        })
    }

    /// Binary mask selecting one class; nodata cells become invalid.
    pub fn class_mask(&self, class_id: u16) -> BinaryMask {
        let bits = self.classes.iter().map(|c| *c == class_id).collect();
        let valid = self.classes.iter().map(|c| *c != self.nodata_id).collect();
        BinaryMask {
            spec: self.spec,
            bits,
            valid,
        }
    }

    pub fn resample_nearest(&self, target: &GridSpec) -> Result<CategoricalRaster> {
        if self.spec == *target {
            return Ok(self.clone());
        }
        let lookup = source_lookup(&self.spec, target)?;
        let classes = lookup
            .iter()
            .map(|src| match src {
                Some(j) => self.classes[*j],
                None => self.nodata_id,
            })
            .collect();
        Ok(CategoricalRaster {
            spec: *target,
            classes,
            class_names: self.class_names.clone(),
            nodata_id: self.nodata_id,
        })
    }
}

/// For each target cell, the flat source index containing its center.
fn source_lookup(src: &GridSpec, target: &GridSpec) -> Result<Vec<Option<usize>>> {
    if !src.overlaps(target) {
        return Err(Error::NoOverlap);
    }
    let rows = map_rows(target.height, |r| {
        let mut row = Vec::with_capacity(target.width);
        for c in 0..target.width {
            let (x, y) = target
                .center_of(r, c)
                .expect("in-range by construction");
            row.push(src.cell_of(x, y).map(|(sr, sc)| src.index(sr, sc)));
        }
        row
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Grid equality check shared by operations that require co-registered inputs.
pub(crate) fn require_same_grid(a: &GridSpec, b: &GridSpec, what: &str) -> Result<()> {
    a.require_same(b, what)
}
