//! Sliding-circle rasterization of point clouds into per-cell statistics.
//!
//! For every grid cell, the neighborhood is the closed disk of the given
//! radius around the cell center. Over the points inside it we accumulate
//! min, max, mean, and population standard deviation of elevation, returns
//! per pulse, and intensity, plus a point-count band: 13 bands total.
//!
//! Output is bit-identical regardless of thread count and of input point
//! order. Per neighborhood, candidate points are put into a canonical order
//! (sorted by field values) before summation, so identical point sets always
//! accumulate identically.

use crate::error::{Error, Result};
use crate::parallel::map_rows;
use crate::pointcloud::PointCloud;
use crate::raster::{GridSpec, MultibandRaster};

/// Canonical band names, quantity-major, `count` last.
pub const STACK_BANDS: [&str; 13] = [
    "elevation.min",
    "elevation.max",
    "elevation.mean",
    "elevation.std",
    "num_returns.min",
    "num_returns.max",
    "num_returns.mean",
    "num_returns.std",
    "intensity.min",
    "intensity.max",
    "intensity.mean",
    "intensity.std",
    "count",
];

/// True for names a rule expression may reference.
pub fn is_stack_band(name: &str) -> bool {
    STACK_BANDS.contains(&name)
}

/// The 12 statistics layers plus point count, on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsStack {
    pub multiband: MultibandRaster,
    /// Neighborhood radius in meters the stack was built with.
    pub radius: f64,
}

impl StatsStack {
    /// Wrap an existing multiband raster, checking the band vocabulary.
    pub fn from_multiband(multiband: MultibandRaster, radius: f64) -> Result<StatsStack> {
        if multiband.band_names.len() != STACK_BANDS.len()
            || multiband
                .band_names
                .iter()
                .zip(STACK_BANDS.iter())
                .any(|(a, b)| a != b)
        {
            return Err(Error::BandMismatch {
                msg: format!(
                    "statistics stack wants bands {STACK_BANDS:?}, found {:?}",
                    multiband.band_names
                ),
            });
        }
        Ok(StatsStack { multiband, radius })
    }

    pub fn band(&self, name: &str) -> Option<&[f64]> {
        self.multiband.band(name)
    }
}

/// Rasterize a cloud into the 13-band statistics stack.
pub fn rasterize_stats(cloud: &PointCloud, spec: &GridSpec, radius: f64) -> Result<StatsStack> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "radius",
            msg: format!("must be a positive finite number, got {radius}"),
        });
    }

    // Bucket points into an expanded copy of the output grid so that points
    // just outside the output extent still reach edge-cell neighborhoods.
    let ring = (radius / spec.cell_size + 0.5).ceil() as i64 + 1;
    let ring_us = ring as usize;
    let bucket_spec = GridSpec {
        origin_x: spec.origin_x - ring as f64 * spec.cell_size,
        origin_y: spec.origin_y + ring as f64 * spec.cell_size,
        cell_size: spec.cell_size,
        width: spec.width + 2 * ring_us,
        height: spec.height + 2 * ring_us,
    };
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); bucket_spec.len()];
    for (i, p) in cloud.points.iter().enumerate() {
        if let Some((r, c)) = bucket_spec.cell_of(p.x, p.y) {
            buckets[bucket_spec.index(r, c)].push(i as u32);
        }
    }

    let r2 = radius * radius;
    let rows = map_rows(spec.height, |row| {
        let mut cells = Vec::with_capacity(spec.width);
        let mut neighborhood: Vec<[f64; 3]> = Vec::new();
        for col in 0..spec.width {
            let (cx, cy) = spec.center_of(row, col).expect("in range");
            neighborhood.clear();
            let br = row + ring_us;
            let bc = col + ring_us;
            for dr in -ring..=ring {
                let rr = br as i64 + dr;
                if rr < 0 || rr as usize >= bucket_spec.height {
                    continue;
                }
                for dc in -ring..=ring {
                    let cc = bc as i64 + dc;
                    if cc < 0 || cc as usize >= bucket_spec.width {
                        continue;
                    }
                    for &pi in &buckets[bucket_spec.index(rr as usize, cc as usize)] {
                        let p = &cloud.points[pi as usize];
                        let dx = p.x - cx;
                        let dy = p.y - cy;
                        if dx * dx + dy * dy <= r2 {
                            neighborhood.push([p.z, p.num_returns as f64, p.intensity as f64]);
                        }
                    }
                }
            }
            cells.push(cell_stats(&mut neighborhood));
        }
        cells
    });

    let n_cells = spec.len();
    let mut planes = vec![vec![0.0f64; n_cells]; STACK_BANDS.len()];
    let mut nodata = vec![true; n_cells];
    for (row, cells) in rows.into_iter().enumerate() {
        for (col, cell) in cells.into_iter().enumerate() {
            let i = spec.index(row, col);
            if let Some(stats) = cell {
                for (b, v) in stats.into_iter().enumerate() {
                    planes[b][i] = v;
                }
                nodata[i] = false;
            }
        }
    }

    let multiband = MultibandRaster::new(
        *spec,
        STACK_BANDS.iter().map(|s| s.to_string()).collect(),
        planes,
        nodata,
    )?;
    Ok(StatsStack {
        multiband,
        radius,
    })
}

/// Statistics for one neighborhood, or `None` when it is empty.
///
/// Sorting establishes the canonical accumulation order; rows that tie on
/// every field are interchangeable, so the sums do not depend on how the
/// caller ordered its input.
fn cell_stats(neighborhood: &mut [[f64; 3]]) -> Option<[f64; 13]> {
    if neighborhood.is_empty() {
        return None;
    }
    neighborhood.sort_unstable_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n = neighborhood.len() as f64;
    let mut out = [0.0f64; 13];
    for q in 0..3 {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for row in neighborhood.iter() {
            let v = row[q];
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        let mean = sum / n;
        let mut ss = 0.0;
        for row in neighborhood.iter() {
            let d = row[q] - mean;
            ss += d * d;
        }
        let base = q * 4;
        out[base] = min;
        out[base + 1] = max;
        out[base + 2] = mean;
        out[base + 3] = (ss / n).sqrt();
    }
    out[12] = n;
    Some(out)
}

/// The figure-style false-color composite: R mean elevation, G max returns
/// per pulse, B standard deviation of intensity.
pub fn stack_to_pseudo_rgb(stack: &StatsStack) -> MultibandRaster {
    let names = ["elevation.mean", "num_returns.max", "intensity.std"];
    let planes = names
        .iter()
        .map(|n| stack.multiband.band(n).expect("canonical band").to_vec())
        .collect();
    MultibandRaster::new(
        stack.multiband.spec,
        names.iter().map(|s| s.to_string()).collect(),
        planes,
        stack.multiband.nodata.clone(),
    )
    .expect("bands share the stack grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{LidarPoint, parse_xyz_text};

    fn grid(w: usize, h: usize, cell: f64) -> GridSpec {
        GridSpec::new(0.0, h as f64 * cell, cell, w, h).unwrap()
    }

    #[test]
    fn radius_must_be_positive() {
        let cloud = PointCloud::new(vec![], "empty");
        let spec = grid(4, 4, 0.5);
        assert!(matches!(
            rasterize_stats(&cloud, &spec, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn single_point_covers_cells_within_radius() {
        // One point at the center of cell (4,4) on a 10x10 grid of 0.5 m cells.
        let spec = grid(10, 10, 0.5);
        let (px, py) = spec.center_of(4, 4).unwrap();
        let cloud = parse_xyz_text(&format!("{px} {py} 12.5 300 1 2")).unwrap();
        let stack = rasterize_stats(&cloud, &spec, 0.75).unwrap();
        let elev_mean = stack.band("elevation.mean").unwrap();
        let count = stack.band("count").unwrap();
        let std = stack.band("elevation.std").unwrap();
        for r in 0..10 {
            for c in 0..10 {
                let (cx, cy) = spec.center_of(r, c).unwrap();
                let d2 = (cx - px).powi(2) + (cy - py).powi(2);
                let i = spec.index(r, c);
                if d2 <= 0.75 * 0.75 {
                    assert!(!stack.multiband.nodata[i], "cell ({r},{c}) should be valid");
                    assert_eq!(elev_mean[i], 12.5);
                    assert_eq!(std[i], 0.0);
                    assert_eq!(count[i], 1.0);
                } else {
                    assert!(stack.multiband.nodata[i], "cell ({r},{c}) should be nodata");
                }
            }
        }
    }

    #[test]
    fn two_point_population_statistics() {
        let spec = grid(4, 4, 0.5);
        let (cx, cy) = spec.center_of(1, 1).unwrap();
        let cloud = parse_xyz_text(&format!("{cx} {cy} 10\n{cx} {cy} 20\n")).unwrap();
        let stack = rasterize_stats(&cloud, &spec, 0.75).unwrap();
        let i = spec.index(1, 1);
        assert_eq!(stack.band("elevation.min").unwrap()[i], 10.0);
        assert_eq!(stack.band("elevation.max").unwrap()[i], 20.0);
        assert_eq!(stack.band("elevation.mean").unwrap()[i], 15.0);
        assert_eq!(stack.band("elevation.std").unwrap()[i], 5.0);
        assert_eq!(stack.band("count").unwrap()[i], 2.0);
    }

    #[test]
    fn num_returns_statistic_uses_pulse_totals() {
        let spec = grid(2, 2, 1.0);
        let (cx, cy) = spec.center_of(0, 0).unwrap();
        // return 2 of 3: the statistic tracks 3, not 2.
        let cloud = parse_xyz_text(&format!("{cx} {cy} 1 0 2 3")).unwrap();
        let stack = rasterize_stats(&cloud, &spec, 0.4).unwrap();
        let i = spec.index(0, 0);
        assert_eq!(stack.band("num_returns.max").unwrap()[i], 3.0);
    }

    #[test]
    fn permutation_of_input_is_bit_identical() {
        use rand::{RngExt, SeedableRng, seq::SliceRandom};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let spec = grid(12, 12, 0.5);
        let mut points: Vec<LidarPoint> = (0..400)
            .map(|_| LidarPoint {
                x: rng.random_range(-0.5..6.5),
                y: rng.random_range(-0.5..6.5),
                z: rng.random_range(0.0..30.0),
                intensity: rng.random_range(0..4000),
                return_number: 1,
                num_returns: rng.random_range(1..=4),
            })
            .collect();
        let a = rasterize_stats(&PointCloud::new(points.clone(), "a"), &spec, 0.75).unwrap();
        points.shuffle(&mut rng);
        let b = rasterize_stats(&PointCloud::new(points, "b"), &spec, 0.75).unwrap();
        assert_eq!(a.multiband, b.multiband);
    }

    #[test]
    fn translation_equivariance() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let points: Vec<LidarPoint> = (0..200)
            .map(|_| LidarPoint {
                x: rng.random_range(0.0..5.0),
                y: rng.random_range(0.0..5.0),
                z: rng.random_range(0.0..10.0),
                intensity: rng.random_range(0..100),
                return_number: 1,
                num_returns: 1,
            })
            .collect();
        let spec = grid(10, 10, 0.5);
        let a = rasterize_stats(&PointCloud::new(points.clone(), "a"), &spec, 0.75).unwrap();

        // Shift by whole meters so the arithmetic stays exact.
        let (dx, dy) = (128.0, -64.0);
        let shifted: Vec<LidarPoint> = points
            .iter()
            .map(|p| LidarPoint {
                x: p.x + dx,
                y: p.y + dy,
                ..*p
            })
            .collect();
        let spec2 = GridSpec {
            origin_x: spec.origin_x + dx,
            origin_y: spec.origin_y + dy,
            ..spec
        };
        let b = rasterize_stats(&PointCloud::new(shifted, "b"), &spec2, 0.75).unwrap();
        assert_eq!(a.multiband.planes, b.multiband.planes);
        assert_eq!(a.multiband.nodata, b.multiband.nodata);
    }

    #[test]
    fn pseudo_rgb_band_order() {
        let spec = grid(4, 4, 0.5);
        let (cx, cy) = spec.center_of(1, 1).unwrap();
        let cloud = parse_xyz_text(&format!("{cx} {cy} 10\n{cx} {cy} 20\n")).unwrap();
        let stack = rasterize_stats(&cloud, &spec, 0.75).unwrap();
        let rgb = stack_to_pseudo_rgb(&stack);
        let i = spec.index(1, 1);
        // R channel carries mean elevation.
        assert_eq!(rgb.planes[0][i], 15.0);
        assert_eq!(rgb.band_names[2], "intensity.std");
        assert_eq!(rgb.planes[2], *stack.band("intensity.std").unwrap());
    }

    #[test]
    fn pseudo_rgb_all_nodata_propagates() {
        let spec = grid(3, 3, 0.5);
        let stack = rasterize_stats(&PointCloud::new(vec![], "empty"), &spec, 0.75).unwrap();
        let rgb = stack_to_pseudo_rgb(&stack);
        assert!(rgb.nodata.iter().all(|&n| n));
    }
}
