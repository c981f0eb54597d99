//! Desk-scale synthetic scenes: tree clusters, flat-roofed buildings, and
//! ground, emitted as a LiDAR-style point cloud plus per-epoch 4-band imagery
//! and truth masks.
//!
//! The physics mirrors what the labeling rule keys on. Canopy pulses mostly
//! split into several returns spread over the tree height; roofs return one
//! pulse at a constant elevation; building edges return a roof/ground pair,
//! which plants the classic false-positive imprint along walls. A later epoch
//! can drop tree clusters (storm analog); imagery then shows ground there.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pointcloud::{LidarPoint, PointCloud};
use crate::raster::{BinaryMask, GridSpec, MultibandRaster};

pub const IMAGE_BANDS: [&str; 4] = ["nir", "red", "green", "blue"];

/// Scene layout and sensor knobs. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    /// Cells per side of the statistics grid; must be even.
    pub grid: usize,
    /// Statistics grid cell size in meters; imagery uses twice this.
    pub cell_size: f64,
    pub tree_clusters: usize,
    /// Cluster radius range, meters.
    pub cluster_radius: (f64, f64),
    /// Tree height range, meters.
    pub canopy_height: (f64, f64),
    /// Probability a canopy pulse splits into multiple returns.
    pub multi_return_prob: f64,
    pub buildings: usize,
    /// Building footprint side range, meters.
    pub building_size: (f64, f64),
    /// Building height range, meters.
    pub building_height: (f64, f64),
    pub ground_z: f64,
    /// Pulses per square meter.
    pub point_density: f64,
    /// Per-class spectral means, NIR/R/G/B in 0..=255.
    pub tree_spectrum: [f64; 4],
    pub ground_spectrum: [f64; 4],
    pub building_spectrum: [f64; 4],
    /// Imagery noise standard deviation.
    pub noise_sigma: f64,
    /// Epoch labels, strictly increasing.
    pub years: Vec<u16>,
    /// Fraction of tree pixels removed between the first and second epoch.
    pub removal_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        SyntheticSceneSpec {
            grid: 256,
            cell_size: 0.5,
            tree_clusters: 24,
            cluster_radius: (4.0, 8.0),
            canopy_height: (5.0, 10.0),
            multi_return_prob: 0.85,
            buildings: 4,
            building_size: (8.0, 16.0),
            building_height: (6.0, 12.0),
            ground_z: 0.0,
            point_density: 8.0,
            tree_spectrum: [200.0, 60.0, 90.0, 50.0],
            ground_spectrum: [120.0, 110.0, 130.0, 85.0],
            building_spectrum: [90.0, 170.0, 170.0, 165.0],
            noise_sigma: 8.0,
            years: vec![2011, 2013, 2015],
            removal_fraction: 0.14,
            seed: 7,
        }
    }
}

impl SyntheticSceneSpec {
    fn validate(&self) -> Result<()> {
        if self.grid < 2 || !self.grid.is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                name: "grid",
                msg: format!("must be even and at least 2, got {}", self.grid),
            });
        }
        if !self.cell_size.is_finite() || self.cell_size <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "cell_size",
                msg: "must be positive".into(),
            });
        }
        if self.years.is_empty() {
            return Err(Error::InvalidParameter {
                name: "years",
                msg: "at least one epoch required".into(),
            });
        }
        if self.years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter {
                name: "years",
                msg: format!("must be strictly increasing, got {:?}", self.years),
            });
        }
        if !(0.0..1.0).contains(&self.removal_fraction) {
            return Err(Error::InvalidParameter {
                name: "removal_fraction",
                msg: "must lie in [0, 1)".into(),
            });
        }
        if !self.point_density.is_finite() || self.point_density <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "point_density",
                msg: "must be positive".into(),
            });
        }
        let spectra = [
            self.tree_spectrum,
            self.ground_spectrum,
            self.building_spectrum,
        ];
        for a in 0..spectra.len() {
            for b in a + 1..spectra.len() {
                if spectra[a] == spectra[b] {
                    return Err(Error::InvalidParameter {
                        name: "spectra",
                        msg: "class spectra must be distinct".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Everything an end-to-end run needs, in memory.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    /// Survey matching the first epoch (every cluster standing).
    pub cloud: PointCloud,
    /// Half-meter-style statistics grid.
    pub stats_spec: GridSpec,
    /// Meter-style imagery grid (half the cells per side).
    pub image_spec: GridSpec,
    pub imagery: Vec<(u16, MultibandRaster)>,
    pub truth: Vec<(u16, BinaryMask)>,
}

#[derive(Debug, Clone, Copy)]
struct Circle {
    x: f64,
    y: f64,
    r: f64,
    height: f64,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    height: f64,
}

impl Rect {
    fn contains(&self, x: f64, y: f64, pad: f64) -> bool {
        x >= self.x0 - pad && x <= self.x1 + pad && y >= self.y0 - pad && y <= self.y1 + pad
    }
}

/// Width of the roof/ground double-return band around building walls.
const EDGE_BAND: f64 = 0.7;
/// Clearance kept between placed footprints.
const FOOTPRINT_GAP: f64 = 2.0;
const PLACEMENT_ATTEMPTS: usize = 400;

pub fn generate_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let side = spec.grid as f64 * spec.cell_size;
    let stats_spec = GridSpec::new(0.0, side, spec.cell_size, spec.grid, spec.grid)?;
    let image_spec = GridSpec::new(0.0, side, 2.0 * spec.cell_size, spec.grid / 2, spec.grid / 2)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (trees, buildings) = place_footprints(spec, side, &mut rng)?;
    let cloud = sample_cloud(spec, side, &trees, &buildings, &mut rng);

    // Decide which clusters the storm removes between epochs one and two.
    let px_per_cluster = cluster_pixel_counts(&image_spec, &trees);
    let total_tree_px: u64 = px_per_cluster.iter().sum();
    let mut removed = vec![false; trees.len()];
    if spec.years.len() > 1 && spec.removal_fraction > 0.0 && total_tree_px > 0 {
        let target = (total_tree_px as f64 * spec.removal_fraction).ceil() as u64;
        let mut order: Vec<usize> = (0..trees.len()).collect();
        for i in 0..order.len() {
            let j = i + rng.random_range(0..order.len() - i);
            order.swap(i, j);
        }
        let mut gone = 0u64;
        for idx in order {
            if gone >= target {
                break;
            }
            removed[idx] = true;
            gone += px_per_cluster[idx];
        }
    }

    let mut imagery = Vec::with_capacity(spec.years.len());
    let mut truth = Vec::with_capacity(spec.years.len());
    for (epoch, &year) in spec.years.iter().enumerate() {
        let standing: Vec<Circle> = trees
            .iter()
            .enumerate()
            .filter(|(i, _)| epoch == 0 || !removed[*i])
            .map(|(_, c)| *c)
            .collect();
        let mut year_rng = ChaCha8Rng::seed_from_u64(
            spec.seed
                .wrapping_add((year as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let (img, mask) = render_epoch(spec, &image_spec, &standing, &buildings, &mut year_rng)?;
        imagery.push((year, img));
        truth.push((year, mask));
    }

    Ok(SyntheticScene {
        cloud,
        stats_spec,
        image_spec,
        imagery,
        truth,
    })
}

fn place_footprints(
    spec: &SyntheticSceneSpec,
    side: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Circle>, Vec<Rect>)> {
    let mut trees: Vec<Circle> = Vec::with_capacity(spec.tree_clusters);
    let mut buildings: Vec<Rect> = Vec::with_capacity(spec.buildings);

    let clear_of_all = |trees: &[Circle], buildings: &[Rect], x: f64, y: f64, r: f64| {
        for t in trees {
            let d2 = (t.x - x).powi(2) + (t.y - y).powi(2);
            if d2.sqrt() < t.r + r + FOOTPRINT_GAP {
                return false;
            }
        }
        for b in buildings {
            // Distance from the circle center to the rectangle.
            let cx = x.clamp(b.x0, b.x1);
            let cy = y.clamp(b.y0, b.y1);
            if ((cx - x).powi(2) + (cy - y).powi(2)).sqrt() < r + FOOTPRINT_GAP {
                return false;
            }
        }
        true
    };

    for _ in 0..spec.buildings {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let w = rng.random_range(spec.building_size.0..=spec.building_size.1);
            let h = rng.random_range(spec.building_size.0..=spec.building_size.1);
            let margin = 2.0 + EDGE_BAND;
            if side <= 2.0 * margin + w || side <= 2.0 * margin + h {
                continue;
            }
            let x0 = rng.random_range(margin..side - margin - w);
            let y0 = rng.random_range(margin..side - margin - h);
            let rect = Rect {
                x0,
                y0,
                x1: x0 + w,
                y1: y0 + h,
                height: rng.random_range(spec.building_height.0..=spec.building_height.1),
            };
            // Rect-rect clearance against existing buildings, circle clearance
            // against trees (none placed yet, kept for clarity).
            let rect_ok = buildings.iter().all(|b| {
                rect.x0 - FOOTPRINT_GAP > b.x1
                    || b.x0 - FOOTPRINT_GAP > rect.x1
                    || rect.y0 - FOOTPRINT_GAP > b.y1
                    || b.y0 - FOOTPRINT_GAP > rect.y1
            });
            if rect_ok {
                buildings.push(rect);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidParameter {
                name: "buildings",
                msg: "scene too crowded: building footprints overlap".into(),
            });
        }
    }

    for _ in 0..spec.tree_clusters {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let r = rng.random_range(spec.cluster_radius.0..=spec.cluster_radius.1);
            let margin = r + 1.0;
            if side <= 2.0 * margin {
                continue;
            }
            let x = rng.random_range(margin..side - margin);
            let y = rng.random_range(margin..side - margin);
            // Trees must also clear building edge bands.
            let near_building = buildings.iter().any(|b| {
                let cx = x.clamp(b.x0 - EDGE_BAND, b.x1 + EDGE_BAND);
                let cy = y.clamp(b.y0 - EDGE_BAND, b.y1 + EDGE_BAND);
                ((cx - x).powi(2) + (cy - y).powi(2)).sqrt() < r + FOOTPRINT_GAP
            });
            if !near_building && clear_of_all(&trees, &[], x, y, r) {
                trees.push(Circle {
                    x,
                    y,
                    r,
                    height: rng.random_range(spec.canopy_height.0..=spec.canopy_height.1),
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidParameter {
                name: "tree_clusters",
                msg: "scene too crowded: tree footprints overlap".into(),
            });
        }
    }

    Ok((trees, buildings))
}

fn sample_cloud(
    spec: &SyntheticSceneSpec,
    side: f64,
    trees: &[Circle],
    buildings: &[Rect],
    rng: &mut ChaCha8Rng,
) -> PointCloud {
    let pulses = (side * side * spec.point_density) as usize;
    let mut points = Vec::with_capacity(pulses + pulses / 2);
    for _ in 0..pulses {
        let x = rng.random_range(0.0..side);
        let y = rng.random_range(0.0..side);

        if let Some(b) = buildings.iter().find(|b| b.contains(x, y, EDGE_BAND)) {
            if b.contains(x, y, -EDGE_BAND) {
                // Roof interior: one return at the constant roof elevation.
                points.push(LidarPoint {
                    x,
                    y,
                    z: spec.ground_z + b.height,
                    intensity: rng.random_range(180..=220),
                    return_number: 1,
                    num_returns: 1,
                });
            } else {
                // Wall zone: the pulse clips the roof edge and reaches ground.
                let intensity = rng.random_range(120..=200);
                points.push(LidarPoint {
                    x,
                    y,
                    z: spec.ground_z + b.height,
                    intensity,
                    return_number: 1,
                    num_returns: 2,
                });
                points.push(LidarPoint {
                    x,
                    y,
                    z: spec.ground_z,
                    intensity,
                    return_number: 2,
                    num_returns: 2,
                });
            }
            continue;
        }

        if let Some(t) = trees
            .iter()
            .find(|t| (t.x - x).powi(2) + (t.y - y).powi(2) <= t.r * t.r)
        {
            let multi = rng.random_bool(spec.multi_return_prob);
            let k: u8 = if multi {
                if rng.random_bool(0.5) { 3 } else { 2 }
            } else {
                1
            };
            let mut zs: Vec<f64> = (0..k)
                .map(|_| spec.ground_z + rng.random_range(0.1..t.height))
                .collect();
            zs.sort_by(|a, b| b.total_cmp(a));
            for (j, z) in zs.into_iter().enumerate() {
                points.push(LidarPoint {
                    x,
                    y,
                    z,
                    intensity: rng.random_range(80..=140),
                    return_number: j as u8 + 1,
                    num_returns: k,
                });
            }
            continue;
        }

        points.push(LidarPoint {
            x,
            y,
            z: spec.ground_z + rng.random_range(-0.05..0.05),
            intensity: rng.random_range(40..=90),
            return_number: 1,
            num_returns: 1,
        });
    }
    PointCloud::new(points, format!("synthetic scene seed {}", spec.seed))
}

fn cluster_pixel_counts(image_spec: &GridSpec, trees: &[Circle]) -> Vec<u64> {
    let mut counts = vec![0u64; trees.len()];
    for row in 0..image_spec.height {
        for col in 0..image_spec.width {
            let (x, y) = image_spec.center_of(row, col).expect("in range");
            if let Some(idx) = trees
                .iter()
                .position(|t| (t.x - x).powi(2) + (t.y - y).powi(2) <= t.r * t.r)
            {
                counts[idx] += 1;
            }
        }
    }
    counts
}

fn render_epoch(
    spec: &SyntheticSceneSpec,
    image_spec: &GridSpec,
    standing: &[Circle],
    buildings: &[Rect],
    rng: &mut ChaCha8Rng,
) -> Result<(MultibandRaster, BinaryMask)> {
    let n = image_spec.len();
    let mut planes = vec![vec![0.0f64; n]; 4];
    let mut bits = vec![false; n];
    for row in 0..image_spec.height {
        for col in 0..image_spec.width {
            let (x, y) = image_spec.center_of(row, col).expect("in range");
            let i = image_spec.index(row, col);
            let tree = standing
                .iter()
                .any(|t| (t.x - x).powi(2) + (t.y - y).powi(2) <= t.r * t.r);
            let mean = if buildings.iter().any(|b| b.contains(x, y, 0.0)) {
                &spec.building_spectrum
            } else if tree {
                bits[i] = true;
                &spec.tree_spectrum
            } else {
                &spec.ground_spectrum
            };
            for (band, plane) in planes.iter_mut().enumerate() {
                let v = mean[band] + spec.noise_sigma * gaussian(rng);
                plane[i] = v.clamp(0.0, 255.0);
            }
        }
    }
    let img = MultibandRaster::new(
        *image_spec,
        IMAGE_BANDS.iter().map(|s| s.to_string()).collect(),
        planes,
        vec![false; n],
    )?;
    let mask = BinaryMask::new(*image_spec, bits, vec![true; n])?;
    Ok((img, mask))
}

/// Standard normal via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
