//! Shared test oracles. Everything here is an independent route to the same
//! answers the library computes, deliberately written the slow, obvious way.

#![allow(dead_code)]

pub mod las_oracle;
pub mod qp_oracle;
pub mod rule_oracle;

use canopylab::pointcloud::{LidarPoint, PointCloud};
use canopylab::raster::GridSpec;
use canopylab::svm::{FEATURE_DIM, SampleSet, SvmModel};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-cell statistics by scanning every point for every cell.
/// Returns (cell -> 13 values in band order, cell -> nodata flag).
pub fn brute_force_stats(
    cloud: &PointCloud,
    spec: &GridSpec,
    radius: f64,
) -> (Vec<[f64; 13]>, Vec<bool>) {
    let mut stats = vec![[0.0; 13]; spec.len()];
    let mut nodata = vec![true; spec.len()];
    for row in 0..spec.height {
        for col in 0..spec.width {
            let (cx, cy) = spec.center_of(row, col).unwrap();
            let mut values: Vec<[f64; 3]> = Vec::new();
            for p in &cloud.points {
                if (p.x - cx).powi(2) + (p.y - cy).powi(2) <= radius * radius {
                    values.push([p.z, p.num_returns as f64, p.intensity as f64]);
                }
            }
            if values.is_empty() {
                continue;
            }
            let i = spec.index(row, col);
            nodata[i] = false;
            let n = values.len() as f64;
            for q in 0..3 {
                let vs: Vec<f64> = values.iter().map(|v| v[q]).collect();
                let min = vs.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mean = vs.iter().sum::<f64>() / n;
                let var = vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                stats[i][q * 4] = min;
                stats[i][q * 4 + 1] = max;
                stats[i][q * 4 + 2] = mean;
                stats[i][q * 4 + 3] = var.sqrt();
            }
            stats[i][12] = n;
        }
    }
    (stats, nodata)
}

/// Uniform random cloud over a box, single- and multi-return mix.
pub fn random_cloud(
    n: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    seed: u64,
) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let num_returns = rng.random_range(1..=4u8);
            LidarPoint {
                x: rng.random_range(x_range.0..x_range.1),
                y: rng.random_range(y_range.0..y_range.1),
                z: rng.random_range(0.0..40.0),
                intensity: rng.random_range(0..10_000),
                return_number: rng.random_range(1..=num_returns),
                num_returns,
            }
        })
        .collect();
    PointCloud::new(points, "random test cloud")
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Two spherical Gaussian blobs in feature space, labels +1 then -1.
pub fn gaussian_blobs(
    per_class: usize,
    center_pos: [f64; FEATURE_DIM],
    center_neg: [f64; FEATURE_DIM],
    sigma: f64,
    seed: u64,
) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for (center, label) in [(center_pos, 1i8), (center_neg, -1i8)] {
        for _ in 0..per_class {
            let mut f = [0.0; FEATURE_DIM];
            for (k, slot) in f.iter_mut().enumerate() {
                *slot = center[k] + sigma * gaussian(&mut rng);
            }
            features.push(f);
            labels.push(label);
        }
    }
    SampleSet::new(features, labels).unwrap()
}

/// Dual objective of a trained model: support vectors carry the whole alpha
/// vector because zero coefficients contribute nothing to either term.
pub fn dual_objective_of_model(model: &SvmModel) -> f64 {
    let alpha_sum: f64 = model.dual_coefs.iter().map(|c| c.abs()).sum();
    let m = model.support_vectors.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            let mut d2 = 0.0;
            for k in 0..FEATURE_DIM {
                let d = model.support_vectors[i][k] - model.support_vectors[j][k];
                d2 += d * d;
            }
            quad += model.dual_coefs[i] * model.dual_coefs[j] * (-model.gamma * d2).exp();
        }
    }
    alpha_sum - 0.5 * quad
}
