//! Gaussian-kernel support vector machine over single-pixel, four-band
//! spectra, trained by sequential minimal optimization.
//!
//! Features are band values divided by 255 in NIR, R, G, B order. The fixed
//! scaling (rather than per-image min/max) lets a model trained on one year's
//! imagery run unchanged on other years.

mod smo;

pub use smo::train_svm;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::parallel::map_rows;
use crate::raster::{BinaryMask, MultibandRaster, require_same_grid};

pub const FEATURE_DIM: usize = 4;
/// Fixed feature scale: band value / 255.
pub const FEATURE_SCALE: f64 = 255.0;

/// Labeled feature vectors; labels are +1 (tree) or -1 (non-tree).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub labels: Vec<i8>,
}

impl SampleSet {
    pub fn new(features: Vec<[f64; FEATURE_DIM]>, labels: Vec<i8>) -> Result<SampleSet> {
        if features.len() != labels.len() {
            return Err(Error::InvalidParameter {
                name: "samples",
                msg: format!("{} features vs {} labels", features.len(), labels.len()),
            });
        }
        if features.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "samples",
                msg: "at least two samples required".into(),
            });
        }
        if !labels.contains(&1) || !labels.contains(&-1) {
            return Err(Error::InvalidParameter {
                name: "samples",
                msg: "both classes must be present".into(),
            });
        }
        if labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(Error::InvalidParameter {
                name: "samples",
                msg: "labels must be +1 or -1".into(),
            });
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        Ok(SampleSet { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Soft-margin SMO settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Box constraint C.
    pub c: f64,
    /// Gaussian kernel width: k(u, v) = exp(-gamma * |u - v|^2).
    pub gamma: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Consecutive violation-free sweeps required before stopping.
    pub max_passes: u32,
    /// Pixels drawn per class when sampling from a mask.
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 10.0,
            gamma: 1.0,
            tol: 1e-3,
            max_passes: 5,
            sample_count: 5000,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C", self.c), ("gamma", self.gamma), ("tol", self.tol)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: match name {
                        "C" => "C",
                        "gamma" => "gamma",
                        _ => "tol",
                    },
                    msg: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Trained classifier: support vectors with signed dual weights and a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<[f64; FEATURE_DIM]>,
    /// alpha_i * y_i per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

pub(crate) fn kernel(gamma: f64, a: &[f64; FEATURE_DIM], b: &[f64; FEATURE_DIM]) -> f64 {
    let mut d2 = 0.0;
    for k in 0..FEATURE_DIM {
        let d = a[k] - b[k];
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// The decision function f(x); classification is `f(x) >= 0` (ties go to +1).
pub fn decision_value(model: &SvmModel, feature: &[f64; FEATURE_DIM]) -> f64 {
    model
        .support_vectors
        .iter()
        .zip(&model.dual_coefs)
        .map(|(sv, coef)| coef * kernel(model.gamma, sv, feature))
        .sum::<f64>()
        + model.bias
}

/// Draw a balanced training set from an image/mask pair sharing one grid.
///
/// `per_class` cells are drawn uniformly without replacement from each class
/// (all of them if fewer exist), deterministically under `seed`. Features are
/// band values / 255.
pub fn extract_training_samples(
    image: &MultibandRaster,
    mask: &BinaryMask,
    per_class: usize,
    seed: u64,
) -> Result<SampleSet> {
    require_same_grid(&image.spec, &mask.spec, "training image vs labels")?;
    require_four_bands(image)?;
    if per_class == 0 {
        return Err(Error::InvalidParameter {
            name: "per_class",
            msg: "must be at least 1".into(),
        });
    }

    let mut tree_cells = Vec::new();
    let mut other_cells = Vec::new();
    for i in 0..mask.spec.len() {
        if mask.valid[i] && !image.nodata[i] {
            if mask.bits[i] {
                tree_cells.push(i);
            } else {
                other_cells.push(i);
            }
        }
    }
    if tree_cells.is_empty() {
        return Err(Error::InsufficientClass { class: "tree" });
    }
    if other_cells.is_empty() {
        return Err(Error::InsufficientClass { class: "non-tree" });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (cells, label) in [(&mut tree_cells, 1i8), (&mut other_cells, -1i8)] {
        let take = per_class.min(cells.len());
        // Partial Fisher-Yates: the first `take` entries become the sample.
        for i in 0..take {
            let j = i + rng.random_range(0..cells.len() - i);
            cells.swap(i, j);
        }
        for &cell in cells.iter().take(take) {
            features.push(cell_feature(image, cell));
            labels.push(label);
        }
    }
    SampleSet::new(features, labels)
}

fn cell_feature(image: &MultibandRaster, cell: usize) -> [f64; FEATURE_DIM] {
    let mut f = [0.0; FEATURE_DIM];
    for (k, slot) in f.iter_mut().enumerate() {
        *slot = image.planes[k][cell] / FEATURE_SCALE;
    }
    f
}

fn require_four_bands(image: &MultibandRaster) -> Result<()> {
    if image.band_count() != FEATURE_DIM {
        return Err(Error::BandMismatch {
            msg: format!(
                "expected the 4 spectral bands, found {} ({:?})",
                image.band_count(),
                image.band_names
            ),
        });
    }
    Ok(())
}

/// Classify every valid pixel of a 4-band image.
pub fn predict_mask(model: &SvmModel, image: &MultibandRaster) -> Result<BinaryMask> {
    require_four_bands(image)?;
    let spec = image.spec;
    let rows = map_rows(spec.height, |row| {
        let mut bits = Vec::with_capacity(spec.width);
        let mut valid = Vec::with_capacity(spec.width);
        for col in 0..spec.width {
            let i = spec.index(row, col);
            if image.nodata[i] {
                bits.push(false);
                valid.push(false);
            } else {
                let f = cell_feature(image, i);
                bits.push(decision_value(model, &f) >= 0.0);
                valid.push(true);
            }
        }
        (bits, valid)
    });
    let mut bits = Vec::with_capacity(spec.len());
    let mut valid = Vec::with_capacity(spec.len());
    for (b, v) in rows {
        bits.extend(b);
        valid.extend(v);
    }
    BinaryMask::new(spec, bits, valid)
}

const MODEL_MAGIC: &[u8; 4] = b"CSVM";
const MODEL_VERSION: u16 = 1;

/// Serialize a model: magic, version, count, gamma, bias, then coefficients
/// and vectors, all little-endian.
pub fn save_model(model: &SvmModel) -> Vec<u8> {
    let m = model.support_vectors.len();
    let mut out = Vec::with_capacity(4 + 2 + 4 + 16 + m * (8 + 32));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&model.gamma.to_le_bytes());
    out.extend_from_slice(&model.bias.to_le_bytes());
    for c in &model.dual_coefs {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for sv in &model.support_vectors {
        for v in sv {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_model(bytes: &[u8]) -> Result<SvmModel> {
    let need = |end: usize| -> Result<()> {
        if end > bytes.len() {
            Err(Error::Truncated {
                offset: bytes.len(),
                needed: end - bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    need(10)?;
    if &bytes[0..4] != MODEL_MAGIC {
        return Err(Error::Malformed {
            context: "SVM model file",
            detail: "bad magic".into(),
        });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::Unsupported {
            what: format!("SVM model version {version}"),
        });
    }
    let m = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let total = 10 + 16 + m * 8 + m * FEATURE_DIM * 8;
    need(total)?;
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let gamma = f64_at(10);
    let bias = f64_at(18);
    let mut dual_coefs = Vec::with_capacity(m);
    for i in 0..m {
        dual_coefs.push(f64_at(26 + i * 8));
    }
    let sv_base = 26 + m * 8;
    let mut support_vectors = Vec::with_capacity(m);
    for i in 0..m {
        let mut sv = [0.0; FEATURE_DIM];
        for (k, slot) in sv.iter_mut().enumerate() {
            *slot = f64_at(sv_base + (i * FEATURE_DIM + k) * 8);
        }
        support_vectors.push(sv);
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Malformed {
            context: "SVM model file",
            detail: format!("non-positive gamma {gamma}"),
        });
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias,
        gamma,
    })
}
