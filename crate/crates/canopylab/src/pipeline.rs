//! Batch pipeline driver: parse a run manifest, execute the stage chain
//! rasterize -> label -> train -> predict -> evaluate -> change -> overlay,
//! and leave a machine-readable index of everything written.
//!
//! Manifests are flat `key = value` text with one `[section]` per stage;
//! `#` starts a comment. Paths are resolved relative to the manifest file.
//! Reruns with the same manifest reproduce every artifact byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::change::{AoiWindow, change, overlay_png};
use crate::error::{Error, Result};
use crate::metrics::{confusion, metrics};
use crate::pointcloud::parse_auto;
use crate::raster::container::{read_mask, read_multiband, write_mask, write_multiband};
use crate::raster::png_export::export_png_rgb;
use crate::raster::{BinaryMask, GridSpec, MultibandRaster};
use crate::rules::{evaluate_rule, parse_rule};
use crate::stats::{rasterize_stats, stack_to_pseudo_rgb};
use crate::svm::{TrainConfig, extract_training_samples, predict_mask, save_model, train_svm};

/// A parsed, validated run manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    /// LAS or text point cloud for the statistics stack.
    pub cloud: PathBuf,
    pub cell_size: f64,
    pub radius: f64,
    /// Rule text labelling the statistics stack.
    pub rule: String,
    /// 4-band imagery the model trains on, and its year.
    pub train_image: PathBuf,
    pub train_year: u16,
    pub train: TrainConfig,
    /// Inference imagery per year, strictly increasing.
    pub infer: Vec<(u16, PathBuf)>,
    /// Optional exact masks per inference year.
    pub truth: Vec<(u16, PathBuf)>,
    pub aoi: Option<AoiWindow>,
    pub overlay_alpha: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// One artifact the pipeline wrote.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub stage: String,
    pub kind: String,
    pub path: String,
}

/// Index of a completed run.
#[derive(Debug, Clone, Serialize)]
pub struct RunIndex {
    pub seed: u64,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Parse manifest text; `base` anchors relative paths.
pub fn parse_manifest(text: &str, base: &Path) -> Result<RunManifest> {
    let mut sections: BTreeMap<String, Vec<(usize, String, String)>> = BTreeMap::new();
    let mut current = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Manifest {
                    line: line_no,
                    msg: "unterminated section header".into(),
                });
            }
            current = line[1..line.len() - 1].trim().to_ascii_lowercase();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Manifest {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        if current.is_empty() {
            return Err(Error::Manifest {
                line: line_no,
                msg: "key outside any [section]".into(),
            });
        }
        sections.get_mut(&current).unwrap().push((
            line_no,
            key.trim().to_ascii_lowercase(),
            value.trim().to_string(),
        ));
    }

    let get = |section: &str, key: &str| -> Option<(usize, String)> {
        sections.get(section).and_then(|kvs| {
            kvs.iter()
                .find(|(_, k, _)| k == key)
                .map(|(l, _, v)| (*l, v.clone()))
        })
    };
    let require = |section: &str, key: &str| -> Result<(usize, String)> {
        get(section, key).ok_or_else(|| Error::Manifest {
            line: 0,
            msg: format!("missing `{key}` in [{section}]"),
        })
    };
    fn parsed<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| Error::Manifest {
            line,
            msg: format!("bad `{key}` value `{v}`"),
        })
    }
    let path_of = |v: &str| -> PathBuf { base.join(v) };

    let (_, cloud) = require("rasterize", "cloud")?;
    let (l, v) = require("rasterize", "cell_size")?;
    let cell_size: f64 = parsed(l, "cell_size", &v)?;
    let (l, v) = require("rasterize", "radius")?;
    let radius: f64 = parsed(l, "radius", &v)?;

    let (_, rule) = require("label", "rule")?;

    let (_, train_image) = require("train", "image")?;
    let (l, v) = require("train", "year")?;
    let train_year: u16 = parsed(l, "year", &v)?;
    let mut train = TrainConfig::default();
    if let Some((l, v)) = get("train", "c") {
        train.c = parsed(l, "c", &v)?;
    }
    if let Some((l, v)) = get("train", "gamma") {
        train.gamma = parsed(l, "gamma", &v)?;
    }
    if let Some((l, v)) = get("train", "tol") {
        train.tol = parsed(l, "tol", &v)?;
    }
    if let Some((l, v)) = get("train", "max_passes") {
        train.max_passes = parsed(l, "max_passes", &v)?;
    }
    if let Some((l, v)) = get("train", "samples") {
        train.sample_count = parsed(l, "samples", &v)?;
    }

    let mut infer = Vec::new();
    let mut truth = Vec::new();
    if let Some(kvs) = sections.get("predict") {
        for (l, k, v) in kvs {
            let Some(year) = k.strip_prefix("year.") else {
                return Err(Error::Manifest {
                    line: *l,
                    msg: format!("[predict] keys look like `year.2011`, got `{k}`"),
                });
            };
            infer.push((parsed::<u16>(*l, "year", year)?, path_of(v)));
        }
    }
    if let Some(kvs) = sections.get("evaluate") {
        for (l, k, v) in kvs {
            let Some(year) = k.strip_prefix("truth.") else {
                return Err(Error::Manifest {
                    line: *l,
                    msg: format!("[evaluate] keys look like `truth.2011`, got `{k}`"),
                });
            };
            truth.push((parsed::<u16>(*l, "year", year)?, path_of(v)));
        }
    }

    let aoi = match get("change", "aoi") {
        Some((l, v)) => Some(parse_aoi(&v).ok_or(Error::Manifest {
            line: l,
            msg: format!("bad `aoi` value `{v}`, want col0,row0,width,height"),
        })?),
        None => None,
    };
    let overlay_alpha = match get("change", "overlay_alpha") {
        Some((l, v)) => parsed(l, "overlay_alpha", &v)?,
        None => 0.5,
    };

    let (_, output_dir) = require("run", "output_dir")?;
    let seed = match get("run", "seed") {
        Some((l, v)) => parsed(l, "seed", &v)?,
        None => 42,
    };
    train.seed = seed;

    let manifest = RunManifest {
        cloud: path_of(&cloud),
        cell_size,
        radius,
        rule,
        train_image: path_of(&train_image),
        train_year,
        train,
        infer,
        truth,
        aoi,
        overlay_alpha,
        output_dir: path_of(&output_dir),
        seed,
    };
    validate_manifest(&manifest)?;
    Ok(manifest)
}

/// `col0,row0,width,height` in cells.
pub fn parse_aoi(text: &str) -> Option<AoiWindow> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    if parts.len() != 4 {
        return None;
    }
    Some(AoiWindow {
        col0: parts[0],
        row0: parts[1],
        width: parts[2],
        height: parts[3],
    })
}

fn validate_manifest(m: &RunManifest) -> Result<()> {
    if m.infer.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Manifest {
            line: 0,
            msg: format!(
                "inference years must be strictly increasing, got {:?}",
                m.infer.iter().map(|(y, _)| *y).collect::<Vec<_>>()
            ),
        });
    }
    for (year, _) in &m.truth {
        if !m.infer.iter().any(|(y, _)| y == year) {
            return Err(Error::Manifest {
                line: 0,
                msg: format!("truth given for year {year} which is not predicted"),
            });
        }
    }
    // Referenced inputs must exist before any stage runs.
    let mut missing = Vec::new();
    for p in [&m.cloud, &m.train_image]
        .into_iter()
        .chain(m.infer.iter().map(|(_, p)| p))
        .chain(m.truth.iter().map(|(_, p)| p))
    {
        if !p.exists() {
            missing.push(p.display().to_string());
        }
    }
    if !missing.is_empty() {
        return Err(Error::Manifest {
            line: 0,
            msg: format!("missing input files: {}", missing.join(", ")),
        });
    }
    parse_rule(&m.rule)?;
    Ok(())
}

struct RunState<'a> {
    manifest: &'a RunManifest,
    verbose: bool,
    artifacts: Vec<ArtifactEntry>,
}

impl RunState<'_> {
    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("canopylab: {msg}");
        }
    }

    fn write(&mut self, stage: &str, kind: &str, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.manifest.output_dir.join(name);
        fs::write(&path, bytes)?;
        self.artifacts.push(ArtifactEntry {
            stage: stage.to_string(),
            kind: kind.to_string(),
            path: name.to_string(),
        });
        self.log(&format!("{stage}: wrote {name}"));
        Ok(path)
    }
}

/// Execute every stage of a manifest. On failure, partial outputs stay in
/// place next to a `FAILED` marker naming the stage.
pub fn run_pipeline(manifest: &RunManifest, verbose: bool) -> Result<RunIndex> {
    fs::create_dir_all(&manifest.output_dir)?;
    let failed_marker = manifest.output_dir.join("FAILED");
    // A stale marker from an earlier attempt must not outlive a clean rerun.
    let _ = fs::remove_file(&failed_marker);

    let mut state = RunState {
        manifest,
        verbose,
        artifacts: Vec::new(),
    };
    match run_stages(&mut state) {
        Ok(()) => {
            let index = RunIndex {
                seed: manifest.seed,
                artifacts: state.artifacts,
            };
            let json = serde_json::to_vec_pretty(&index).expect("index serializes");
            fs::write(manifest.output_dir.join("index.json"), json)?;
            Ok(index)
        }
        Err(e) => {
            let stage = match &e {
                Error::Stage { stage, .. } => stage,
                _ => "setup",
            };
            let _ = fs::write(&failed_marker, format!("{stage}: {e}\n"));
            Err(e)
        }
    }
}

fn run_stages(state: &mut RunState<'_>) -> Result<()> {
    let m = state.manifest;

    // rasterize
    let stack = (|| -> Result<_> {
        let bytes = fs::read(&m.cloud)?;
        let cloud = parse_auto(&bytes)?;
        let spec = grid_from_bounds(&cloud, m.cell_size)?;
        state.log(&format!(
            "rasterize: {} points onto {}x{} cells",
            cloud.len(),
            spec.width,
            spec.height
        ));
        rasterize_stats(&cloud, &spec, m.radius)
    })()
    .map_err(|e| e.in_stage("rasterize"))?;
    state.write(
        "rasterize",
        "stats",
        "stats.cnpy",
        &write_multiband(&stack.multiband),
    )?;
    let pseudo = stack_to_pseudo_rgb(&stack);
    state.write(
        "rasterize",
        "png",
        "stats_pseudo.png",
        &export_png_rgb(&pseudo, None).map_err(|e| e.in_stage("rasterize"))?,
    )?;

    // label
    let noisy = (|| -> Result<_> {
        let rule = parse_rule(&m.rule)?;
        evaluate_rule(&rule, &stack)
    })()
    .map_err(|e| e.in_stage("label"))?;
    state.write("label", "mask", "noisy.mask", &write_mask(&noisy))?;

    // train
    let (model, train_spec) = (|| -> Result<_> {
        let image = read_image(&m.train_image)?;
        let labels = align_mask(&noisy, &image.spec)?;
        let samples =
            extract_training_samples(&image, &labels, m.train.sample_count, m.train.seed)?;
        state.log(&format!(
            "train: {} samples from year {}",
            samples.len(),
            m.train_year
        ));
        Ok((train_svm(&samples, &m.train)?, image.spec))
    })()
    .map_err(|e| e.in_stage("train"))?;
    state.write("train", "model", "model.svm", &save_model(&model))?;

    // predict
    let mut predictions: Vec<(u16, BinaryMask)> = Vec::new();
    for (year, path) in &m.infer {
        let pred = (|| -> Result<_> {
            let image = read_image(path)?;
            if image.spec != train_spec {
                return Err(Error::GridMismatch {
                    msg: format!("year {year} imagery grid differs from the training grid"),
                });
            }
            predict_mask(&model, &image)
        })()
        .map_err(|e| e.in_stage("predict"))?;
        state.write(
            "predict",
            "mask",
            &format!("pred_{year}.mask"),
            &write_mask(&pred),
        )?;
        predictions.push((*year, pred));
    }

    // evaluate
    for (year, path) in &m.truth {
        let report = (|| -> Result<_> {
            let truth = read_mask(&fs::read(path)?)?;
            let (_, pred) = predictions
                .iter()
                .find(|(y, _)| y == year)
                .expect("validated against infer years");
            let truth = align_mask(&truth, &pred.spec)?;
            let counts = confusion(pred, &truth)?;
            let report = metrics(&counts);
            Ok(serde_json::json!({
                "year": year,
                "tp": counts.true_pos,
                "fp": counts.false_pos,
                "fn": counts.false_neg,
                "tn": counts.true_neg,
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
                "iou": report.iou,
            }))
        })()
        .map_err(|e| e.in_stage("evaluate"))?;
        state.write(
            "evaluate",
            "report",
            &format!("report_{year}.json"),
            &serde_json::to_vec_pretty(&report).expect("report serializes"),
        )?;
    }

    // change + overlay over consecutive year pairs
    for pair in predictions.windows(2) {
        let (y1, mask_t1) = &pair[0];
        let (y2, mask_t2) = &pair[1];
        let report = change(mask_t1, mask_t2, m.aoi).map_err(|e| e.in_stage("change"))?;
        let json = serde_json::json!({
            "from": y1,
            "to": y2,
            "area_t1_px": report.area_t1_px,
            "area_t2_px": report.area_t2_px,
            "relative_change_pct": report.relative_change_pct,
            "aoi": report.window,
        });
        state.write(
            "change",
            "report",
            &format!("change_{y1}_{y2}.json"),
            &serde_json::to_vec_pretty(&json).expect("change serializes"),
        )?;
        state.write(
            "change",
            "mask",
            &format!("loss_{y1}_{y2}.mask"),
            &write_mask(&report.loss_mask),
        )?;

        let overlay = (|| -> Result<_> {
            let (_, path) = m
                .infer
                .iter()
                .find(|(y, _)| y == y2)
                .expect("pair came from infer");
            let image = read_image(path)?;
            // Red overlay of losses on the later epoch, figure-style.
            overlay_png(&rgb_view(&image)?, &report.loss_mask, m.overlay_alpha)
        })()
        .map_err(|e| e.in_stage("overlay"))?;
        state.write("overlay", "png", &format!("overlay_{y1}_{y2}.png"), &overlay)?;
    }

    Ok(())
}

/// Derive the statistics grid from cloud bounds, snapped to cell multiples so
/// that equal surveys land on equal grids.
pub fn grid_from_bounds(cloud: &crate::pointcloud::PointCloud, cell_size: f64) -> Result<GridSpec> {
    let b = cloud
        .bounds
        .ok_or(Error::EmptyInput("point cloud has no points"))?;
    let origin_x = (b.min_x / cell_size).floor() * cell_size;
    let origin_y = (b.max_y / cell_size).ceil() * cell_size;
    let width = ((b.max_x - origin_x) / cell_size).floor() as usize + 1;
    let height = ((origin_y - b.min_y) / cell_size).floor() as usize + 1;
    GridSpec::new(origin_x, origin_y, cell_size, width, height)
}

fn read_image(path: &Path) -> Result<MultibandRaster> {
    read_multiband(&fs::read(path)?)
}

/// NIR/R/G/B imagery viewed as an R/G/B composite (drop NIR).
fn rgb_view(image: &MultibandRaster) -> Result<MultibandRaster> {
    if image.band_count() == 4 {
        MultibandRaster::new(
            image.spec,
            image.band_names[1..].to_vec(),
            image.planes[1..].to_vec(),
            image.nodata.clone(),
        )
    } else {
        Ok(image.clone())
    }
}

/// Resample a mask to a target grid when needed. The pipeline default maps the
/// half-meter statistics grid onto the coarser imagery grid.
fn align_mask(mask: &BinaryMask, target: &GridSpec) -> Result<BinaryMask> {
    if mask.spec == *target {
        Ok(mask.clone())
    } else {
        mask.resample_nearest(target)
    }
}
