//! `canopylab` — rasterize LiDAR statistics, label them with threshold rules,
//! train and run a pixel SVM, score masks, and report tree-cover change.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use canopylab::change::{change, overlay_png};
use canopylab::error::Error;
use canopylab::metrics::{confusion, metrics};
use canopylab::pipeline::{grid_from_bounds, parse_aoi, parse_manifest, run_pipeline};
use canopylab::pointcloud::{parse_auto, write_xyz_text};
use canopylab::raster::container::{read_mask, read_multiband, write_mask, write_multiband};
use canopylab::raster::png_export::{export_png_mask, export_png_rgb};
use canopylab::rules::{evaluate_rule, parse_rule};
use canopylab::stats::{StatsStack, rasterize_stats, stack_to_pseudo_rgb};
use canopylab::svm::{
    TrainConfig, extract_training_samples, load_model, predict_mask, save_model, train_svm,
};
use canopylab::synth::{SyntheticSceneSpec, generate_synthetic_scene};

#[derive(Parser)]
#[command(name = "canopylab", version, about, max_term_width = 100)]
struct Cli {
    /// Worker threads for data-parallel stages (0 = auto).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Print per-stage progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a point cloud into the 13-band statistics stack.
    Rasterize(RasterizeArgs),
    /// Evaluate a threshold rule over a statistics stack into a mask.
    Label(LabelArgs),
    /// Train the Gaussian-kernel SVM from imagery and a label mask.
    Train(TrainArgs),
    /// Classify every pixel of a 4-band image with a trained model.
    Predict(PredictArgs),
    /// Score a predicted mask against a reference mask.
    Evaluate(EvaluateArgs),
    /// Compare two epochs of tree masks.
    Change(ChangeArgs),
    /// Render imagery with a semi-transparent red loss overlay.
    Overlay(OverlayArgs),
    /// Execute a full multi-year pipeline from a run manifest.
    Run(RunArgs),
    /// Generate a synthetic scene: point cloud, imagery, and truth masks.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RasterizeArgs {
    /// LAS file or xyz text; format sniffed from the signature.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    cell_size: f64,
    #[arg(long, default_value_t = 0.75)]
    radius: f64,
    /// Output statistics stack (multiband container).
    #[arg(long)]
    output: PathBuf,
    /// Optional false-color composite PNG.
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Statistics stack from `rasterize`.
    #[arg(long)]
    stats: PathBuf,
    /// Rule text, e.g. "num_returns.max >= 2 && elevation.std >= 1.0".
    #[arg(long, conflicts_with = "rule_file")]
    rule: Option<String>,
    /// File holding the rule text.
    #[arg(long)]
    rule_file: Option<PathBuf>,
    /// Output mask container.
    #[arg(long)]
    output: PathBuf,
    /// Optional mask PNG.
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// 4-band training imagery (multiband container).
    #[arg(long)]
    image: PathBuf,
    /// Label mask; resampled onto the image grid when finer or coarser.
    #[arg(long)]
    labels: PathBuf,
    /// Soft-margin box constraint (also accepted as --C).
    #[arg(long, alias = "C", default_value_t = 10.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 5)]
    max_passes: u32,
    /// Pixels sampled per class.
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output model file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Reference mask; the prediction is resampled onto its grid if needed.
    #[arg(long)]
    truth: PathBuf,
    /// JSON report path.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ChangeArgs {
    #[arg(long)]
    before: PathBuf,
    #[arg(long)]
    after: PathBuf,
    /// Area of interest, `col0,row0,width,height` in cells.
    #[arg(long)]
    aoi: Option<String>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    loss_mask: Option<PathBuf>,
    #[arg(long)]
    gain_mask: Option<PathBuf>,
}

#[derive(Args)]
struct OverlayArgs {
    /// Base imagery (3 bands render directly; 4-band NIR/R/G/B drops NIR).
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    loss: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run manifest; paths inside resolve relative to this file.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for the generated files.
    #[arg(long)]
    output: PathBuf,
    /// Statistics-grid cells per side (even).
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value_t = 0.5)]
    cell_size: f64,
    #[arg(long, default_value_t = 24)]
    tree_clusters: usize,
    /// Tree-cluster radius range in meters, `min,max`.
    #[arg(long, default_value = "4,8")]
    cluster_radius: String,
    #[arg(long, default_value_t = 4)]
    buildings: usize,
    /// Comma-separated epoch labels, strictly increasing.
    #[arg(long, default_value = "2011,2013,2015")]
    years: String,
    /// Tree pixels removed between the first and second epoch.
    #[arg(long, default_value_t = 0.14)]
    removal: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write a ready-to-run manifest next to the data.
    #[arg(long)]
    write_manifest: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("canopylab: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads(threads: usize) {
    if threads > 0 {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(threads: usize) {
    if threads > 1 {
        eprintln!("canopylab: built without the `parallel` feature; --threads ignored");
    }
}

/// 2 usage, 3 input/parse, 4 numeric/convergence, 5 internal invariant.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { source, .. } => exit_code(source),
        Error::InvalidParameter { .. } => 2,
        Error::Numeric(_) => 4,
        Error::Internal(_) => 5,
        _ => 3,
    }
}

fn dispatch(cli: &Cli) -> canopylab::Result<()> {
    match &cli.command {
        Command::Rasterize(a) => cmd_rasterize(a, cli.verbose),
        Command::Label(a) => cmd_label(a),
        Command::Train(a) => cmd_train(a, cli.verbose),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Change(a) => cmd_change(a),
        Command::Overlay(a) => cmd_overlay(a),
        Command::Run(a) => cmd_run(a, cli.verbose),
        Command::Synth(a) => cmd_synth(a, cli.verbose),
    }
}

fn read_stack(path: &Path) -> canopylab::Result<StatsStack> {
    let mb = read_multiband(&fs::read(path)?)?;
    // The container does not store the radius; nothing downstream of
    // rasterization reads it, so record the stock default.
    StatsStack::from_multiband(mb, 0.75)
}

fn cmd_rasterize(a: &RasterizeArgs, verbose: bool) -> canopylab::Result<()> {
    let cloud = parse_auto(&fs::read(&a.input)?)?;
    let spec = grid_from_bounds(&cloud, a.cell_size)?;
    if verbose {
        eprintln!(
            "canopylab: rasterizing {} points onto a {}x{} grid of {} m cells",
            cloud.len(),
            spec.width,
            spec.height,
            spec.cell_size
        );
    }
    let stack = rasterize_stats(&cloud, &spec, a.radius)?;
    fs::write(&a.output, write_multiband(&stack.multiband))?;
    if let Some(png) = &a.png {
        fs::write(png, export_png_rgb(&stack_to_pseudo_rgb(&stack), None)?)?;
    }
    Ok(())
}

fn cmd_label(a: &LabelArgs) -> canopylab::Result<()> {
    let rule_text = match (&a.rule, &a.rule_file) {
        (Some(r), _) => r.clone(),
        (None, Some(f)) => fs::read_to_string(f)?,
        (None, None) => {
            return Err(Error::InvalidParameter {
                name: "rule",
                msg: "provide --rule or --rule-file".into(),
            });
        }
    };
    let rule = parse_rule(rule_text.trim())?;
    let stack = read_stack(&a.stats)?;
    let mask = evaluate_rule(&rule, &stack)?;
    fs::write(&a.output, write_mask(&mask))?;
    if let Some(png) = &a.png {
        fs::write(png, export_png_mask(&mask)?)?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs, verbose: bool) -> canopylab::Result<()> {
    let image = read_multiband(&fs::read(&a.image)?)?;
    let mut labels = read_mask(&fs::read(&a.labels)?)?;
    if labels.spec != image.spec {
        labels = labels.resample_nearest(&image.spec)?;
    }
    let cfg = TrainConfig {
        c: a.c,
        gamma: a.gamma,
        tol: a.tol,
        max_passes: a.max_passes,
        sample_count: a.samples,
        seed: a.seed,
    };
    let samples = extract_training_samples(&image, &labels, cfg.sample_count, cfg.seed)?;
    if verbose {
        eprintln!("canopylab: training on {} samples", samples.len());
    }
    let model = train_svm(&samples, &cfg)?;
    if verbose {
        eprintln!(
            "canopylab: model holds {} support vectors",
            model.support_vectors.len()
        );
    }
    fs::write(&a.output, save_model(&model))?;
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> canopylab::Result<()> {
    let model = load_model(&fs::read(&a.model)?)?;
    let image = read_multiband(&fs::read(&a.image)?)?;
    let mask = predict_mask(&model, &image)?;
    fs::write(&a.output, write_mask(&mask))?;
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> canopylab::Result<()> {
    let mut pred = read_mask(&fs::read(&a.pred)?)?;
    let truth = read_mask(&fs::read(&a.truth)?)?;
    if pred.spec != truth.spec {
        pred = pred.resample_nearest(&truth.spec)?;
    }
    let counts = confusion(&pred, &truth)?;
    let report = metrics(&counts);
    // One flat object: four counts, four metrics.
    let json = serde_json::json!({
        "tp": counts.true_pos,
        "fp": counts.false_pos,
        "fn": counts.false_neg,
        "tn": counts.true_neg,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "iou": report.iou,
    });
    fs::write(&a.report, serde_json::to_vec_pretty(&json).expect("serializes"))?;
    println!(
        "precision {:.4}  recall {:.4}  f1 {:.4}  iou {:.4}",
        report.precision, report.recall, report.f1, report.iou
    );
    Ok(())
}

fn cmd_change(a: &ChangeArgs) -> canopylab::Result<()> {
    let before = read_mask(&fs::read(&a.before)?)?;
    let after = read_mask(&fs::read(&a.after)?)?;
    let aoi = match &a.aoi {
        Some(text) => Some(parse_aoi(text).ok_or(Error::InvalidParameter {
            name: "aoi",
            msg: format!("want col0,row0,width,height, got `{text}`"),
        })?),
        None => None,
    };
    let report = change(&before, &after, aoi)?;
    let json = serde_json::json!({
        "area_t1_px": report.area_t1_px,
        "area_t2_px": report.area_t2_px,
        "relative_change_pct": report.relative_change_pct,
        "aoi": report.window,
    });
    fs::write(&a.report, serde_json::to_vec_pretty(&json).expect("serializes"))?;
    if let Some(p) = &a.loss_mask {
        fs::write(p, write_mask(&report.loss_mask))?;
    }
    if let Some(p) = &a.gain_mask {
        fs::write(p, write_mask(&report.gain_mask))?;
    }
    println!("relative change {:+.1}%", report.relative_change_pct);
    Ok(())
}

fn cmd_overlay(a: &OverlayArgs) -> canopylab::Result<()> {
    let image = read_multiband(&fs::read(&a.image)?)?;
    let loss = read_mask(&fs::read(&a.loss)?)?;
    let rgb = if image.band_count() == 4 {
        canopylab::raster::MultibandRaster::new(
            image.spec,
            image.band_names[1..].to_vec(),
            image.planes[1..].to_vec(),
            image.nodata.clone(),
        )?
    } else {
        image
    };
    fs::write(&a.output, overlay_png(&rgb, &loss, a.alpha)?)?;
    Ok(())
}

fn cmd_run(a: &RunArgs, verbose: bool) -> canopylab::Result<()> {
    let text = fs::read_to_string(&a.manifest)?;
    let base = a
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let manifest = parse_manifest(&text, &base)?;
    let index = run_pipeline(&manifest, verbose)?;
    println!(
        "run complete: {} artifacts in {}",
        index.artifacts.len(),
        manifest.output_dir.display()
    );
    Ok(())
}

fn cmd_synth(a: &SynthArgs, verbose: bool) -> canopylab::Result<()> {
    let years: Vec<u16> = a
        .years
        .split(',')
        .map(|y| {
            y.trim().parse().map_err(|_| Error::InvalidParameter {
                name: "years",
                msg: format!("bad year `{y}`"),
            })
        })
        .collect::<canopylab::Result<_>>()?;
    let cluster_radius = a
        .cluster_radius
        .split_once(',')
        .and_then(|(lo, hi)| {
            let lo: f64 = lo.trim().parse().ok()?;
            let hi: f64 = hi.trim().parse().ok()?;
            (lo > 0.0 && hi >= lo).then_some((lo, hi))
        })
        .ok_or(Error::InvalidParameter {
            name: "cluster_radius",
            msg: format!("want `min,max` meters, got `{}`", a.cluster_radius),
        })?;
    let spec = SyntheticSceneSpec {
        grid: a.grid,
        cell_size: a.cell_size,
        tree_clusters: a.tree_clusters,
        cluster_radius,
        buildings: a.buildings,
        years,
        removal_fraction: a.removal,
        seed: a.seed,
        ..SyntheticSceneSpec::default()
    };
    let scene = generate_synthetic_scene(&spec)?;
    fs::create_dir_all(&a.output)?;
    fs::write(a.output.join("cloud.xyz"), write_xyz_text(&scene.cloud))?;
    for (year, img) in &scene.imagery {
        fs::write(
            a.output.join(format!("naip_{year}.cnpy")),
            write_multiband(img),
        )?;
    }
    for (year, mask) in &scene.truth {
        fs::write(a.output.join(format!("truth_{year}.mask")), write_mask(mask))?;
    }
    if verbose {
        eprintln!(
            "canopylab: synthetic scene with {} points over {} epochs",
            scene.cloud.len(),
            scene.imagery.len()
        );
    }
    if a.write_manifest {
        let first = scene.imagery[0].0;
        let mut predict = String::new();
        let mut evaluate = String::new();
        for (year, _) in &scene.imagery {
            predict.push_str(&format!("year.{year} = naip_{year}.cnpy\n"));
            evaluate.push_str(&format!("truth.{year} = truth_{year}.mask\n"));
        }
        let manifest = format!(
            "# generated by `canopylab synth`\n\
             [rasterize]\ncloud = cloud.xyz\ncell_size = {}\nradius = 0.75\n\n\
             [label]\nrule = num_returns.max >= 2 && elevation.std >= 1.0\n\n\
             [train]\nimage = naip_{first}.cnpy\nyear = {first}\nsamples = 2000\n\n\
             [predict]\n{predict}\n\
             [evaluate]\n{evaluate}\n\
             [change]\noverlay_alpha = 0.5\n\n\
             [run]\noutput_dir = out\nseed = {}\n",
            a.cell_size, a.seed
        );
        fs::write(a.output.join("run.manifest"), manifest)?;
    }
    Ok(())
}
