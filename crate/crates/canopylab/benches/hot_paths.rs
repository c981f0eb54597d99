//! Criterion benchmarks for the data-parallel hot paths, comparing the rayon
//! path against single-threaded execution.
//!
//! With the default `parallel` feature this runs each operation on the global
//! pool (`rayon-auto`) and inside a one-thread pool (`rayon-1thread`); the
//! same benchmark names appear as `sequential` when built with
//! `--no-default-features`, so criterion baselines line up across builds:
//!
//! ```text
//! cargo bench -p canopylab
//! cargo bench -p canopylab --no-default-features
//! ```

use criterion::{Criterion, criterion_group, criterion_main};
use std::hint::black_box;

use canopylab::metrics::confusion;
use canopylab::raster::BinaryMask;
use canopylab::rules::{default_tree_rule, evaluate_rule};
use canopylab::stats::rasterize_stats;
use canopylab::svm::{TrainConfig, extract_training_samples, predict_mask, train_svm};
use canopylab::synth::{SyntheticSceneSpec, generate_synthetic_scene};

struct Fixture {
    scene: canopylab::synth::SyntheticScene,
    stack: canopylab::stats::StatsStack,
    /// Rule mask on the fine statistics grid, before resampling.
    noisy_fine: BinaryMask,
    model: canopylab::svm::SvmModel,
    pred: BinaryMask,
    truth: BinaryMask,
}

fn fixture() -> Fixture {
    let spec = SyntheticSceneSpec {
        grid: 256,
        years: vec![2017],
        removal_fraction: 0.0,
        seed: 99,
        ..SyntheticSceneSpec::default()
    };
    let scene = generate_synthetic_scene(&spec).expect("scene generates");
    let stack = rasterize_stats(&scene.cloud, &scene.stats_spec, 0.75).expect("rasterizes");
    let noisy_fine = evaluate_rule(&default_tree_rule(), &stack).expect("labels");
    let noisy = noisy_fine
        .resample_nearest(&scene.image_spec)
        .expect("resamples");
    let cfg = TrainConfig {
        sample_count: 800,
        seed: 3,
        ..TrainConfig::default()
    };
    let samples = extract_training_samples(&scene.imagery[0].1, &noisy, cfg.sample_count, cfg.seed)
        .expect("samples");
    let model = train_svm(&samples, &cfg).expect("trains");
    let pred = predict_mask(&model, &scene.imagery[0].1).expect("predicts");
    let truth = scene.truth[0].1.clone();
    Fixture {
        scene,
        stack,
        noisy_fine,
        model,
        pred,
        truth,
    }
}

/// Run `op` under each execution mode this build supports.
fn bench_modes<R: Send>(c: &mut Criterion, name: &str, op: impl Fn() -> R + Sync) {
    let mut group = c.benchmark_group(name);
    #[cfg(feature = "parallel")]
    {
        group.bench_function("rayon-auto", |b| b.iter(|| black_box(op())));
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("pool builds");
        group.bench_function("rayon-1thread", |b| {
            b.iter(|| single.install(|| black_box(op())))
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(|| black_box(op())));
    group.finish();
}

fn bench_hot_paths(c: &mut Criterion) {
    let fx = fixture();

    bench_modes(c, "rasterize_stats_256", || {
        rasterize_stats(&fx.scene.cloud, &fx.scene.stats_spec, 0.75).unwrap()
    });

    let rule = default_tree_rule();
    bench_modes(c, "evaluate_rule_256", || {
        evaluate_rule(&rule, &fx.stack).unwrap()
    });

    bench_modes(c, "predict_mask_128", || {
        predict_mask(&fx.model, &fx.scene.imagery[0].1).unwrap()
    });

    bench_modes(c, "confusion_128", || {
        confusion(&fx.pred, &fx.truth).unwrap()
    });

    bench_modes(c, "resample_mask_256_to_128", || {
        fx.noisy_fine.resample_nearest(&fx.scene.image_spec).unwrap()
    });
}

criterion_group!(benches, bench_hot_paths);
criterion_main!(benches);
