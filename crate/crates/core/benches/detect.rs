//! Window classification and a short pipeline run on a 1-thread pool and on
//! the full machine. Build with `--no-default-features` to time the sequential
//! fallback instead of rayon.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use evident_motion::evidential::{DiscretizeParams, OccupancyParams};
use evident_motion::ground::{remove_ground, GroundParams};
use evident_motion::motion::{Detector, ScanWindow, WindowParams, WindowScan};
use evident_motion::pipeline::{run_sequence, PipelineConfig, SequenceInput};
use evident_motion::preprocess::{apply_pose, crop_far, PreprocessParams};
use evident_motion::synth::{generate_sequence, scenes, SyntheticSequence};

fn window(seq: &SyntheticSequence, center: usize, k: usize) -> ScanWindow {
    let scan = |f: usize| {
        let (cropped, _) = crop_far(&seq.scans[f], &PreprocessParams::default());
        let (stripped, _) = remove_ground(&cropped, &GroundParams::default());
        let mut world = apply_pose(&stripped, &seq.poses[f]);
        world.frame_index = f;
        Arc::new(WindowScan::new(&world, 3.0))
    };
    let others = (center - k..=center + k).filter(|&f| f != center).map(scan).collect();
    ScanWindow::new(scan(center), others)
}

fn pools() -> Vec<(usize, rayon::ThreadPool)> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1];
    if n > 1 {
        sizes.push(n);
    }
    sizes
        .into_iter()
        .map(|t| (t, rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap()))
        .collect()
}

fn bench_detect(c: &mut Criterion) {
    let seq = generate_sequence(&scenes::street(11, true), 1).unwrap();
    let w = window(&seq, 5, 5);
    let sampled = Detector::new(OccupancyParams::default(), DiscretizeParams::default(), WindowParams::default()).unwrap();
    let exhaustive = Detector::new(
        OccupancyParams::default(),
        DiscretizeParams::default(),
        WindowParams {
            exhaustive: true,
            ..Default::default()
        },
    )
    .unwrap();

    let mut group = c.benchmark_group("detect_window");
    group.sample_size(10);
    for (threads, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("sampled", threads), &threads, |b, _| {
            b.iter(|| pool.install(|| sampled.detect_window(&w)))
        });
        group.bench_with_input(BenchmarkId::new("exhaustive", threads), &threads, |b, _| {
            b.iter(|| pool.install(|| exhaustive.detect_window(&w)))
        });
    }
    group.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let seq = generate_sequence(&scenes::street(8, true), 2).unwrap();
    let input = SequenceInput::from_synthetic(&seq);
    let mut config = PipelineConfig::default();
    config.window.k_half = 3;

    let mut group = c.benchmark_group("pipeline_8_frames");
    group.sample_size(10);
    for (threads, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, _| {
            b.iter(|| pool.install(|| run_sequence(&input, &config).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_detect, bench_pipeline);
criterion_main!(benches);
