use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use synthperson::annotate::extract_instances;
use synthperson::config::base_config;
use synthperson::eval::{evaluate, extract_features, Distance, Labeled};
use synthperson::pipeline::Plan;

fn plan() -> Plan {
    let mut cfg = base_config("desk_full").unwrap();
    cfg.identities.count = 12;
    Plan::new(&cfg).unwrap()
}

fn render(c: &mut Criterion) {
    let plan = plan();
    let stage = plan.stage();
    let state = plan.initial_state(0).unwrap();
    let prepared = stage.prepare(&state).unwrap();
    let cam = plan.world.cameras_in(state.scene_id).next().unwrap().clone();
    let light = plan.schedule.illumination_at(state.time).unwrap();
    c.bench_function("render_frame_512x384", |b| {
        b.iter(|| stage.render_prepared(black_box(&prepared), &cam, light).unwrap())
    });
    c.bench_function("render_labels_512x384", |b| {
        b.iter(|| stage.render_labels(black_box(&prepared), &cam).unwrap())
    });
    let frame = stage.render_prepared(&prepared, &cam, light).unwrap();
    c.bench_function("extract_instances", |b| {
        b.iter(|| extract_instances(black_box(&frame)))
    });
    c.bench_function("scan_slot", |b| b.iter(|| plan.scan_slot(&stage, 0).unwrap()));
}

fn features(c: &mut Criterion) {
    let img = image::RgbImage::from_fn(64, 160, |x, y| image::Rgb([(x * 4) as u8, (y + x) as u8, 77]));
    c.bench_function("extract_features", |b| {
        b.iter(|| extract_features(black_box(&img)).unwrap())
    });

    let item = |i: usize| Labeled {
        feature: (0..192)
            .map(|d| ((i * 31 + d * 7) % 101) as f64 / 101.0)
            .collect(),
        identity_id: (i % 50) as u32,
        camera_id: (i % 4) as u32,
    };
    let gallery: Vec<Labeled> = (0..1000).map(item).collect();
    let query: Vec<Labeled> = (1000..1100).map(item).collect();
    c.bench_function("evaluate_100x1000", |b| {
        b.iter(|| evaluate(black_box(&query), &gallery, Distance::L2).unwrap())
    });
}

criterion_group!(benches, render, features);
criterion_main!(benches);
