use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use firefront::levelset::{init_level_set, reinit_sdf, step_stage1, CircleStencil, GacParams, SdfShape};
use firefront::snake::step;
use firefront::{compute_potential, ForceFieldParams, Grid, Point, SeedRegion, SnakeContour, SnakeParams, TransferKind};
use firefront_bench::{ring_edges, two_circle_force};

fn potential(c: &mut Criterion) {
    let mut g = c.benchmark_group("potential");
    for n in [64, 128, 256] {
        let edges = ring_edges(n, n as f64 / 4.0);
        let params = ForceFieldParams {
            kind: TransferKind::InversePower,
            p: 0.5,
            ..ForceFieldParams::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(n), &edges, |b, e| {
            b.iter(|| compute_potential(black_box(e), &params).unwrap())
        });
    }
    g.finish();
}

fn reinit(c: &mut Criterion) {
    let n = 512;
    let seed = SeedRegion::Disk {
        center: Point::new(255.5, 256.5),
        radius: 150.0,
    };
    let grid = init_level_set(&seed, n, n, 6.0).unwrap();
    let circle = CircleStencil::new(6.0);
    let square = CircleStencil::square(6.0);
    c.bench_function("reinit/circle_512", |b| {
        b.iter(|| reinit_sdf(black_box(&grid), &circle, SdfShape::R).unwrap())
    });
    c.bench_function("reinit/square_512", |b| {
        b.iter(|| reinit_sdf(black_box(&grid), &square, SdfShape::R).unwrap())
    });
}

fn level_set_step(c: &mut Criterion) {
    let n = 512;
    let seed = SeedRegion::Disk {
        center: Point::new(256.0, 256.0),
        radius: 150.0,
    };
    let grid = init_level_set(&seed, n, n, 6.0).unwrap();
    let kl = Grid::filled(n, n, 1.0);
    let params = GacParams::default();
    c.bench_function("levelset/stage1_step_512", |b| {
        b.iter(|| step_stage1(black_box(&grid), &kl, &params).unwrap())
    });
}

fn snake_step(c: &mut Criterion) {
    let (force, center, radius) = two_circle_force();
    let params = SnakeParams::default();
    for n in [40, 400] {
        let contour = SnakeContour::circle(center, radius, n).unwrap();
        c.bench_function(&format!("snake/step_{n}"), |b| {
            b.iter(|| step(black_box(&contour), &force, &params))
        });
    }
}

criterion_group!(benches, potential, reinit, level_set_step, snake_step);
criterion_main!(benches);
