use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use miranda_core::boundary::build_tubular_field;
use miranda_core::modulus::{seminorm_estimate_with, Modulus, SeminormOptions};
use miranda_core::potential::eval_potential;
use miranda_core::{Boundary, Density, DensityKind, HomogeneousKernel, SampledFunction, Vec2};

fn potential(c: &mut Criterion) {
    let b = Boundary::ellipse(1.0, 0.5).unwrap();
    let k = HomogeneousKernel::riesz(1).unwrap();
    let mu = Density::new(DensityKind::AbsCoord(1), &b);
    let field = build_tubular_field(&b, 0.5).unwrap();
    let mut g = c.benchmark_group("eval_potential");
    g.bench_function("interior", |bch| {
        bch.iter(|| eval_potential(&b, &k, &mu, black_box(Vec2::new(0.2, 0.1)), 1e-11).unwrap())
    });
    for t in [1e-2, 1e-4, 1e-6] {
        let x = field.psi(&b, 0.7, -t);
        g.bench_with_input(BenchmarkId::new("collar", t), &x, |bch, &x| {
            bch.iter(|| eval_potential(&b, &k, &mu, black_box(x), 1e-11).unwrap())
        });
    }
    g.finish();
}

fn closest_point(c: &mut Criterion) {
    let b = Boundary::ellipse(1.0, 0.5).unwrap();
    c.bench_function("closest_point", |bch| bch.iter(|| b.closest_point(black_box(Vec2::new(0.9, 0.3)))));
}

fn seminorm(c: &mut Criterion) {
    let n = 2000;
    let pts: Vec<Vec2> = (0..n)
        .map(|i| {
            let a = i as f64 * 2.399963;
            let r = (i as f64 / n as f64).sqrt();
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    let vals = pts.iter().map(|p| p.x.abs() * (1.0 + p.y)).collect();
    let f = SampledFunction::new(pts, vals, "bench").unwrap();
    let w = Modulus::omega1();
    let mut g = c.benchmark_group("seminorm");
    g.sample_size(10);
    g.bench_function("exact_2000", |bch| {
        let opts = SeminormOptions { max_pairs: usize::MAX, ..SeminormOptions::default() };
        bch.iter(|| seminorm_estimate_with(&f, &w, &opts).unwrap())
    });
    g.bench_function("sampled_2000", |bch| {
        let opts = SeminormOptions { max_pairs: 1000, ..SeminormOptions::default() };
        bch.iter(|| seminorm_estimate_with(&f, &w, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, potential, closest_point, seminorm);
criterion_main!(benches);
