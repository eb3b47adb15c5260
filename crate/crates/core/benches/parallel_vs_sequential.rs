use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use switchsynth::abstraction::{build_imdp, discretize, BuildOptions, DiscretizationSpec, HybridSystem, Mode, Region};
use switchsynth::exec::Parallelism;
use switchsynth::geometry::HyperRectangle;
use switchsynth::kernel::ModeDynamics;
use switchsynth::linalg::{from_rows, identity};
use switchsynth::logic::{parse, template_dfa};
use switchsynth::synthesis::{synthesize, IterationOptions};

fn system() -> HybridSystem {
    let x = HyperRectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let dynamics = ModeDynamics::new(from_rows(2, 2, &[0.85, 0.0, 0.0, 0.9]), from_rows(2, 2, &[0.15, 0.0, 0.0, 0.05]), identity(2)).unwrap();
    HybridSystem::new(vec![Mode { name: "a".into(), dynamics }], x.clone(), vec![Region { label: "X".into(), polytope: x.to_polytope() }])
        .unwrap()
}

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn abstraction(c: &mut Criterion) {
    let h = system();
    let mut g = c.benchmark_group("build_imdp");
    g.sample_size(10);
    for n in [19usize, 38] {
        let d = discretize(&h, &DiscretizationSpec { dx: 2.0 / n as f64, adaptive: None }).unwrap();
        for (name, par) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n * n), &d, |b, d| {
                b.iter(|| build_imdp(&h, black_box(d), &BuildOptions { parallelism: par, ..BuildOptions::default() }).unwrap())
            });
        }
    }
    g.finish();
}

fn value_iteration(c: &mut Criterion) {
    let h = system();
    let d = discretize(&h, &DiscretizationSpec { dx: 2.0 / 51.0, adaptive: None }).unwrap();
    let imdp = build_imdp(&h, &d, &BuildOptions::default()).unwrap();
    let mut g = c.benchmark_group("value_iteration");
    g.sample_size(10);
    for k in [10u32, 100] {
        let dfa = template_dfa(&parse(&format!("G<={k} X")).unwrap()).unwrap();
        for (name, par) in MODES {
            g.bench_with_input(BenchmarkId::new(name, k), &dfa, |b, dfa| {
                b.iter(|| synthesize(black_box(&imdp), dfa, &IterationOptions { parallelism: par, ..IterationOptions::default() }).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, abstraction, value_iteration);
criterion_main!(benches);
