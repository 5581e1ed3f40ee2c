use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hyprest::extension::{extension_field, FreqGrid};
use hyprest::hypgeo::gamma4;
use hyprest::rects::{closure, FamilyParams};
use hyprest::sublevel::{sublevel_decompose, ScanOptions};
use hyprest::{build_family, extend};
use hyprest_bench::{quartic, saddle, smooth_density};

fn geometry(c: &mut Criterion) {
    let phi = quartic();
    c.bench_function("gamma4", |b| {
        b.iter(|| gamma4(&phi, black_box([0.1, 0.2]), [0.3, -0.4], [-0.5, 0.6], [0.7, 0.1], [-0.2, -0.9]).unwrap())
    });
}

fn sublevel(c: &mut Criterion) {
    let g = |t: f64| (7.0 * t).sin();
    c.bench_function("sublevel sin(7t) λ=0.01", |b| {
        b.iter(|| sublevel_decompose(&g, (-1.0, 1.0), 2, 49.0, black_box(0.01), ScanOptions::default()).unwrap())
    });
}

fn extension(c: &mut Criterion) {
    let phi = quartic();
    let f = smooth_density();
    c.bench_function("extend |ξ|≈64", |b| b.iter(|| extend(&phi, &f, black_box([40.0, -30.0, 35.0]), 1e-8).unwrap()));
    let grid = FreqGrid::cube_n(16.0, 9);
    let mut g = c.benchmark_group("field");
    g.sample_size(10);
    g.bench_function("extension_field 9³ R=16", |b| b.iter(|| extension_field(&saddle(), &f, &grid, 1e-8).unwrap()));
    g.finish();
}

fn family(c: &mut Criterion) {
    let phi = quartic();
    let mut g = c.benchmark_group("family");
    g.sample_size(10);
    g.bench_function("build_family K=128", |b| b.iter(|| build_family(&phi, FamilyParams::new(128, 1.0, 0.1)).unwrap()));
    let fam = build_family(&phi, FamilyParams::new(128, 1.0, 0.1)).unwrap();
    g.bench_function("closure K=128", |b| b.iter(|| closure(&fam)));
    g.finish();
}

criterion_group!(benches, geometry, sublevel, extension, family);
criterion_main!(benches);
