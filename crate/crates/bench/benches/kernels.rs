use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use layerwise::hilbert::{self, CellCoord, HilbertIndex};
use layerwise::{corpus, fit_shallow, sup_norm_diff, train_cascade, Activation, FeatureMode};
use layerwise_bench::{fixed_net, grid, quick_fit};

fn hilbert_roundtrip(c: &mut Criterion) {
    let mut g = c.benchmark_group("hilbert");
    for (d, k) in [(2usize, 10u32), (3, 7), (8, 8)] {
        let cell = CellCoord::new(k, (0..d as u64).map(|i| (i * 37) % (1 << k)).collect()).unwrap();
        g.bench_with_input(BenchmarkId::new("encode", format!("d{d}k{k}")), &cell, |b, cell| {
            b.iter(|| hilbert::encode(black_box(cell)).unwrap())
        });
        let idx = HilbertIndex::new(HilbertIndex::max_value(d, k) / 3, d, k).unwrap();
        g.bench_with_input(BenchmarkId::new("decode", format!("d{d}k{k}")), &idx, |b, idx| {
            b.iter(|| hilbert::decode(black_box(idx)).unwrap())
        });
    }
    g.finish();
}

fn shallow_eval(c: &mut Criterion) {
    let mut g = c.benchmark_group("shallow");
    let pts = grid(2, 65);
    for units in [8usize, 64] {
        let net = fixed_net(2, units, Activation::Tanh);
        g.bench_with_input(BenchmarkId::new("sup_norm_2d_65", units), &net, |b, net| {
            b.iter(|| sup_norm_diff(&|x| (x[0] * x[1]).sin(), &|x| net.value(x), pts.points()).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("grad", units), &net, |b, net| {
            b.iter(|| net.grad_params(black_box(&[0.3, -0.4]), 1.0).unwrap())
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    let f = corpus::tanh_1d();
    let pts = grid(1, 129);
    g.bench_function("fit_shallow_n8", |b| {
        b.iter(|| fit_shallow(&f.as_fn(), pts.points(), 8, &quick_fit(1)).unwrap())
    });
    for mode in FeatureMode::ALL {
        g.bench_function(BenchmarkId::new("cascade_depth3", mode), |b| {
            b.iter(|| train_cascade(&f, pts.points(), 3, 4, mode, &quick_fit(1)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, hilbert_roundtrip, shallow_eval, training);
criterion_main!(benches);
