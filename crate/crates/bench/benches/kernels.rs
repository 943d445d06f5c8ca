use criterion::{criterion_group, criterion_main, Criterion};
use selrel::explain::{explain, Method};
use selrel::flow::horn_schunck_pair;
use selrel::selective::{selective_relevance, SelectiveConfig};
use selrel::volume::{sobel3, volume_stats, Axis};
use selrel_bench::{clip_relevance, clip_volume, frame_pair, model_and_input};
use std::hint::black_box;

fn volume_kernels(c: &mut Criterion) {
    let v = clip_volume(1);
    c.bench_function("sobel3_t_16x112x112", |b| b.iter(|| sobel3(black_box(&v), Axis::T).unwrap()));
    c.bench_function("volume_stats_16x112x112", |b| b.iter(|| volume_stats(black_box(&v))));
    let r = clip_relevance(2);
    let cfg = SelectiveConfig::default();
    c.bench_function("selective_step_16x112x112", |b| {
        b.iter(|| selective_relevance(black_box(&r), &cfg).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("toy3d-5");
    g.sample_size(10);
    let (model, x) = model_and_input("toy3d-5", 3);
    g.bench_function("forward", |b| b.iter(|| model.forward_tensor(x.clone()).unwrap()));
    let (y, trace) = model.forward_tensor(x.clone()).unwrap();
    let class = (0..y.len()).fold(0, |m, i| if y[i] > y[m] { i } else { m });
    for method in Method::ALL {
        g.bench_function(method.as_str(), |b| b.iter(|| explain(&model, &trace, class, method).unwrap()));
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let (f1, f2, p) = frame_pair();
    let mut g = c.benchmark_group("flow");
    g.sample_size(20);
    g.bench_function("horn_schunck_112x112", |b| b.iter(|| horn_schunck_pair(&f1, &f2, &p).unwrap()));
    g.finish();
}

criterion_group!(benches, volume_kernels, network, flow);
criterion_main!(benches);
