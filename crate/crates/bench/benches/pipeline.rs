use bnnsat::encode::encode_bnn;
use bnnsat::model::{bipolar_from_bits, forward_folded};
use bnnsat::sample::{infer_sat, invert, InversionQuery};
use bnnsat::verify::random_model;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

const ARCHS: [&[usize]; 3] = [&[16, 10, 10], &[25, 20, 10], &[100, 20, 10]];

fn name(arch: &[usize]) -> String {
    arch.iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

fn encode(c: &mut Criterion) {
    let mut g = c.benchmark_group("encode");
    for arch in ARCHS {
        let model = random_model(arch, 1);
        g.bench_with_input(BenchmarkId::from_parameter(name(arch)), &model, |b, m| {
            b.iter(|| encode_bnn(black_box(m)).unwrap())
        });
    }
    g.finish();
}

fn infer(c: &mut Criterion) {
    let mut g = c.benchmark_group("infer");
    for arch in ARCHS {
        let model = random_model(arch, 1);
        let (f, map) = encode_bnn(&model).unwrap();
        let x = bipolar_from_bits(0x5a5a_5a5a_5a5a_5a5a, arch[0]);
        g.bench_function(BenchmarkId::new("sat", name(arch)), |b| {
            b.iter(|| infer_sat(&f, &map, black_box(&x)).unwrap())
        });
        g.bench_function(BenchmarkId::new("folded", name(arch)), |b| {
            b.iter(|| forward_folded(&model, black_box(&x)).unwrap())
        });
    }
    g.finish();
}

fn sample(c: &mut Criterion) {
    let mut g = c.benchmark_group("invert");
    g.sample_size(10);
    for arch in ARCHS {
        let model = random_model(arch, 1);
        let (f, map) = encode_bnn(&model).unwrap();
        let x = bipolar_from_bits(0, arch[0]);
        let label = forward_folded(&model, &x).unwrap().0;
        let query = InversionQuery {
            target_label: label,
            num_samples: 10,
            seed: 0,
            distinct: true,
        };
        g.bench_function(BenchmarkId::from_parameter(name(arch)), |b| {
            b.iter(|| invert(&f, &map, &model, black_box(&query)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, encode, infer, sample);
criterion_main!(benches);
