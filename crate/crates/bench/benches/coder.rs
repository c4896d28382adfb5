use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use resfield::codec::{range_decode, range_encode};
use resfield_bench::{laplace_table, sample_symbols};

fn bench_range_coder(c: &mut Criterion) {
    let mut g = c.benchmark_group("range_coder");
    let n = 100_000;
    for scale in [0.5, 4.0, 32.0] {
        let table = laplace_table(255, scale);
        let symbols = sample_symbols(&table, n, 1);
        let tables = [table];
        let bytes = range_encode(&symbols, &tables).unwrap();
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("encode", scale), &symbols, |b, s| {
            b.iter(|| range_encode(black_box(s), &tables).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("decode", scale), &bytes, |b, bytes| {
            b.iter(|| range_decode(black_box(bytes), &tables, n).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_range_coder);
criterion_main!(benches);
