use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hllgemm::accumulate::{sort_row_with, SortPath, PACKED_MAX_COL};
use hllgemm::analysis::build_b_sketches;
use hllgemm::HllSketch;

fn sketches(c: &mut Criterion) {
    let mut group = c.benchmark_group("hll");
    for p in [5u8, 6, 7] {
        let a = HllSketch::from_keys(p, 0..5000).unwrap();
        let b = HllSketch::from_keys(p, 2500..9000).unwrap();
        group.bench_with_input(BenchmarkId::new("merge", 1u32 << p), &(a, b), |bch, (a, b)| {
            bch.iter(|| {
                let mut s = *a;
                s.merge_from(b).unwrap();
                s
            })
        });
        group.bench_with_input(BenchmarkId::new("estimate", 1u32 << p), &a, |bch, a| bch.iter(|| a.estimate()));
    }
    let (_, m) = hllgemm_bench::matrices().remove(0);
    group.bench_function("build_b_sketches", |bch| bch.iter(|| build_b_sketches(&m, 5)));
    group.finish();
}

fn sorting(c: &mut Criterion) {
    let mut group = c.benchmark_group("sort_row");
    for count in [256usize, 4096] {
        // odd multiplier: distinct scattered columns below the packed limit
        let cols: Vec<u32> = (0..count as u32).map(|i| i.wrapping_mul(2_654_435_761) % PACKED_MAX_COL).collect();
        let vals: Vec<f64> = cols.iter().map(|&c| c as f64).collect();
        for path in [SortPath::Packed, SortPath::Pairs] {
            group.bench_with_input(BenchmarkId::new(format!("{path:?}"), count), &(&cols, &vals), |b, (cols, vals)| {
                b.iter_batched(
                    || ((*cols).clone(), (*vals).clone()),
                    |(mut c, mut v)| sort_row_with(path, &mut c, &mut v, PACKED_MAX_COL - 1).unwrap(),
                    criterion::BatchSize::SmallInput,
                )
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sketches, sorting);
criterion_main!(benches);
