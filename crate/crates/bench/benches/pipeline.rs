use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hllgemm::{spgemm, EngineConfig, WorkflowOverride};

fn workflows(c: &mut Criterion) {
    let mut group = c.benchmark_group("spgemm");
    group.sample_size(10);
    for (name, a) in hllgemm_bench::matrices() {
        let products = hllgemm::analysis::compute_row_stats(&a, &a).unwrap().total_products;
        group.throughput(Throughput::Elements(2 * products));
        for w in WorkflowOverride::ALL {
            let cfg = EngineConfig {
                workflow: w,
                ..EngineConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(format!("{w:?}"), name), &a, |b, a| {
                b.iter(|| spgemm(a, a, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, workflows);
criterion_main!(benches);
