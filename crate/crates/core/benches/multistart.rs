use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qcorr::bipartite::make_werner;
use qcorr::correlation::{minimize_d0, werner_witness, Execution, OptimizerConfig};

fn multistart(c: &mut Criterion) {
    let rho = make_werner(0.6).unwrap();
    let w = werner_witness();
    let mut group = c.benchmark_group("minimize_d0_werner");
    group.sample_size(10);
    for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        for starts in [8, 32] {
            let cfg = OptimizerConfig { starts, execution, ..OptimizerConfig::default() };
            group.bench_with_input(BenchmarkId::new(label, starts), &cfg, |b, cfg| b.iter(|| minimize_d0(&rho, &w, cfg).unwrap().value));
        }
    }
    group.finish();
}

criterion_group!(benches, multistart);
criterion_main!(benches);
