use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gadop_bench::speedup;
use gadop_core::lshape::{run, LShapeOptions};
use gadop_core::milp::{BranchAndBound, SolveLimits};
use gadop_core::model::{solve_monolith, MonolithOptions};

fn takeoff_scaling(c: &mut Criterion) {
    let mut g = c.benchmark_group("takeoff_scenarios");
    g.sample_size(10);
    let opts = MonolithOptions { share_flying_blocks: false, ..MonolithOptions::default() };
    for w in [4, 8, 16] {
        let (inst, sc) = speedup(w);
        g.bench_function(BenchmarkId::new("monolith", w), |b| {
            b.iter(|| solve_monolith(&inst, &sc, &opts, &BranchAndBound, &SolveLimits::default()).unwrap())
        });
        g.bench_function(BenchmarkId::new("lshape", w), |b| b.iter(|| run(&inst, &sc, &LShapeOptions::default(), &BranchAndBound).unwrap()));
        let serial = LShapeOptions { parallel: false, ..LShapeOptions::default() };
        g.bench_function(BenchmarkId::new("lshape_serial", w), |b| b.iter(|| run(&inst, &sc, &serial, &BranchAndBound).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, takeoff_scaling);
criterion_main!(benches);
