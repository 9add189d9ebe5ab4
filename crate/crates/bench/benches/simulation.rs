use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use rplsim_bench::lossy_scenario;
use rplsim_core::engine::{Scheduler, SimTime};
use rplsim_core::{run_scenario, ObjectiveKind, RunOptions, TopologyKind};
use std::hint::black_box;

fn full_runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_scenario");
    g.sample_size(20);
    for n in [20, 60, 100] {
        for (topology, objective) in [
            (TopologyKind::Random, ObjectiveKind::Of0),
            (TopologyKind::Random, ObjectiveKind::Etx),
            (TopologyKind::Grid, ObjectiveKind::Etx),
        ] {
            let cfg = lossy_scenario(n, topology, objective, 1);
            g.bench_with_input(BenchmarkId::new(cfg.scenario_id(), n), &cfg, |b, cfg| {
                b.iter(|| run_scenario(black_box(cfg), RunOptions::default()).unwrap())
            });
        }
    }
    g.finish();
}

fn traced_run(c: &mut Criterion) {
    let cfg = lossy_scenario(100, TopologyKind::Random, ObjectiveKind::Etx, 1);
    c.bench_function("run_scenario/traced-100", |b| {
        b.iter(|| run_scenario(&cfg, RunOptions { record_trace: true }).unwrap())
    });
}

fn scheduler(c: &mut Criterion) {
    c.bench_function("scheduler/100k-push-pop", |b| {
        b.iter_batched(
            Scheduler::<u32>::new,
            |mut s| {
                let mut x = 0x2545_f491_u64;
                for i in 0..100_000u32 {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    s.schedule(SimTime::from_micros(x % 1_000_000_000), i)
                        .unwrap();
                }
                let mut n = 0;
                while let Some(d) = s.pop_until(SimTime::MAX) {
                    n ^= d.event;
                }
                n
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, full_runs, traced_run, scheduler);
criterion_main!(benches);
