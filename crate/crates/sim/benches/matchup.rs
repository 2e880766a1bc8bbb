use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use dilemma_agents::{MockBackend, MockConfig, Persona};
use dilemma_sim::{run_matchup, ExecMode, Matchup, RunOptions};

fn bench_modes(c: &mut Criterion) {
    // A small artificial latency stands in for network round trips, which
    // is where pair-level parallelism pays off.
    let backend = MockBackend::new(MockConfig {
        seed: 7,
        latency: Some(Duration::from_micros(200)),
        ..MockConfig::default()
    });
    let m = Matchup::new(Persona::Fair, Persona::Selfish, "mock-7").with_shape(10, 1, 3);
    let mut group = c.benchmark_group("matchup_fair_vs_selfish");
    group.sample_size(10);
    for (name, exec) in [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)] {
        let opts = RunOptions { exec, ..RunOptions::default() };
        group.bench_function(name, |b| b.iter(|| run_matchup(&m, &backend, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_modes);
criterion_main!(benches);
