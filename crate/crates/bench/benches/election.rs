use blindvote::{run_scenario, ScenarioConfig, VoterConfig, WindowConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn config(voters: usize, key_bits: u64, sealed: bool) -> ScenarioConfig {
    let voters =
        (0..voters).map(|i| VoterConfig::honest(format!("v{i}"), if i % 2 == 0 { "A" } else { "B" })).collect();
    let mut config = ScenarioConfig::new(1, WindowConfig { st: 10, ct: 20, et: 30 }, voters);
    config.key_bits = key_bits;
    config.sealed = sealed;
    config
}

fn bench_elections(c: &mut Criterion) {
    let mut group = c.benchmark_group("election");
    group.sample_size(10);
    for (key_bits, sealed) in [(12, false), (12, true), (1024, false)] {
        let id = BenchmarkId::new(if sealed { "sealed" } else { "plain" }, format!("{key_bits}-bit/10 voters"));
        let config = config(10, key_bits, sealed);
        group.bench_with_input(id, &config, |b, config| b.iter(|| run_scenario(config).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_elections);
criterion_main!(benches);
