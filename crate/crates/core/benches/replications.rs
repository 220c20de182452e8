use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand_distr::StandardNormal;

use slcogarch::cogarch::ensemble_volatility;
use slcogarch::coherence::significant_pairs;
use slcogarch::exec::path_rng;
use slcogarch::{CogarchParams, CoherenceConfig, Execution, JumpDist, SemiLevyConfig};

const POLICIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn driver() -> SemiLevyConfig {
    let dists = [(2.0, 4.0), (1.5, 2.5), (2.5, 1.5), (1.75, 3.0)]
        .iter()
        .map(|&(m, v)| JumpDist::normal(m, v).unwrap())
        .collect();
    SemiLevyConfig::new(
        6.5,
        vec![0.5, 2.5, 3.0, 0.5],
        vec![4.0, 10.0, 5.0, 30.0],
        dists,
        0.0,
    )
    .unwrap()
}

fn char_function(c: &mut Criterion) {
    let cfg = driver();
    let us: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.5).collect();
    let mut g = c.benchmark_group("empirical_cf_20000_paths");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                cfg.empirical_char_function(&us, 6.5, 20_000, 1, exec)
                    .unwrap()
            })
        });
    }
    g.finish();
}

fn volatility_ensemble(c: &mut Criterion) {
    let cfg = driver();
    let params = CogarchParams::new(
        1e-6,
        &[0.005],
        &[2.1, 6.0, 0.6],
        &[0.37e-3, 0.05e-3, 0.19e-3],
    )
    .unwrap();
    let probes = [65.3, 71.8];
    let mut g = c.benchmark_group("volatility_ensemble_2000");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ensemble_volatility(&cfg, &params, 12, &probes, 2000, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn coherence_grid(c: &mut Criterion) {
    let mut rng = path_rng(3);
    let x: Vec<f64> = (0..2600).map(|_| rng.sample(StandardNormal)).collect();
    let mut g = c.benchmark_group("coherence_n2600_m550");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        let mut cfg = CoherenceConfig::new(550, 0.05);
        cfg.execution = exec;
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| significant_pairs(&x, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, char_function, volatility_ensemble, coherence_grid);
criterion_main!(benches);
