use criterion::{black_box, criterion_group, criterion_main, Criterion};

use stablefront::field::{Preset, ScalarField2};
use stablefront::hamiltonian::{infmax_upper, InfmaxConfig};
use stablefront::lattice::EngineParams;
use stablefront::par::Exec;
use stablefront::shortest_path::Engine;
use stablefront::stable_norm::{direction_sweep, SweepStrategy};

fn field() -> ScalarField2 {
    ScalarField2::speed(Preset::Bumps { base: 1.0, amp: 4.0, sigma: 0.15 }).unwrap()
}

fn sweep(c: &mut Criterion) {
    let field = field();
    let mut group = c.benchmark_group("direction_sweep");
    group.sample_size(10);
    for (label, exec) in [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)] {
        let engine = Engine::new(&field, EngineParams::default().with_n(32).with_exec(exec)).unwrap();
        for (name, strategy) in [("per-direction", SweepStrategy::PerDirection), ("shared-source", SweepStrategy::SharedSource)] {
            group.bench_function(format!("{name}/{label}"), |b| {
                b.iter(|| direction_sweep(black_box(&engine), 4, 4, strategy).unwrap())
            });
        }
    }
    group.finish();
}

fn infmax(c: &mut Criterion) {
    let field = field();
    let mut group = c.benchmark_group("infmax");
    group.sample_size(10);
    for (label, exec) in [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)] {
        let cfg = InfmaxConfig { nv: 64, iters: 50, exec, ..InfmaxConfig::default() };
        group.bench_function(label, |b| b.iter(|| infmax_upper(black_box(&field), [1.0, 0.0], &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sweep, infmax);
criterion_main!(benches);
