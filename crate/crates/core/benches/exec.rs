use bsq_core::dynamics::{Model, NoisePath};
use bsq_core::ergodics::{lln_probe, EnsembleConfig, InitialLaw, Observable};
use bsq_core::malliavin::assemble_m;
use bsq_core::variational::LinearFlow;
use bsq_core::{Exec, PhysParams, SpectralState};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn gram(c: &mut Criterion) {
    let p = PhysParams::new(1.0, 1.0, 1.0);
    let mut group = c.benchmark_group("assemble_m");
    group.sample_size(10);
    for n in [3usize, 5] {
        let model = Model::new(p.clone(), n);
        let path = NoisePath::generate(1, p.d(), 0.01, 50);
        let tr = model.evolve(&SpectralState::zeros(n), 0.5, &path).unwrap();
        let flow = LinearFlow::new(&tr, 0, 50).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| b.iter(|| assemble_m(black_box(&flow), 0, 50, exec).unwrap()));
        }
    }
    group.finish();
}

fn ensemble(c: &mut Criterion) {
    let cfg = EnsembleConfig {
        params: PhysParams::new(1.0, 1.0, 1.0),
        n_trunc: 4,
        dt: 0.01,
        samples: 32,
        seed: 3,
        initial: InitialLaw::Fixed(SpectralState::zeros(4)),
    };
    let obs = Observable::energy();
    let mut group = c.benchmark_group("lln_probe");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| lln_probe(black_box(&cfg), &obs, &[0.5, 1.0], exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, gram, ensemble);
criterion_main!(benches);
