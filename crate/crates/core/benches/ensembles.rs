use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qtraj_core::discrete::InitialState;
use qtraj_core::experiments::{discrete_expectation_check, unravelling_check, ContinuousKind};
use qtraj_core::model::diffusive_observable;
use qtraj_core::qmath::WaveFunction;
use qtraj_core::{ContinuousModel, Execution, ModelSpec, ReferenceState, RngStream, SystemParams};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn discrete(c: &mut Criterion) {
    let spec = ModelSpec::scaled(SystemParams::equilibrium(), ReferenceState::ground(), diffusive_observable(), 100).unwrap();
    let mut group = c.benchmark_group("discrete_ensemble");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::new(name, 2000), |b| {
            b.iter(|| {
                discrete_expectation_check(&spec, InitialState::Pure(WaveFunction::excited()), 100, 2000, RngStream::new(1, 0), exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn continuous(c: &mut Criterion) {
    let m = ContinuousModel::equilibrium();
    let mut group = c.benchmark_group("continuous_ensemble");
    group.sample_size(10);
    for kind in [ContinuousKind::Jump, ContinuousKind::Diffusive] {
        for (name, exec) in modes() {
            group.bench_function(BenchmarkId::new(format!("{kind:?}/{name}"), 500), |b| {
                b.iter(|| unravelling_check(kind, &m, &WaveFunction::excited(), 1.0, 500, 1e-3, RngStream::new(2, 0), exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, discrete, continuous);
criterion_main!(benches);
