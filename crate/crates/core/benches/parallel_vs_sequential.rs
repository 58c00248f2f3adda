use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sabci::epoch::{EpochSet, EpochWindow};
use sabci::filter::bandlimit;
use sabci::memd::{memd_decompose, SiftConfig};
use sabci::pipeline::clean_epoch_set;
use sabci::protocol::{build_session, SessionConfig};
use sabci::synth::{synth_session, SynthSpec};
use sabci::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn decompose(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((8, 231), |_| rng.random_range(-1.0..1.0));
    let mut group = c.benchmark_group("memd_decompose");
    for (name, execution) in MODES {
        let cfg = SiftConfig {
            execution,
            ..SiftConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| memd_decompose(x.view(), &cfg).unwrap())
        });
    }
    group.finish();
}

fn session_stages(c: &mut Criterion) {
    let plan = build_session(&SessionConfig::minimal(3)).unwrap();
    let (rec, truth) = synth_session(&plan, &SynthSpec::default()).unwrap();
    let filtered = bandlimit(&rec, Execution::Sequential).unwrap();
    let onsets = truth.target_onsets_ms();
    let set = EpochSet::segment(
        &filtered,
        &onsets,
        &vec![true; onsets.len()],
        EpochWindow::standard(256.0),
    )
    .unwrap()
    .baseline_corrected();

    let mut group = c.benchmark_group("bandlimit");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bandlimit(&rec, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("clean_epoch_set");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| clean_epoch_set(&set, &SiftConfig::default(), 20.0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, decompose, session_stages);
criterion_main!(benches);
