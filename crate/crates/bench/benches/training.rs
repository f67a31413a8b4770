use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use fbpnn::harness::experiments::{ExperimentId, ExperimentSpec};
use fbpnn::harness::{sample_error_surface, AxisRange, SurfaceGrid};
use fbpnn::{
    fractional_partial, sensitivities, BatchMode, FractionalOrder, ParamId, TrainMode, Trainer,
};

fn forward_and_sensitivities(c: &mut Criterion) {
    let spec = ExperimentSpec::builtin(ExperimentId::Ex5a);
    let mlp = spec.network();
    let sample = spec.dataset().samples()[7].clone();
    c.bench_function("forward+sensitivities 1-15-1", |b| {
        b.iter(|| {
            let trace = mlp.forward(black_box(&sample.input)).unwrap();
            sensitivities(&mlp, &trace, &sample.target).unwrap()
        })
    });
}

fn series_partial(c: &mut Criterion) {
    let v = FractionalOrder::new(1.37).unwrap();
    c.bench_function("fractional_partial n_max=3", |b| {
        b.iter(|| {
            fractional_partial(black_box(2.5), -1.0, 0.03, [0.2, -0.1, 0.05], 0.7, v, 3).unwrap()
        })
    });
}

fn training_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("one iteration");
    for id in [ExperimentId::Ex1, ExperimentId::Ex5a] {
        let spec = ExperimentSpec::builtin(id);
        let data = spec.dataset();
        for mode in [TrainMode::Classic, TrainMode::Fsdm] {
            for batch in [BatchMode::FullBatch, BatchMode::PerSample] {
                let mut cfg = spec.trainer_config(mode);
                cfg.batch = batch;
                cfg.max_iterations = 1;
                let name = format!("{id}/{mode:?}/{batch:?}");
                group.bench_function(name, |b| {
                    b.iter_batched(
                        || spec.network(),
                        |mlp| {
                            let mut t = Trainer::new(cfg.clone(), &mlp).unwrap();
                            t.run(&mlp, &data)
                        },
                        BatchSize::SmallInput,
                    )
                });
            }
        }
    }
    group.finish();
}

fn error_surface(c: &mut Criterion) {
    let spec = ExperimentSpec::builtin(ExperimentId::Ex1);
    let grid = SurfaceGrid {
        param_a: ParamId::weight(1, 1, 1),
        range_a: AxisRange::new(-5.0, 15.0, 41).unwrap(),
        param_b: ParamId::weight(2, 1, 1),
        range_b: AxisRange::new(-5.0, 15.0, 41).unwrap(),
    };
    let (mlp, data) = (spec.network(), spec.dataset());
    c.bench_function("error surface 41x41", |b| {
        b.iter(|| sample_error_surface(&mlp, &data, &grid).unwrap())
    });
}

criterion_group!(
    benches,
    forward_and_sensitivities,
    series_partial,
    training_steps,
    error_surface
);
criterion_main!(benches);
