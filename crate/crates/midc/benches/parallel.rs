//! Parallel-versus-sequential comparison of the batch layers: oracle
//! sweeps and per-sample Lyapunov evaluation.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use midc::dynamics::{simulate_model, steady_state, SimModel};
use midc::grid::{bundled_fixture, load_system};
use midc::oefc::{
    resolve_coefficients, solve_batch, solve_batch_serial, GenCost, LccCost, LccCostWeights,
    OefcProblem,
};
use midc::stability::{lyapunov_decrease_report, lyapunov_decrease_report_serial, LyapunovConfig};

fn oracle_problems(count: usize) -> Vec<OefcProblem> {
    (0..count)
        .map(|i| {
            let x = (i % 17) as f64;
            OefcProblem {
                generators: (0..6)
                    .map(|g| GenCost {
                        beta: 0.08 + 0.02 * ((g + i) % 5) as f64,
                    })
                    .collect(),
                lccs: (0..4)
                    .map(|l| LccCost {
                        weights: LccCostWeights::Margin {
                            alpha: 0.05,
                            margin_pu: 0.8 + 0.1 * ((l + i) % 4) as f64,
                        },
                        u_min_pu: -20.0,
                        u_max_pu: 20.0,
                    })
                    .collect(),
                imbalance_pu: -5.0 + 0.5 * x,
            }
        })
        .collect()
}

fn bench_oracle_batch(c: &mut Criterion) {
    let problems = oracle_problems(4096);
    let mut group = c.benchmark_group("oefc_oracle_batch");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(solve_batch(black_box(&problems), 1e-12)))
    });
    group.bench_function("serial", |b| {
        b.iter(|| black_box(solve_batch_serial(black_box(&problems), 1e-12)))
    });
    group.finish();
}

fn bench_lyapunov_series(c: &mut Criterion) {
    let spec = load_system(bundled_fixture("g6_trip").unwrap()).unwrap();
    let mut scenario = spec.scenario.clone();
    scenario.sim.horizon_s = 20.0;
    let coeff = resolve_coefficients(&spec.network, &scenario.control).unwrap();
    let model = SimModel::build(&spec.network, &coeff, 0.0);
    let post = model.after_events(&scenario.events).unwrap();
    let trajectory = simulate_model(model, &scenario).unwrap();
    assert!(trajectory.failure.is_none());
    let equilibrium = steady_state(&post).unwrap();
    let config = LyapunovConfig::certified(&post, equilibrium).unwrap();
    let reference = post.reference_bus().unwrap();
    let samples = trajectory.samples_from(8.0).to_vec();

    let mut group = c.benchmark_group("lyapunov_series");
    group.bench_function("parallel", |b| {
        b.iter(|| {
            black_box(lyapunov_decrease_report(
                &samples, &post, &config, reference,
            ))
        })
    });
    group.bench_function("serial", |b| {
        b.iter(|| {
            black_box(lyapunov_decrease_report_serial(
                &samples, &post, &config, reference,
            ))
        })
    });
    group.finish();
}

criterion_group!(
    name = benches;
    config = Criterion::default()
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(3))
        .sample_size(10);
    targets = bench_oracle_batch, bench_lyapunov_series
);
criterion_main!(benches);
