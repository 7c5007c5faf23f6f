use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use coherent_youla::exec::Exec;
use coherent_youla::grid::FrequencyGrid;
use coherent_youla::linalg::CMat;
use coherent_youla::physreal::{slh_to_statespace, SlhModel};
use coherent_youla::statespace::{FreqResponse, StateSpace};

/// Chain of detuned cavities, a deterministic mid-sized doubled system.
fn plant(modes: usize) -> StateSpace {
    let mut sys = slh_to_statespace(&SlhModel::cavity(&[1.0, 2.0], 0.3).unwrap()).unwrap();
    for k in 1..modes {
        let next = slh_to_statespace(&SlhModel::cavity(&[1.0 + 0.1 * k as f64, 2.0], 0.3 * k as f64).unwrap()).unwrap();
        sys = sys.series(&next).unwrap();
    }
    sys
}

fn sweeps(cr: &mut Criterion) {
    let grid = FrequencyGrid::symmetric_log(1e-3, 1e3, 1024, true).unwrap();
    let mut group = cr.benchmark_group("frequency_sweep");
    for modes in [2, 8] {
        let sys = plant(modes);
        for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, modes), &sys, |b, sys| {
                b.iter(|| {
                    let v: Vec<CMat> = black_box(sys).sweep(&grid, exec).unwrap();
                    v.iter().map(|m| m[(0, 0)]).sum::<num_complex::Complex64>()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
