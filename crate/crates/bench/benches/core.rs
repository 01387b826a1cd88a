use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use kljn_core::distill::{advantage_distill, sample_circuit, hard_decision, ObserverCircuit};
use kljn_core::infotheory::{cmi, BinningSpec, Column};
use kljn_core::signal::{johnson_sigma, voltmeter_reading};
use kljn_core::txline::{LineConfig, LineSimulator, Termination};
use kljn_core::RngStream;

fn line_stepping(c: &mut Criterion) {
    let mut g = c.benchmark_group("line_step");
    for delay in [4usize, 64, 1024] {
        let cfg = LineConfig::new(3000.0, delay, 1e-6);
        let a = Termination::thermal(1000.0, 300.0);
        let b = Termination::thermal(9000.0, 300.0);
        g.throughput(Throughput::Elements(1000));
        g.bench_function(format!("thermal_D{delay}_x1000"), |bench| {
            let mut sim = LineSimulator::new(cfg.clone(), RngStream::new(1, 0)).unwrap();
            bench.iter(|| {
                for _ in 0..1000 {
                    sim.step(&a, &b).unwrap();
                }
                black_box(sim.node_voltage(delay / 2))
            })
        });
    }
    g.finish();
}

fn circuit_params(n: usize) -> ObserverCircuit {
    let dt = 1e-6;
    let s = johnson_sigma(1000.0, 300.0, dt).unwrap();
    ObserverCircuit { v0_volts: 2.0 * s, r_a_ohms: 1000.0, r_b_ohms: 1000.0, r_e_ohms: 800.0, t_kelvin: 300.0, dt_seconds: dt, n }
}

fn information(c: &mut Criterion) {
    let samples = sample_circuit(&circuit_params(100_000), RngStream::new(2, 0)).unwrap();
    let spec = BinningSpec::uniform(16);
    let mut g = c.benchmark_group("infotheory");
    g.throughput(Throughput::Elements(samples.n() as u64));
    g.bench_function("cmi_A_B_given_E_n100k_16bins", |bench| {
        bench.iter(|| cmi(&samples, &["A"], &["B"], &["E"], &spec, RngStream::new(3, 0)).unwrap())
    });
    let x: Vec<f64> = match samples.column("A").unwrap() {
        Column::Real(v) => v.clone(),
        _ => unreachable!(),
    };
    g.bench_function("voltmeter_reading_n100k", |bench| bench.iter(|| voltmeter_reading(black_box(&x), 64).unwrap()));
    g.finish();
}

fn distillation(c: &mut Criterion) {
    let p = circuit_params(300_000);
    let samples = sample_circuit(&p, RngStream::new(4, 0)).unwrap();
    let bits = |name: &str| match samples.column(name).unwrap() {
        Column::Real(v) => hard_decision(v, p.v0_volts / 2.0).unwrap(),
        _ => unreachable!(),
    };
    let (a, b, e) = (bits("A"), bits("B"), bits("E"));
    let mut g = c.benchmark_group("distill");
    g.bench_function("sample_circuit_n300k", |bench| bench.iter(|| sample_circuit(&p, RngStream::new(5, 0)).unwrap()));
    for n in [3usize, 9] {
        g.bench_function(format!("advantage_distill_N{n}_n300k"), |bench| {
            bench.iter_batched(|| RngStream::new(6, n as u64), |rng| advantage_distill(&a, &b, &e, n, rng).unwrap(), BatchSize::SmallInput)
        });
    }
    g.finish();
}

criterion_group!(benches, line_stepping, information, distillation);
criterion_main!(benches);
