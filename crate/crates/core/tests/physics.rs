use kljn_core::txline::{run, LineConfig, LineSimulator, Termination, TerminationSchedule};
use kljn_core::RngStream;
use proptest::prelude::*;

fn charged(z0: f64, d: usize, r_src: f64, seed: u64) -> LineSimulator {
    let mut sim = LineSimulator::new(LineConfig::new(z0, d, 1e-9), RngStream::new(seed, 0)).unwrap();
    let a = Termination::battery(1.0, r_src);
    let b = Termination::thermal(3.0 * z0, 1e7);
    for _ in 0..3 * d + 1 {
        sim.step(&a, &b).unwrap();
    }
    sim
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn open_line_conserves_energy(z0 in 1.0f64..1e4, d in 2usize..40, r in 0.0f64..1e4, seed in 0u64..1000) {
        let mut sim = charged(z0, d, r, seed);
        let e0 = sim.energy();
        prop_assume!(e0 > 0.0);
        let open = Termination::open();
        for _ in 0..20 * d {
            sim.step(&open, &open).unwrap();
            prop_assert!(((sim.energy() - e0) / e0).abs() < 1e-13);
        }
    }

    #[test]
    fn shorted_line_conserves_energy(z0 in 1.0f64..1e4, d in 2usize..40, seed in 0u64..1000) {
        let mut sim = charged(z0, d, z0, seed);
        let e0 = sim.energy();
        let short = Termination::resistor(0.0);
        for _ in 0..20 * d {
            sim.step(&short, &Termination::open()).unwrap();
            prop_assert!(((sim.energy() - e0) / e0).abs() < 1e-13);
        }
    }

    #[test]
    fn matched_ends_absorb_within_two_transits(z0 in 1.0f64..1e4, d in 2usize..40, seed in 0u64..1000) {
        let mut sim = charged(z0, d, 0.3 * z0, seed);
        let m = Termination::resistor(z0);
        for _ in 0..2 * d {
            sim.step(&m, &m).unwrap();
        }
        prop_assert!(sim.right().iter().chain(sim.left()).all(|&v| v == 0.0));
    }

    #[test]
    fn disturbance_travels_one_cell_per_step(d in 2usize..40, tap_frac in 0.0f64..1.0, r in 0.0f64..1e3) {
        let tap = 1 + ((d - 2) as f64 * tap_frac) as usize;
        let cfg = LineConfig::new(50.0, d, 1e-9).with_taps(vec![tap]);
        let a = TerminationSchedule::constant(Termination::battery(1.0, r));
        let b = TerminationSchedule::constant(Termination::resistor(75.0));
        let rec = run(&cfg, &a, &b, 2 * d, RngStream::new(1, 0)).unwrap();
        let v = rec.taps[0].voltage();
        prop_assert!(v[..tap].iter().all(|&x| x == 0.0));
        prop_assert!(v[tap] != 0.0);
        prop_assert!(rec.bob.voltage.samples()[..d].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identical_streams_give_identical_traces(seed in 0u64..u64::MAX, d in 2usize..16) {
        let cfg = LineConfig::new(50.0, d, 1e-9);
        let a = TerminationSchedule::constant(Termination::thermal(20.0, 300.0));
        let b = TerminationSchedule::constant(Termination::thermal(200.0, 300.0));
        let x = run(&cfg, &a, &b, 64, RngStream::new(seed, 3)).unwrap();
        let y = run(&cfg, &a, &b, 64, RngStream::new(seed, 3)).unwrap();
        prop_assert_eq!(x.taps, y.taps);
        prop_assert_eq!(x.alice, y.alice);
    }
}
