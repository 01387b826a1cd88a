use kljn_core::distill::{
    acceptance_probability, advantage_distill, distilled_error, sample_circuit, hard_decision, key_rate_pipeline, ObserverCircuit,
    PipelineConfig,
};
use kljn_core::infotheory::Column;
use kljn_core::signal::johnson_sigma;
use kljn_core::RngStream;

fn params(r_e: f64, n: usize) -> ObserverCircuit {
    let dt = 1e-6;
    let sigma_a = johnson_sigma(1000.0, 300.0, dt).unwrap();
    ObserverCircuit { v0_volts: 2.0 * sigma_a, r_a_ohms: 1000.0, r_b_ohms: 1000.0, r_e_ohms: r_e, t_kelvin: 300.0, dt_seconds: dt, n }
}

#[test]
fn distilled_errors_follow_closed_form() {
    let cfg = PipelineConfig { n_grid: vec![1, 3, 5, 9], ..Default::default() };
    let rep = key_rate_pipeline(&params(600.0, 1_000_000), &cfg, RngStream::new(71, 0)).unwrap();
    for r in &rep.rows {
        let p = distilled_error(rep.eps_ab_analytic, r.n_block);
        assert!((r.eps_b - p).abs() <= 5.0 * (p * (1.0 - p) / r.accepted as f64).sqrt(), "{r:?}");
        let q = acceptance_probability(rep.eps_ab_analytic, r.n_block);
        assert!((r.accept_rate - q).abs() <= 5.0 * (q * (1.0 - q) / r.blocks as f64).sqrt(), "{r:?}");
    }
    assert!(rep.bound_violations().is_empty());
    assert!(rep.eps_ae < rep.eps_ab);
    assert!(rep.rows.iter().any(|r| r.eps_b < r.eps_e));
}

#[test]
fn noiseless_eve_tracks_the_source_bits() {
    let p = params(0.0, 90_000);
    let s = sample_circuit(&p, RngStream::new(72, 0)).unwrap();
    let col = |n: &str| match s.column(n).unwrap() {
        Column::Real(v) => v.clone(),
        _ => unreachable!(),
    };
    let half = p.v0_volts / 2.0;
    let (u, a, b, e) = (
        hard_decision(&col("U"), half).unwrap(),
        hard_decision(&col("A"), half).unwrap(),
        hard_decision(&col("B"), half).unwrap(),
        hard_decision(&col("E"), half).unwrap(),
    );
    assert_eq!(e, u);
    for n in [1usize, 3, 5] {
        let blocks = advantage_distill(&a, &b, &e, n, RngStream::new(72, n as u64)).unwrap();
        for (k, blk) in blocks.iter().enumerate() {
            // Eve's vote is the majority of U xor A xor C over the block.
            let flips = (k * n..(k + 1) * n).filter(|&i| u[i] ^ a[i] ^ blk.true_bit).count();
            if 2 * flips != n {
                assert_eq!(blk.eve_bit, 2 * flips > n);
            }
        }
    }
    let rep = key_rate_pipeline(&p, &PipelineConfig::default(), RngStream::new(73, 0)).unwrap();
    assert_eq!(rep.best_rate(), 0.0);
    assert_eq!(rep.cmi_bound_gauss, 0.0);
}

#[test]
fn bound_shrinks_with_eve_noise() {
    let mut last = f64::INFINITY;
    for r_e in [1000.0, 500.0, 100.0, 10.0, 0.0] {
        let g = kljn_core::infotheory::gaussian_cmi(&params(r_e, 1).surrogate().unwrap(), &["A"], &["B"], &["E"]).unwrap();
        assert!(g < last, "{r_e}: {g}");
        last = g;
    }
    assert_eq!(last, 0.0);
}
