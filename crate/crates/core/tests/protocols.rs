use kljn_core::protocols::{kljn_map, noiseless_run, Choice, KljnParams, NoiselessParams};
use kljn_core::signal::{lumped_msv, voltmeter_reading};
use kljn_core::stats::mean_and_se;
use kljn_core::txline::LineConfig;
use kljn_core::RngStream;

fn line() -> LineConfig {
    LineConfig::new(3000.0, 4, 1e-6)
}

#[test]
fn kljn_keep_rate_tap_symmetry_and_lumped_level() {
    let line = line();
    let p = KljnParams::for_line(&line, 1000.0, 9000.0, 300.0, 1200).with_blocks(200);
    let tap = line.midpoint();
    let run = kljn_map(&p, &line, RngStream::new(41, 0), |r| {
        let v = r.tap(tap).unwrap().voltage();
        voltmeter_reading(&v[p.settle_samples..], p.voltmeter_block).unwrap()
    })
    .unwrap();

    let n = run.outcomes.len() as f64;
    let kept = run.kept() as f64;
    assert!((kept - n / 2.0).abs() < 5.0 * (n / 4.0).sqrt(), "kept {kept} of {n}");
    assert_eq!(run.key_a.len(), run.kept());

    let group = |a: Choice, b: Choice| {
        let v: Vec<f64> = run
            .outcomes
            .iter()
            .zip(&run.per_cycle)
            .filter(|(o, _)| o.alice == a && o.bob == b)
            .map(|(_, m)| *m)
            .collect();
        mean_and_se(&v)
    };
    let (lh, se_lh) = group(Choice::Low, Choice::High);
    let (hl, se_hl) = group(Choice::High, Choice::Low);
    assert!((lh - hl).abs() < 2.0 * (se_lh * se_lh + se_hl * se_hl).sqrt(), "{lh} vs {hl}");

    for (a, b, ra, rb) in [(Choice::Low, Choice::Low, 1000.0, 1000.0), (Choice::High, Choice::High, 9000.0, 9000.0)] {
        let (m, _) = group(a, b);
        let lumped = lumped_msv(ra, rb, 300.0, line.dt);
        assert!((m / lumped - 1.0).abs() < 0.1, "{a:?}{b:?}: {}", m / lumped);
    }
    assert!((lh / lumped_msv(1000.0, 9000.0, 300.0, line.dt) - 1.0).abs() < 0.1);
}

#[test]
fn noiseless_keys_agree_and_repeat() {
    let line = LineConfig::new(50.0, 6, 1e-9);
    let p = NoiselessParams::for_line(&line, 1.0, 300);
    let a = noiseless_run(&p, &line, RngStream::new(42, 0)).unwrap();
    let b = noiseless_run(&p, &line, RngStream::new(42, 0)).unwrap();
    assert_eq!(a.outcomes, b.outcomes);
    assert_eq!(a.key_a, a.key_b);
    assert_eq!(a.misclassified(), 0);
    let n = a.outcomes.len() as f64;
    assert!((a.kept() as f64 - n / 2.0).abs() < 5.0 * (n / 4.0).sqrt());
}
