use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kljn_core::attacks::{
    attack_accuracy, combine, echo_guess, leakage_discrepancy, leakage_verdict, rms_guess, shunt_guess, transient_guess,
    write_attack_csv, EveGuess, RmsMode, NOISELESS_THRESHOLD,
};
use kljn_core::distill::{sweep_re, sweep_rows, write_sweep_csv};
use kljn_core::infotheory::{markov_test, write_report_csv, BinningSpec, JointSamples, MarkovReport};
use kljn_core::protocols::{kljn_map, noiseless_map, Choice, CycleRecord, ProtocolRun};
use kljn_core::signal::voltmeter_reading;
use kljn_core::stats::{binomial_two_sided_p, mean_and_se};
use kljn_core::txline::{write_end_csv, write_tap_csv};
use kljn_core::RngStream;

use crate::config::{Experiment, Plan};

pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Files are only ever created below the output directory.
struct Outputs<'a> {
    dir: &'a Path,
    report: &'a mut Report,
}

impl Outputs<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path: PathBuf = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.report.files.push(name.to_string());
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    }
}

// Stream labels keep every experiment's randomness independent of the others.
const KLJN_STREAM: u64 = 1;
const NOISELESS_STREAM: u64 = 2;
const SHUNT_STREAM: u64 = 3;
const MARKOV_STREAM: u64 = 4;
const DISTILL_STREAM: u64 = 5;

pub fn run(plan: &Plan) -> Result<Report> {
    let mut report = Report::default();
    let mut out = Outputs { dir: &plan.output_dir, report: &mut report };
    match plan.experiment {
        Experiment::Kljn => kljn(plan, &mut out)?,
        Experiment::Noiseless => noiseless(plan, &mut out)?,
        Experiment::AttackSuite => attack_suite(plan, &mut out)?,
        Experiment::MarkovTest => markov(plan, &mut out)?,
        Experiment::DistillSweep => distill(plan, &mut out)?,
    }
    Ok(report)
}

#[derive(Debug, Clone)]
struct KljnCycle {
    tap_msv: f64,
    attacks: Option<KljnGuesses>,
    trace: Option<CycleRecord>,
}

#[derive(Debug, Clone, Copy)]
struct KljnGuesses {
    echo: EveGuess,
    gamma_alice: f64,
    gamma_bob: f64,
    rms: EveGuess,
    transient: EveGuess,
}

fn run_kljn(plan: &Plan, attacks: bool) -> Result<ProtocolRun<KljnCycle>> {
    let line = plan.line.as_ref().expect("resolved");
    let (params, traces) = plan.kljn.as_ref().expect("resolved");
    let tap = plan.tap;
    let thresholds = params.effective_thresholds(line.dt);
    let mid = params.analytic_levels(line.dt)[1];
    let run = kljn_map(params, line, RngStream::new(plan.seed, KLJN_STREAM), |r| -> kljn_core::Result<KljnCycle> {
        let v = r.tap(tap).expect("tap recorded").voltage();
        let tap_msv = voltmeter_reading(&v[params.settle_samples..], params.voltmeter_block)?;
        let attacks = match (attacks, plan.echo.as_ref()) {
            (true, Some(cfg)) => {
                let (echo, st) = echo_guess(r, cfg)?;
                let (rms, _) = rms_guess(r, tap, params, thresholds, mid, RmsMode::Forced)?;
                let transient = transient_guess(r, tap, plan.kljn_transient_threshold)?;
                Some(KljnGuesses { echo, gamma_alice: st.gamma_alice, gamma_bob: st.gamma_bob, rms, transient })
            }
            _ => None,
        };
        Ok(KljnCycle { tap_msv, attacks, trace: (r.outcome.cycle < *traces).then(|| r.clone()) })
    })?;
    unwrap_cycles(run)
}

/// Surface the first per-cycle error of a run.
fn unwrap_cycles<T>(run: ProtocolRun<kljn_core::Result<T>>) -> Result<ProtocolRun<T>> {
    let ProtocolRun { protocol, outcomes, msv, key_a, key_b, per_cycle } = run;
    let per_cycle = per_cycle.into_iter().collect::<kljn_core::Result<Vec<_>>>()?;
    Ok(ProtocolRun { protocol, outcomes, msv, key_a, key_b, per_cycle })
}

fn write_traces(out: &mut Outputs, prefix: &str, records: impl Iterator<Item = CycleRecord>) -> Result<()> {
    for r in records {
        let c = r.outcome.cycle;
        for t in &r.taps {
            write_tap_csv(out.create(&format!("traces/{prefix}_cycle{c}_tap{}.csv", t.position))?, t)?;
        }
        write_end_csv(out.create(&format!("traces/{prefix}_cycle{c}_alice.csv"))?, &r.alice)?;
        write_end_csv(out.create(&format!("traces/{prefix}_cycle{c}_bob.csv"))?, &r.bob)?;
    }
    Ok(())
}

fn protocol_checks<T>(report: &mut Report, label: &str, run: &ProtocolRun<T>) {
    let n = run.outcomes.len() as f64;
    let kept = run.kept();
    let bad = run.key_a.iter().zip(&run.key_b).filter(|(a, b)| a != b).count();
    report.check(&format!("{label}_keys_agree"), bad == 0, format!("{bad} of {kept} kept bits differ"));
    let sd = (n / 4.0).sqrt();
    let z = (kept as f64 - n / 2.0) / sd;
    report.check(
        &format!("{label}_keep_rate"),
        z.abs() <= 5.0,
        format!("kept {kept} of {n} cycles, {z:+.2} SD from one half (limit 5)"),
    );
}

fn group<T>(run: &ProtocolRun<T>, a: Choice, b: Choice, value: impl Fn(usize) -> f64) -> (f64, f64) {
    let v: Vec<f64> = run.outcomes.iter().enumerate().filter(|(_, o)| o.alice == a && o.bob == b).map(|(i, _)| value(i)).collect();
    mean_and_se(&v)
}

fn kljn(plan: &Plan, out: &mut Outputs) -> Result<()> {
    let run = run_kljn(plan, false)?;
    run.write_summary_csv(out.create("kljn_run.csv")?)?;
    protocol_checks(out.report, "kljn", &run);
    for (name, value) in [
        ("alice", &(|i: usize| run.msv[i].0) as &dyn Fn(usize) -> f64),
        ("bob", &|i: usize| run.msv[i].1),
        ("eve_tap", &|i: usize| run.per_cycle[i].tap_msv),
    ] {
        let (lh, se_lh) = group(&run, Choice::Low, Choice::High, value);
        let (hl, se_hl) = group(&run, Choice::High, Choice::Low, value);
        let z = (lh - hl) / (se_lh * se_lh + se_hl * se_hl).sqrt();
        out.report.check(
            &format!("kljn_{name}_lh_hl_symmetry"),
            z.abs() < 3.0,
            format!("mean square LH={lh:.4e} V^2, HL={hl:.4e} V^2, difference {z:+.2} SE (limit 3)"),
        );
    }
    write_traces(out, "kljn", run.per_cycle.into_iter().filter_map(|c| c.trace))
}

#[derive(Debug, Clone)]
struct NoiselessCycle {
    transient: EveGuess,
    steady_ms: f64,
    leakage: f64,
    trace: Option<CycleRecord>,
}

fn run_noiseless(plan: &Plan) -> Result<ProtocolRun<NoiselessCycle>> {
    let line = plan.line.as_ref().expect("resolved");
    let (params, traces) = plan.noiseless.as_ref().expect("resolved");
    let tap = plan.tap;
    let run = noiseless_map(params, line, RngStream::new(plan.seed, NOISELESS_STREAM), |r| -> kljn_core::Result<NoiselessCycle> {
        let v = r.tap(tap).expect("tap recorded").voltage();
        let steady_ms = (0..2)
            .map(|h| {
                let w = &v[params.settled_window(line, h)];
                w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64
            })
            .sum::<f64>()
            / 2.0;
        Ok(NoiselessCycle {
            transient: transient_guess(r, tap, NOISELESS_THRESHOLD)?,
            steady_ms,
            leakage: leakage_discrepancy(r, params, line)?,
            trace: (r.outcome.cycle < *traces).then(|| r.clone()),
        })
    })?;
    unwrap_cycles(run)
}

fn noiseless(plan: &Plan, out: &mut Outputs) -> Result<()> {
    let run = run_noiseless(plan)?;
    run.write_summary_csv(out.create("noiseless_run.csv")?)?;
    protocol_checks(out.report, "noiseless", &run);
    let bad = run.misclassified();
    out.report.check("noiseless_classification", bad == 0, format!("{bad} cycles kept or dropped against the choices"));
    write_traces(out, "noiseless", run.per_cycle.into_iter().filter_map(|c| c.trace))
}

fn accuracy_check(out: &mut Outputs, name: &str, guesses: &[EveGuess], run_outcomes: &[kljn_core::protocols::CycleOutcome], min: f64) -> Result<()> {
    let acc = attack_accuracy(guesses, run_outcomes)?;
    let value = acc.accuracy.unwrap_or(0.0);
    out.report.check(
        name,
        acc.kept > 0 && value >= min,
        format!("{}/{} answered kept cycles correct ({value:.4}, need >= {min}), abstained on {:.4}", acc.correct, acc.answered, acc.abstain_rate),
    );
    Ok(())
}

fn attack_suite(plan: &Plan, out: &mut Outputs) -> Result<()> {
    let kljn = run_kljn(plan, true)?;
    let guesses: Vec<KljnGuesses> = kljn.per_cycle.iter().map(|c| c.attacks.expect("attacks enabled")).collect();
    let echo: Vec<EveGuess> = guesses.iter().map(|g| g.echo).collect();
    let rms: Vec<EveGuess> = guesses.iter().map(|g| g.rms).collect();
    let transient: Vec<EveGuess> = guesses.iter().map(|g| g.transient).collect();
    let both = combine(&transient, &echo)?;
    write_attack_csv(out.create("attack_echo.csv")?, "echo", &echo, &kljn.outcomes)?;
    write_attack_csv(out.create("attack_rms.csv")?, "rms", &rms, &kljn.outcomes)?;
    write_attack_csv(out.create("attack_transient_kljn.csv")?, "transient", &transient, &kljn.outcomes)?;
    accuracy_check(out, "echo_recovers_kljn_key", &echo, &kljn.outcomes, 0.99)?;
    accuracy_check(out, "transient_plus_echo_recovers_kljn_key", &both, &kljn.outcomes, 0.99)?;
    let acc = attack_accuracy(&rms, &kljn.outcomes)?;
    let p = binomial_two_sided_p(acc.correct as u64, acc.answered as u64, 0.5);
    out.report.check(
        "rms_attack_at_chance",
        p >= 0.001,
        format!("forced guesses {}/{} correct, two-sided binomial p={p:.4} (need >= 0.001)", acc.correct, acc.answered),
    );

    let noiseless = run_noiseless(plan)?;
    let transient: Vec<EveGuess> = noiseless.per_cycle.iter().map(|c| c.transient).collect();
    write_attack_csv(out.create("attack_transient_noiseless.csv")?, "transient", &transient, &noiseless.outcomes)?;
    accuracy_check(out, "transient_recovers_noiseless_key", &transient, &noiseless.outcomes, 1.0)?;

    let (r_s, cycles, i_min) = plan.shunt.expect("resolved");
    let clean: Vec<f64> = noiseless.per_cycle.iter().map(|c| c.leakage).collect();
    let ids: Vec<usize> = noiseless.outcomes.iter().map(|o| o.cycle).collect();
    let v = leakage_verdict(&clean, &ids, i_min)?;
    out.report.check(
        "leakage_monitor_quiet_without_shunt",
        !v.abort,
        format!("largest discrepancy {:.3e} A against resolution {i_min:.3e} A", v.max_discrepancy),
    );

    let line = plan.line.as_ref().expect("resolved").clone().with_shunt(plan.tap, r_s);
    let (base, _) = plan.noiseless.as_ref().expect("resolved");
    let params = kljn_core::protocols::NoiselessParams { cycles, ..base.clone() };
    let coins = RngStream::new(plan.seed, SHUNT_STREAM);
    let shunted = noiseless_map(&params, &line, coins.substream(0), |r| -> kljn_core::Result<(EveGuess, f64)> {
        let mut coin = coins.substream(1 + r.outcome.cycle as u64).rng();
        Ok((shunt_guess(r, &params, &line, &mut coin)?, leakage_discrepancy(r, &params, &line)?))
    })?;
    let shunted = unwrap_cycles(shunted)?;
    let per_cycle = &shunted.per_cycle;
    let guesses: Vec<EveGuess> = per_cycle.iter().map(|c| c.0).collect();
    write_attack_csv(out.create("attack_shunt.csv")?, "shunt", &guesses, &shunted.outcomes)?;
    accuracy_check(out, "shunt_recovers_noiseless_key", &guesses, &shunted.outcomes, 0.99)?;
    let d: Vec<f64> = per_cycle.iter().map(|c| c.1).collect();
    let ids: Vec<usize> = shunted.outcomes.iter().map(|o| o.cycle).collect();
    let v = leakage_verdict(&d, &ids, i_min)?;
    out.report.check(
        "leakage_monitor_catches_shunt",
        v.abort,
        format!(
            "R_s={r_s} ohms: largest discrepancy {:.3e} A against resolution {i_min:.3e} A, first abort at cycle {:?}",
            v.max_discrepancy, v.first_abort_cycle
        ),
    );
    Ok(())
}

fn markov_check(out: &mut Outputs, name: &str, samples: &JointSamples, plan: &Plan, stream: u64) -> Result<()> {
    let (bins, tol) = plan.markov;
    let spec = BinningSpec::uniform(bins);
    let r: MarkovReport = markov_test(samples, &["X"], &["Y"], &["ZA"], &["ZB"], &spec, tol, RngStream::new(plan.seed, MARKOV_STREAM).substream(stream))?;
    write_report_csv(out.create(&format!("markov_{name}.csv"))?, &r.rows)?;
    let h = [r.h_x_given_za, r.h_x_given_z, r.h_x_given_zy];
    let spread = h.iter().copied().fold(f64::MIN, f64::max) - h.iter().copied().fold(f64::MAX, f64::min);
    let agree = spread <= r.screening.baseline.max(r.cmi_xy.baseline) + tol;
    out.report.check(
        &format!("markov_{name}"),
        r.pass && agree,
        format!(
            "n={} H(X|Z_A)={:.4} H(X|Z)={:.4} H(X|Z,Y)={:.4}; I(X;Z_B|Z_A)={:.4} (baseline {:.4}); I(X;Y|Z)={:.4} (baseline {:.4}); tolerance {tol} bits",
            samples.n(),
            h[0],
            h[1],
            h[2],
            r.screening.estimate,
            r.screening.baseline,
            r.cmi_xy.estimate,
            r.cmi_xy.baseline
        ),
    );
    Ok(())
}

fn markov(plan: &Plan, out: &mut Outputs) -> Result<()> {
    // Eve's summary: the echo signs at either end of the KLJN line.
    let kljn = run_kljn(plan, true)?;
    let (mut x, mut y, mut za, mut zb) = (vec![], vec![], vec![], vec![]);
    for (o, c) in kljn.outcomes.iter().zip(&kljn.per_cycle) {
        if let (Some(a), Some(b), Some(g)) = (o.alice_bit, o.bob_bit, c.attacks) {
            x.push(a);
            y.push(b);
            za.push(g.gamma_alice > 0.0);
            zb.push(g.gamma_bob > 0.0);
        }
    }
    let samples = JointSamples::new().with_bits("X", &x)?.with_bits("Y", &y)?.with_bits("ZA", &za)?.with_bits("ZB", &zb)?;
    markov_check(out, "kljn", &samples, plan, 0)?;

    // Noiseless protocol: first-arrival direction and the steady tap level.
    let noiseless = run_noiseless(plan)?;
    let (mut x, mut y, mut za, mut zb) = (vec![], vec![], vec![], vec![]);
    for (o, c) in noiseless.outcomes.iter().zip(&noiseless.per_cycle) {
        if let (Some(a), Some(b)) = (o.alice_bit, o.bob_bit) {
            x.push(a);
            y.push(b);
            za.push(c.transient.bit.map_or(-1, i64::from));
            zb.push(c.steady_ms);
        }
    }
    let samples = JointSamples::new().with_bits("X", &x)?.with_bits("Y", &y)?.with_symbols("ZA", za)?.with_real("ZB", zb)?;
    markov_check(out, "noiseless", &samples, plan, 1)
}

fn distill(plan: &Plan, out: &mut Outputs) -> Result<()> {
    let (params, grid, cfg) = plan.distill.as_ref().expect("resolved");
    let reports = sweep_re(params, grid, cfg, RngStream::new(plan.seed, DISTILL_STREAM))?;
    let rows = sweep_rows(&reports);
    write_sweep_csv(out.create("sweep.csv")?, &rows)?;
    for rep in &reports {
        let bad = rep.bound_violations();
        let r_e = rep.params.r_e_ohms;
        out.report.check(
            &format!("rate_within_cmi_bound_R_E={r_e}"),
            bad.is_empty(),
            format!(
                "best rate {:.5} bits/sample, I(A;B|E) Monte Carlo {:.5} +/- {:.5}, Gaussian {:.5}; violations at N={bad:?}",
                rep.best_rate(),
                rep.cmi_bound_mc.estimate,
                rep.cmi_bound_mc.standard_error,
                rep.cmi_bound_gauss
            ),
        );
        if r_e == 0.0 {
            let zero = rows.iter().filter(|r| r.r_e_ohms == 0.0).all(|r| r.ck_rate_per_sample == 0.0 && r.cmi_bound_gauss == 0.0);
            out.report.check("no_key_against_noiseless_eve", zero, "R_E=0 rows carry zero rate and zero Gaussian bound".into());
        }
    }
    Ok(())
}

pub fn write_summary(path: &Path, plan: &Plan, report: &Report) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "experiment: {}", plan.experiment)?;
    writeln!(w, "seed: {}", plan.seed)?;
    for c in &report.checks {
        writeln!(w, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    writeln!(w, "files: {}", report.files.join(", "))?;
    writeln!(w, "result: {}", if report.pass() { "PASS" } else { "FAIL" })?;
    w.flush()?;
    Ok(())
}
