use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    classify_msv, Choice, CycleOutcome, CycleRecord, Level, Protocol, ProtocolRun, SessionRows, Thresholds, SESSION_CYCLES,
};
use crate::error::{domain, Result};
use crate::signal::{lumped_msv, voltmeter_reading, RngStream, SampledTrace};
use crate::txline::{EndRecord, LineConfig, LineSimulator, TapRecord, Termination};

/// Parameters of the resistor-switching protocol.
///
/// Each party reads its terminal over `[settle_samples, samples_per_cycle)`
/// with a slow voltmeter ([`voltmeter_reading`] with `voltmeter_block`
/// samples). The Johnson sources are white up to `f_N`, far above the line's
/// round-trip frequency, so an instantaneous full-band reading only sees the
/// thermal-equilibrium wave level `2 k_B T Z0 f_N`; the slow voltmeter
/// recovers the quasi-static level `4 k_B T (R_A || R_B) f_N` once the block
/// spans many round trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KljnParams {
    pub r_low_ohms: f64,
    pub r_high_ohms: f64,
    pub t_kelvin: f64,
    pub cycles: usize,
    pub samples_per_cycle: usize,
    pub settle_samples: usize,
    pub voltmeter_block: usize,
    /// Decision thresholds in volts squared; geometric midpoints of the
    /// analytic levels when absent.
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    /// Replace Bob's L/H resistors, e.g. to make him matched to the line.
    #[serde(default)]
    pub bob_resistors_ohms: Option<(f64, f64)>,
}

impl KljnParams {
    /// Default regime for `line`: settle for 10 round trips, a voltmeter
    /// block of 8 round trips and 800 blocks per cycle.
    pub fn for_line(line: &LineConfig, r_low: f64, r_high: f64, kelvin: f64, cycles: usize) -> Self {
        let round_trip = 2 * line.delay;
        let settle = 10 * round_trip;
        let block = 8 * round_trip;
        Self {
            r_low_ohms: r_low,
            r_high_ohms: r_high,
            t_kelvin: kelvin,
            cycles,
            samples_per_cycle: settle + 800 * block,
            settle_samples: settle,
            voltmeter_block: block,
            thresholds: None,
            bob_resistors_ohms: None,
        }
    }

    /// Shrink the cycle to `blocks` voltmeter blocks after settling.
    pub fn with_blocks(mut self, blocks: usize) -> Self {
        self.samples_per_cycle = self.settle_samples + blocks * self.voltmeter_block;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_low_ohms > 0.0 && self.r_low_ohms < self.r_high_ohms && self.r_high_ohms.is_finite()) {
            return domain(format!("need 0 < R_L < R_H, got {} and {}", self.r_low_ohms, self.r_high_ohms));
        }
        if !(self.t_kelvin >= 0.0) {
            return domain("temperature must be non-negative");
        }
        if self.settle_samples >= self.samples_per_cycle {
            return domain("settle_samples must be shorter than the cycle");
        }
        if self.voltmeter_block == 0 || 2 * self.voltmeter_block > self.samples_per_cycle - self.settle_samples {
            return domain("measurement window must hold two voltmeter blocks");
        }
        if let Some(t) = self.thresholds {
            if !(t.low < t.high) {
                return domain("threshold low must be below threshold high");
            }
        }
        if let Some((l, h)) = self.bob_resistors_ohms {
            if !(l > 0.0 && h > 0.0) {
                return domain("Bob's resistors must be positive");
            }
        }
        Ok(())
    }

    pub fn alice_resistor(&self, c: Choice) -> f64 {
        match c {
            Choice::Low => self.r_low_ohms,
            Choice::High => self.r_high_ohms,
        }
    }

    pub fn bob_resistor(&self, c: Choice) -> f64 {
        let (l, h) = self.bob_resistors_ohms.unwrap_or((self.r_low_ohms, self.r_high_ohms));
        match c {
            Choice::Low => l,
            Choice::High => h,
        }
    }

    /// Quasi-static mean-square levels `[LL, LH, HH]` in volts squared.
    pub fn analytic_levels(&self, dt: f64) -> [f64; 3] {
        let (l, h, t) = (self.r_low_ohms, self.r_high_ohms, self.t_kelvin);
        [lumped_msv(l, l, t, dt), lumped_msv(l, h, t, dt), lumped_msv(h, h, t, dt)]
    }

    pub fn effective_thresholds(&self, dt: f64) -> Thresholds {
        self.thresholds.unwrap_or_else(|| {
            let [ll, mid, hh] = self.analytic_levels(dt);
            Thresholds { low: (ll * mid).sqrt(), high: (mid * hh).sqrt() }
        })
    }
}

/// Run the protocol, apply `f` to every cycle record and keep only its
/// result. Memory use is bounded by one session's cycle at a time.
pub fn kljn_map<T, F>(params: &KljnParams, line: &LineConfig, rng: RngStream, f: F) -> Result<ProtocolRun<T>>
where
    T: Send,
    F: Fn(&CycleRecord) -> T + Sync,
{
    params.validate()?;
    line.validate()?;
    let sessions = params.cycles.div_ceil(SESSION_CYCLES);
    let parts = (0..sessions)
        .into_par_iter()
        .map(|s| {
            let first = s * SESSION_CYCLES;
            let last = (first + SESSION_CYCLES).min(params.cycles);
            run_session(params, line, rng.substream(s as u64), first..last, &f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolRun::assemble(Protocol::Kljn, parts.into_iter().flatten().collect()))
}

/// Run the protocol keeping every cycle record. Only for short runs.
pub fn kljn_run(params: &KljnParams, line: &LineConfig, rng: RngStream) -> Result<ProtocolRun<CycleRecord>> {
    kljn_map(params, line, rng, CycleRecord::clone)
}

fn run_session<T, F>(
    params: &KljnParams,
    line: &LineConfig,
    rng: RngStream,
    cycles: std::ops::Range<usize>,
    f: &F,
) -> Result<SessionRows<T>>
where
    F: Fn(&CycleRecord) -> T,
{
    let mut sim = LineSimulator::new(line.clone(), rng.substream(1))?;
    let mut coins = rng.substream(2).rng();
    let thresholds = params.effective_thresholds(line.dt);
    let n = params.samples_per_cycle;
    let d = line.delay;
    let mut out = Vec::with_capacity(cycles.len());

    for cycle in cycles {
        let alice = Choice::from_bit(coins.random());
        let bob = Choice::from_bit(coins.random());
        let term_a = Termination::thermal(params.alice_resistor(alice), params.t_kelvin);
        let term_b = Termination::thermal(params.bob_resistor(bob), params.t_kelvin);

        let mut plus = vec![Vec::with_capacity(n); line.taps.len()];
        let mut minus = vec![Vec::with_capacity(n); line.taps.len()];
        let mut ends = [(); 4].map(|_| Vec::with_capacity(n));
        for _ in 0..n {
            sim.step(&term_a, &term_b)?;
            for (j, &tap) in line.taps.iter().enumerate() {
                let (p, m) = sim.waves(tap);
                plus[j].push(p);
                minus[j].push(m);
            }
            ends[0].push(sim.node_voltage(0));
            ends[1].push(sim.alice_current());
            ends[2].push(sim.node_voltage(d));
            ends[3].push(sim.bob_current());
        }

        let window = params.settle_samples..n;
        let msv_alice = voltmeter_reading(&ends[0][window.clone()], params.voltmeter_block)?;
        let msv_bob = voltmeter_reading(&ends[2][window], params.voltmeter_block)?;
        let kept = classify_msv(msv_alice, thresholds) == Level::Mid && classify_msv(msv_bob, thresholds) == Level::Mid;
        let outcome = CycleOutcome::new(cycle, alice, bob, kept);

        let dt = line.dt;
        let taps = line
            .taps
            .iter()
            .zip(plus.into_iter().zip(minus))
            .map(|(&position, (p, m))| {
                Ok(TapRecord { position, v_plus: SampledTrace::new(dt, p)?, v_minus: SampledTrace::new(dt, m)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let [av, ai, bv, bi] = ends;
        let record = CycleRecord {
            outcome,
            msv_alice,
            msv_bob,
            taps,
            alice: EndRecord { voltage: SampledTrace::new(dt, av)?, current: SampledTrace::new(dt, ai)? },
            bob: EndRecord { voltage: SampledTrace::new(dt, bv)?, current: SampledTrace::new(dt, bi)? },
            shunt: None,
        };
        out.push((outcome, (msv_alice, msv_bob), f(&record)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> LineConfig {
        LineConfig::new(3000.0, 4, 5e-6).with_taps(vec![2])
    }

    #[test]
    fn default_thresholds_are_geometric_midpoints() {
        let p = KljnParams::for_line(&line(), 1e3, 9e3, 300.0, 1);
        let [ll, mid, hh] = p.analytic_levels(5e-6);
        // parallel resistances 500 : 900 : 4500 ohms
        assert!((mid / ll - 1.8).abs() < 1e-12);
        assert!((hh / ll - 9.0).abs() < 1e-12);
        let t = p.effective_thresholds(5e-6);
        assert!((t.low - (ll * mid).sqrt()).abs() < 1e-24);
        assert!(ll < t.low && t.low < mid && mid < t.high && t.high < hh);
    }

    #[test]
    fn validation() {
        let p = KljnParams::for_line(&line(), 1e3, 9e3, 300.0, 1);
        assert!(p.validate().is_ok());
        let mut bad = p.clone();
        bad.r_low_ohms = 9e3;
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.settle_samples = bad.samples_per_cycle;
        assert!(bad.validate().is_err());
        let mut bad = p;
        bad.thresholds = Some(Thresholds { low: 2.0, high: 1.0 });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn short_run_is_deterministic_and_keys_agree() {
        let p = KljnParams::for_line(&line(), 1e3, 9e3, 300.0, 40);
        let a = kljn_map(&p, &line(), RngStream::new(5, 0), |r| r.msv_alice).unwrap();
        let b = kljn_map(&p, &line(), RngStream::new(5, 0), |r| r.msv_alice).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.per_cycle, b.per_cycle);
        assert_eq!(a.key_a, a.key_b);
        assert_eq!(a.misclassified(), 0);
        for o in &a.outcomes {
            assert_eq!(o.kept, o.choices_differ());
        }
    }

    #[test]
    fn full_band_tap_level_is_termination_independent() {
        // In the wave regime the line sits in thermal equilibrium: every
        // travelling wave carries k_B T Z0 f_N regardless of the resistors.
        let p = KljnParams::for_line(&line(), 1e3, 9e3, 300.0, 8).with_blocks(200);
        let run = kljn_map(&p, &line(), RngStream::new(8, 0), |r| {
            let t = &r.taps[0];
            crate::signal::mean_square(&t.v_plus, p.settle_samples..t.v_plus.len()).unwrap()
        })
        .unwrap();
        let expect = crate::signal::BOLTZMANN * 300.0 * 3000.0 * crate::signal::nyquist(5e-6);
        for ms in run.per_cycle {
            assert!((ms / expect - 1.0).abs() < 0.05, "{}", ms / expect);
        }
    }
}
