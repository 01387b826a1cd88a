use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Choice, CycleOutcome, CycleRecord, Protocol, ProtocolRun, SessionRows, SESSION_CYCLES};
use crate::error::{domain, Result};
use crate::signal::{RngStream, SampledTrace};
use crate::txline::{EndRecord, LineConfig, LineSimulator, ShuntRecord, TapRecord, Termination};

/// Parameters of the noiseless battery protocol.
///
/// In its H phase a party connects a battery of `v0_volts` behind
/// `source_ohms` (the line impedance when absent); in its L phase its end is
/// open. The line is grounded (all waves zeroed) for the first
/// `ground_samples` of every half cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiselessParams {
    pub v0_volts: f64,
    pub cycles: usize,
    pub samples_per_half: usize,
    pub ground_samples: usize,
    #[serde(default)]
    pub source_ohms: Option<f64>,
}

impl NoiselessParams {
    /// Half cycles of 20 round trips with a 2-sample grounding window.
    pub fn for_line(line: &LineConfig, v0: f64, cycles: usize) -> Self {
        Self { v0_volts: v0, cycles, samples_per_half: 2 + 40 * line.delay, ground_samples: 2, source_ohms: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0_volts > 0.0 && self.v0_volts.is_finite()) {
            return domain(format!("V0 must be positive, got {}", self.v0_volts));
        }
        if self.ground_samples >= self.samples_per_half {
            return domain("ground_samples must be shorter than a half cycle");
        }
        if let Some(r) = self.source_ohms {
            if !(r >= 0.0 && r.is_finite()) {
                return domain(format!("source resistance must be >= 0, got {r}"));
            }
        }
        Ok(())
    }

    /// Validate together with the line the protocol will run on.
    pub fn validate_for(&self, line: &LineConfig) -> Result<()> {
        self.validate()?;
        line.validate()?;
        if self.samples_per_half <= self.ground_samples + 2 * line.delay {
            return domain("half cycle must outlast grounding plus one round trip");
        }
        Ok(())
    }

    pub fn source_resistance(&self, line: &LineConfig) -> f64 {
        self.source_ohms.unwrap_or(line.z0)
    }

    pub fn cycle_len(&self) -> usize {
        2 * self.samples_per_half
    }

    /// Cycle-relative sample range of half `h` over which the parties (and the
    /// steady-state attacks) average: after grounding plus one round trip.
    pub fn settled_window(&self, line: &LineConfig, h: usize) -> std::ops::Range<usize> {
        let start = h * self.samples_per_half;
        start + self.ground_samples + 2 * line.delay..start + self.samples_per_half
    }
}

/// Is the party with ordering `c` connected to its battery in half `h`?
pub(crate) fn battery_on(c: Choice, h: usize) -> bool {
    c.is_high() == (h == 0)
}

pub fn noiseless_map<T, F>(params: &NoiselessParams, line: &LineConfig, rng: RngStream, f: F) -> Result<ProtocolRun<T>>
where
    T: Send,
    F: Fn(&CycleRecord) -> T + Sync,
{
    params.validate_for(line)?;
    let sessions = params.cycles.div_ceil(SESSION_CYCLES);
    let parts = (0..sessions)
        .into_par_iter()
        .map(|s| {
            let first = s * SESSION_CYCLES;
            let last = (first + SESSION_CYCLES).min(params.cycles);
            run_session(params, line, rng.substream(s as u64), first..last, &f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolRun::assemble(Protocol::Noiseless, parts.into_iter().flatten().collect()))
}

pub fn noiseless_run(params: &NoiselessParams, line: &LineConfig, rng: RngStream) -> Result<ProtocolRun<CycleRecord>> {
    noiseless_map(params, line, rng, CycleRecord::clone)
}

fn run_session<T, F>(
    params: &NoiselessParams,
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
    let n = params.cycle_len();
    let d = line.delay;
    let z0 = line.z0;
    let battery = Termination::battery(params.v0_volts, params.source_resistance(line));
    let open = Termination::open();
    let mut out = Vec::with_capacity(cycles.len());

    for cycle in cycles {
        let alice = Choice::from_bit(coins.random());
        let bob = Choice::from_bit(coins.random());

        let mut plus = vec![Vec::with_capacity(n); line.taps.len()];
        let mut minus = vec![Vec::with_capacity(n); line.taps.len()];
        let mut ends = [(); 4].map(|_| Vec::with_capacity(n));
        let mut shunt = line.shunt.map(|_| [(); 3].map(|_| Vec::with_capacity(n)));
        for h in 0..2 {
            let term_a = if battery_on(alice, h) { &battery } else { &open };
            let term_b = if battery_on(bob, h) { &battery } else { &open };
            for k in 0..params.samples_per_half {
                sim.step(term_a, term_b)?;
                if k < params.ground_samples {
                    sim.ground();
                }
                for (j, &tap) in line.taps.iter().enumerate() {
                    let (p, m) = sim.waves(tap);
                    plus[j].push(p);
                    minus[j].push(m);
                }
                ends[0].push(sim.node_voltage(0));
                ends[1].push(sim.alice_current());
                ends[2].push(sim.node_voltage(d));
                ends[3].push(sim.bob_current());
                if let (Some(rec), Some(s)) = (shunt.as_mut(), line.shunt) {
                    let sides = sim.sides(s.position);
                    let (ap, am) = sides.alice_side;
                    let (bp, bm) = sides.bob_side;
                    rec[0].push(ap + am);
                    rec[1].push((ap - am) / z0);
                    rec[2].push((bp - bm) / z0);
                }
            }
        }

        // A party keeps the cycle when its own terminal sat near V0 in both halves.
        let live = |v: &[f64]| {
            (0..2).all(|h| {
                let w = &v[params.settled_window(line, h)];
                w.iter().sum::<f64>() / w.len() as f64 > params.v0_volts / 2.0
            })
        };
        let msv = |v: &[f64]| {
            let (mut acc, mut count) = (0.0, 0usize);
            for h in 0..2 {
                for x in &v[params.settled_window(line, h)] {
                    acc += x * x;
                    count += 1;
                }
            }
            acc / count as f64
        };
        let kept = live(&ends[0]) && live(&ends[2]);
        let msv_alice = msv(&ends[0]);
        let msv_bob = msv(&ends[2]);
        let outcome = CycleOutcome::new(cycle, alice, bob, kept);

        let dt = line.dt;
        let trace = |v: Vec<f64>| SampledTrace::new(dt, v);
        let taps = line
            .taps
            .iter()
            .zip(plus.into_iter().zip(minus))
            .map(|(&position, (p, m))| Ok(TapRecord { position, v_plus: trace(p)?, v_minus: trace(m)? }))
            .collect::<Result<Vec<_>>>()?;
        let [av, ai, bv, bi] = ends;
        let shunt = match (shunt, line.shunt) {
            (Some([v, a, b]), Some(s)) => Some(ShuntRecord {
                position: s.position,
                voltage: trace(v)?,
                alice_side_current: trace(a)?,
                bob_side_current: trace(b)?,
            }),
            _ => None,
        };
        let record = CycleRecord {
            outcome,
            msv_alice,
            msv_bob,
            taps,
            alice: EndRecord { voltage: trace(av)?, current: trace(ai)? },
            bob: EndRecord { voltage: trace(bv)?, current: trace(bi)? },
            shunt,
        };
        out.push((outcome, (msv_alice, msv_bob), f(&record)));
    }
    Ok(out)
}
