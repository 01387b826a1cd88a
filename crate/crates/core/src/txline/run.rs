use std::io::Write;

use super::{LineConfig, LineSimulator, Termination};
use crate::error::{domain, Result};
use crate::signal::{RngStream, SampledTrace};

/// Piecewise-constant termination: each entry takes effect at its start
/// sample and holds until the next one. Switching is instantaneous.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminationSchedule {
    segments: Vec<(usize, Termination)>,
}

impl TerminationSchedule {
    pub fn constant(term: Termination) -> Self {
        Self { segments: vec![(0, term)] }
    }

    /// Segments must start at sample 0 and be strictly increasing.
    pub fn new(segments: Vec<(usize, Termination)>) -> Result<Self> {
        if segments.first().map(|s| s.0) != Some(0) {
            return domain("termination schedule must start at sample 0");
        }
        if segments.windows(2).any(|w| w[0].0 >= w[1].0) {
            return domain("termination switch times must be strictly increasing");
        }
        for (_, t) in &segments {
            t.validate()?;
        }
        Ok(Self { segments })
    }

    pub fn at(&self, sample: usize) -> &Termination {
        let idx = self.segments.partition_point(|(start, _)| *start <= sample);
        &self.segments[idx - 1].1
    }
}

/// Eve's perfect record at one cross-section: the wave heading towards Bob
/// (`v_plus`) and the wave heading towards Alice (`v_minus`).
#[derive(Debug, Clone, PartialEq)]
pub struct TapRecord {
    pub position: usize,
    pub v_plus: SampledTrace,
    pub v_minus: SampledTrace,
}

impl TapRecord {
    pub fn voltage(&self) -> Vec<f64> {
        self.v_plus.samples().iter().zip(self.v_minus.samples()).map(|(p, m)| p + m).collect()
    }

    pub fn current(&self, z0: f64) -> Vec<f64> {
        self.v_plus.samples().iter().zip(self.v_minus.samples()).map(|(p, m)| (p - m) / z0).collect()
    }
}

/// Voltage and current (positive towards Bob) at a terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct EndRecord {
    pub voltage: SampledTrace,
    pub current: SampledTrace,
}

/// Node voltage and the line currents on either side of a shunt, all
/// positive towards Bob. `alice_side - bob_side` is the shunt current.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuntRecord {
    pub position: usize,
    pub voltage: SampledTrace,
    pub alice_side_current: SampledTrace,
    pub bob_side_current: SampledTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub taps: Vec<TapRecord>,
    pub alice: EndRecord,
    pub bob: EndRecord,
    pub shunt: Option<ShuntRecord>,
}

/// Step a fresh line `n` times, recording every tap, both terminals and the shunt.
pub fn run(
    config: &LineConfig,
    alice: &TerminationSchedule,
    bob: &TerminationSchedule,
    n: usize,
    rng: RngStream,
) -> Result<RunRecord> {
    if n == 0 {
        return domain("run needs at least one sample");
    }
    let mut sim = LineSimulator::new(config.clone(), rng)?;
    let ntaps = config.taps.len();
    let mut plus = vec![Vec::with_capacity(n); ntaps];
    let mut minus = vec![Vec::with_capacity(n); ntaps];
    let mut ends = [(); 4].map(|_| Vec::with_capacity(n));
    let mut shunt = config.shunt.map(|_| [(); 3].map(|_| Vec::with_capacity(n)));
    let d = config.delay;
    let z0 = config.z0;

    for k in 0..n {
        sim.step(alice.at(k), bob.at(k))?;
        for (j, &tap) in config.taps.iter().enumerate() {
            let (p, m) = sim.waves(tap);
            plus[j].push(p);
            minus[j].push(m);
        }
        ends[0].push(sim.node_voltage(0));
        ends[1].push(sim.alice_current());
        ends[2].push(sim.node_voltage(d));
        ends[3].push(sim.bob_current());
        if let (Some(rec), Some(s)) = (shunt.as_mut(), config.shunt) {
            let sides = sim.sides(s.position);
            let (ap, am) = sides.alice_side;
            let (bp, bm) = sides.bob_side;
            rec[0].push(ap + am);
            rec[1].push((ap - am) / z0);
            rec[2].push((bp - bm) / z0);
        }
    }

    let dt = config.dt;
    let trace = |v: Vec<f64>| SampledTrace::new(dt, v);
    let taps = config
        .taps
        .iter()
        .zip(plus.into_iter().zip(minus))
        .map(|(&position, (p, m))| Ok(TapRecord { position, v_plus: trace(p)?, v_minus: trace(m)? }))
        .collect::<Result<Vec<_>>>()?;
    let [av, ai, bv, bi] = ends;
    let shunt = match (shunt, config.shunt) {
        (Some([v, a, b]), Some(s)) => Some(ShuntRecord {
            position: s.position,
            voltage: trace(v)?,
            alice_side_current: trace(a)?,
            bob_side_current: trace(b)?,
        }),
        _ => None,
    };
    Ok(RunRecord {
        taps,
        alice: EndRecord { voltage: trace(av)?, current: trace(ai)? },
        bob: EndRecord { voltage: trace(bv)?, current: trace(bi)? },
        shunt,
    })
}

fn write_quantities<W: Write>(w: W, dt: f64, quantities: &[(&str, &SampledTrace)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["sample", "time_s", "quantity", "value"])?;
    for (name, trace) in quantities {
        for (k, v) in trace.samples().iter().enumerate() {
            out.write_record([k.to_string(), format!("{:e}", k as f64 * dt), name.to_string(), format!("{v:e}")])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Trace export: `sample,time_s,quantity,value` with quantities `v_plus`, `v_minus`.
pub fn write_tap_csv<W: Write>(w: W, tap: &TapRecord) -> Result<()> {
    write_quantities(w, tap.v_plus.dt(), &[("v_plus", &tap.v_plus), ("v_minus", &tap.v_minus)])
}

/// Trace export for a terminal: quantities `voltage`, `current`.
pub fn write_end_csv<W: Write>(w: W, end: &EndRecord) -> Result<()> {
    write_quantities(w, end.voltage.dt(), &[("voltage", &end.voltage), ("current", &end.current)])
}
