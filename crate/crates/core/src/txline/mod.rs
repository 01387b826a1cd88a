//! Lossless one-dimensional delay-line transmission line.
//!
//! The line is discretised at one cell per sample, so a wave moves exactly one
//! cell per `dt` and there is no numerical dispersion. Nodes are numbered
//! `0..=D`: node 0 is Alice's terminal, node `D` is Bob's, and the one-way
//! delay is `D` samples. Every node carries a right-moving amplitude `v+` and a
//! left-moving amplitude `v-`; the node voltage is `v+ + v-` and the current
//! (positive towards Bob) is `(v+ - v-) / Z0`.

mod run;
mod sim;

pub use run::{run, write_end_csv, write_tap_csv, EndRecord, RunRecord, ShuntRecord, TapRecord, TerminationSchedule};
pub use sim::{LineSimulator, NodeSides};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::signal::{johnson_sigma, SampledTrace};

/// A terminating resistance. Open circuit is explicit so that `Γ = +1` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resistance {
    Ohms(f64),
    Open,
}

/// Series voltage source of a Thevenin termination.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    None,
    /// Ideal DC source, volts.
    Constant(f64),
    /// Arbitrary waveform indexed by absolute simulation sample; zero past its end.
    Trace(SampledTrace),
    /// Johnson-Nyquist noise of the termination's own resistance at this temperature (kelvin).
    Thermal { kelvin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Termination {
    pub resistance: Resistance,
    pub source: Source,
}

impl Termination {
    pub fn open() -> Self {
        Self { resistance: Resistance::Open, source: Source::None }
    }

    pub fn resistor(ohms: f64) -> Self {
        Self { resistance: Resistance::Ohms(ohms), source: Source::None }
    }

    pub fn thermal(ohms: f64, kelvin: f64) -> Self {
        Self { resistance: Resistance::Ohms(ohms), source: Source::Thermal { kelvin } }
    }

    /// DC source `volts` behind a series resistance (0 for an ideal battery).
    pub fn battery(volts: f64, series_ohms: f64) -> Self {
        Self { resistance: Resistance::Ohms(series_ohms), source: Source::Constant(volts) }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.resistance, &self.source) {
            (Resistance::Ohms(r), _) if !(r >= 0.0 && r.is_finite()) => {
                domain(format!("termination resistance must be finite and >= 0, got {r}"))
            }
            (Resistance::Open, Source::Thermal { .. }) => domain("an open circuit has no thermal noise source"),
            (Resistance::Ohms(r), Source::Thermal { kelvin }) => {
                if r <= 0.0 {
                    domain("thermal termination needs a positive resistance")
                } else if !(*kelvin >= 0.0) {
                    domain(format!("temperature must be >= 0, got {kelvin}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Per-sample standard deviation of the thermal source, zero if none.
    pub fn noise_sigma(&self, dt: f64) -> Result<f64> {
        match (self.resistance, &self.source) {
            (Resistance::Ohms(r), Source::Thermal { kelvin }) => johnson_sigma(r, *kelvin, dt),
            _ => Ok(0.0),
        }
    }
}

/// Optional resistive shunt from one interior node to ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shunt {
    pub position: usize,
    pub ohms: f64,
}

/// Static description of the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineConfig {
    /// Characteristic impedance, ohms.
    pub z0: f64,
    /// One-way delay in samples (= number of cells).
    pub delay: usize,
    /// Seconds per sample.
    pub dt: f64,
    pub taps: Vec<usize>,
    pub shunt: Option<Shunt>,
}

impl LineConfig {
    pub fn new(z0: f64, delay: usize, dt: f64) -> Self {
        Self { z0, delay, dt, taps: vec![delay / 2], shunt: None }
    }

    pub fn with_taps(mut self, taps: Vec<usize>) -> Self {
        self.taps = taps;
        self
    }

    pub fn with_shunt(mut self, position: usize, ohms: f64) -> Self {
        self.shunt = Some(Shunt { position, ohms });
        self
    }

    pub fn midpoint(&self) -> usize {
        self.delay / 2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return domain(format!("Z0 must be positive, got {}", self.z0));
        }
        if self.delay < 2 {
            return domain(format!("line delay must be at least 2 samples, got {}", self.delay));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return domain(format!("dt must be positive, got {}", self.dt));
        }
        let interior = 1..self.delay;
        if let Some(t) = self.taps.iter().find(|t| !interior.contains(t)) {
            return domain(format!("tap {t} outside interior [1, {}]", self.delay - 1));
        }
        if let Some(s) = self.shunt {
            if !interior.contains(&s.position) {
                return domain(format!("shunt at {} outside interior [1, {}]", s.position, self.delay - 1));
            }
            if !(s.ohms > 0.0) {
                return domain(format!("shunt resistance must be positive, got {}", s.ohms));
            }
        }
        Ok(())
    }
}

/// `Γ = (R - Z0) / (R + Z0)`; +1 for an open circuit.
pub fn reflection_coefficient(r: Resistance, z0: f64) -> f64 {
    match r {
        Resistance::Open => 1.0,
        Resistance::Ohms(r) => (r - z0) / (r + z0),
    }
}

/// Outgoing wave from a Thevenin termination hit by incident wave `a` while
/// its series source reads `e`: `b = Γ a + Z0 / (R + Z0) e`.
pub fn terminate_scatter(a: f64, r: Resistance, e: f64, z0: f64) -> f64 {
    match r {
        Resistance::Open => a,
        Resistance::Ohms(r) => ((r - z0) * a + z0 * e) / (r + z0),
    }
}

/// Reflection coefficient seen from either side of a shunt `r_s` to ground:
/// the far line (Z0) in parallel with `r_s` against Z0, `-Z0 / (Z0 + 2 r_s)`.
pub fn shunt_reflection(r_s: f64, z0: f64) -> f64 {
    -z0 / (z0 + 2.0 * r_s)
}

/// Scatter the two waves arriving at a shunt node. Returns `(b_left, b_right)`,
/// the waves leaving towards Alice and towards Bob.
pub fn shunt_scatter(a_left: f64, a_right: f64, r_s: f64, z0: f64) -> Result<(f64, f64)> {
    if !(r_s > 0.0) {
        return domain(format!("shunt resistance must be positive, got {r_s}"));
    }
    let rho = shunt_reflection(r_s, z0);
    Ok(shunt_scatter_with(a_left, a_right, rho))
}

#[inline]
pub(crate) fn shunt_scatter_with(a_left: f64, a_right: f64, rho: f64) -> (f64, f64) {
    let t = 1.0 + rho;
    (rho * a_left + t * a_right, t * a_left + rho * a_right)
}

/// Split a node voltage and current into the waves heading towards Bob
/// (`v+`) and towards Alice (`v-`).
pub fn wave_decompose(v: f64, i: f64, z0: f64) -> (f64, f64) {
    ((v + z0 * i) / 2.0, (v - z0 * i) / 2.0)
}

/// Inverse of [`wave_decompose`].
pub fn wave_compose(v_plus: f64, v_minus: f64, z0: f64) -> (f64, f64) {
    (v_plus + v_minus, (v_plus - v_minus) / z0)
}
