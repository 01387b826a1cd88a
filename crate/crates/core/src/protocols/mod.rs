//! Key-distribution protocols executed on the simulated line.
//!
//! Runs are split into sessions of [`SESSION_CYCLES`] consecutive cycles.
//! Each session owns a fresh line and its own random substream, so sessions
//! run in parallel and results are merged in cycle order independent of
//! scheduling.

mod kljn;
mod noiseless;

pub use kljn::{kljn_map, kljn_run, KljnParams};
pub use noiseless::{noiseless_map, noiseless_run, NoiselessParams};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::txline::{EndRecord, ShuntRecord, TapRecord};

/// Cycles simulated back to back on one line instance.
pub const SESSION_CYCLES: usize = 64;

/// Per-cycle rows produced by one session.
pub(crate) type SessionRows<T> = Vec<(CycleOutcome, (f64, f64), T)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Kljn,
    Noiseless,
}

/// A party's per-cycle choice: the L/H resistor in KLJN, or L-first/H-first
/// ordering in the noiseless protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Low,
    High,
}

impl Choice {
    pub fn from_bit(high: bool) -> Self {
        if high {
            Choice::High
        } else {
            Choice::Low
        }
    }

    pub fn is_high(self) -> bool {
        self == Choice::High
    }

    pub fn label(self, protocol: Protocol) -> &'static str {
        match (protocol, self) {
            (Protocol::Kljn, Choice::Low) => "L",
            (Protocol::Kljn, Choice::High) => "H",
            (Protocol::Noiseless, Choice::Low) => "L-first",
            (Protocol::Noiseless, Choice::High) => "H-first",
        }
    }
}

/// Mean-square voltage class of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Volts squared.
    pub low: f64,
    /// Volts squared.
    pub high: f64,
}

/// LOW below `low`, HIGH above `high`, MID in between. With `low == high`
/// the classifier is binary and never answers MID.
pub fn classify_msv(msv: f64, t: Thresholds) -> Level {
    if msv < t.low {
        Level::Low
    } else if msv > t.high || t.low >= t.high {
        Level::High
    } else {
        Level::Mid
    }
}

/// One protocol clock cycle as seen by Alice and Bob.
///
/// Bits follow a fixed convention: on a kept cycle the shared bit is 1 iff
/// Alice chose H (H-first). Bob derives it from his own choice, so his bit is
/// 1 iff he chose L (L-first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOutcome {
    pub cycle: usize,
    pub alice: Choice,
    pub bob: Choice,
    pub kept: bool,
    pub alice_bit: Option<bool>,
    pub bob_bit: Option<bool>,
}

impl CycleOutcome {
    pub fn new(cycle: usize, alice: Choice, bob: Choice, kept: bool) -> Self {
        Self {
            cycle,
            alice,
            bob,
            kept,
            alice_bit: kept.then_some(alice.is_high()),
            bob_bit: kept.then_some(!bob.is_high()),
        }
    }

    pub fn choices_differ(&self) -> bool {
        self.alice != self.bob
    }

    /// The bit Alice and Bob would share if the cycle were kept.
    pub fn true_bit(&self) -> bool {
        self.alice.is_high()
    }
}

/// Everything recorded during one cycle: the parties' readings, Eve's taps
/// and the terminal/shunt traces. Sample indices are relative to cycle start.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub outcome: CycleOutcome,
    pub msv_alice: f64,
    pub msv_bob: f64,
    pub taps: Vec<TapRecord>,
    pub alice: EndRecord,
    pub bob: EndRecord,
    pub shunt: Option<ShuntRecord>,
}

impl CycleRecord {
    pub fn tap(&self, position: usize) -> Option<&TapRecord> {
        self.taps.iter().find(|t| t.position == position)
    }
}

/// Result of a protocol run with the per-cycle values produced by the caller's map.
#[derive(Debug, Clone)]
pub struct ProtocolRun<T> {
    pub protocol: Protocol,
    pub outcomes: Vec<CycleOutcome>,
    pub msv: Vec<(f64, f64)>,
    pub key_a: Vec<bool>,
    pub key_b: Vec<bool>,
    pub per_cycle: Vec<T>,
}

impl<T> ProtocolRun<T> {
    pub(crate) fn assemble(protocol: Protocol, items: Vec<(CycleOutcome, (f64, f64), T)>) -> Self {
        let mut outcomes = Vec::with_capacity(items.len());
        let mut msv = Vec::with_capacity(items.len());
        let mut per_cycle = Vec::with_capacity(items.len());
        let (mut key_a, mut key_b) = (Vec::new(), Vec::new());
        for (o, m, t) in items {
            if let (Some(a), Some(b)) = (o.alice_bit, o.bob_bit) {
                key_a.push(a);
                key_b.push(b);
            }
            outcomes.push(o);
            msv.push(m);
            per_cycle.push(t);
        }
        Self { protocol, outcomes, msv, key_a, key_b, per_cycle }
    }

    pub fn kept(&self) -> usize {
        self.key_a.len()
    }

    /// Fraction of kept bits on which Alice and Bob disagree.
    pub fn disagreement_rate(&self) -> f64 {
        if self.key_a.is_empty() {
            return 0.0;
        }
        let bad = self.key_a.iter().zip(&self.key_b).filter(|(a, b)| a != b).count();
        bad as f64 / self.key_a.len() as f64
    }

    /// Cycles kept although both parties made the same choice (misclassification).
    pub fn misclassified(&self) -> usize {
        self.outcomes.iter().filter(|o| o.kept != o.choices_differ()).count()
    }

    /// Run summary CSV:
    /// `cycle,alice_choice,bob_choice,kept,alice_bit,bob_bit,msv_alice,msv_bob`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["cycle", "alice_choice", "bob_choice", "kept", "alice_bit", "bob_bit", "msv_alice", "msv_bob"])?;
        let bit = |b: Option<bool>| b.map(|b| u8::from(b).to_string()).unwrap_or_default();
        for (o, (ma, mb)) in self.outcomes.iter().zip(&self.msv) {
            out.write_record([
                o.cycle.to_string(),
                o.alice.label(self.protocol).to_string(),
                o.bob.label(self.protocol).to_string(),
                u8::from(o.kept).to_string(),
                bit(o.alice_bit),
                bit(o.bob_bit),
                format!("{ma:e}"),
                format!("{mb:e}"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
