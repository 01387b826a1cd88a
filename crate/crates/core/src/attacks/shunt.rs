use rand::Rng;

use super::EveGuess;
use crate::error::{domain, Result};
use crate::protocols::{CycleRecord, NoiselessParams};
use crate::txline::LineConfig;

fn window_mean(x: &[f64], w: std::ops::Range<usize>) -> f64 {
    let s = &x[w];
    s.iter().sum::<f64>() / s.len() as f64
}

/// Shunt attack on one noiseless cycle.
///
/// The feed current through Eve's node flows towards Bob when Alice's battery
/// is on and towards Alice when Bob's is. The statistic is the settled mean
/// of the two side currents in half 0 minus that in half 1; positive means
/// Alice fed first (bit 1). A zero statistic carries no information and is
/// settled by `coin`.
pub fn shunt_guess<R: Rng>(
    record: &CycleRecord,
    params: &NoiselessParams,
    line: &LineConfig,
    coin: &mut R,
) -> Result<EveGuess> {
    let Some(s) = &record.shunt else {
        return domain("cycle was recorded without a shunt");
    };
    if s.alice_side_current.len() != params.cycle_len() {
        return domain("shunt record does not span one cycle");
    }
    let feed: Vec<f64> = s
        .alice_side_current
        .samples()
        .iter()
        .zip(s.bob_side_current.samples())
        .map(|(a, b)| a + b)
        .collect();
    let statistic = window_mean(&feed, params.settled_window(line, 0)) - window_mean(&feed, params.settled_window(line, 1));
    let bit = if statistic == 0.0 { coin.random() } else { statistic > 0.0 };
    Ok(EveGuess { cycle: record.outcome.cycle, bit: Some(bit), statistic })
}

pub fn shunt_attack<R: Rng>(
    records: &[CycleRecord],
    params: &NoiselessParams,
    line: &LineConfig,
    coin: &mut R,
) -> Result<Vec<EveGuess>> {
    records.iter().map(|r| shunt_guess(r, params, line, coin)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageVerdict {
    pub abort: bool,
    /// Largest settled terminal-current discrepancy seen, in amperes.
    pub max_discrepancy: f64,
    pub first_abort_cycle: Option<usize>,
}

/// Largest settled discrepancy between either party's mean terminal current
/// and the shunt-free prediction. Without a shunt every settled half carries
/// no DC current (an open far end, or two equal batteries), so the
/// prediction is zero.
pub fn leakage_discrepancy(record: &CycleRecord, params: &NoiselessParams, line: &LineConfig) -> Result<f64> {
    let n = params.cycle_len();
    if record.alice.current.len() != n || record.bob.current.len() != n {
        return domain("end records do not span one cycle");
    }
    let mut worst: f64 = 0.0;
    for h in 0..2 {
        let w = params.settled_window(line, h);
        worst = worst.max(window_mean(record.alice.current.samples(), w.clone()).abs());
        worst = worst.max(window_mean(record.bob.current.samples(), w).abs());
    }
    Ok(worst)
}

/// Alice and Bob abort as soon as a discrepancy exceeds `i_min`.
pub fn leakage_monitor(
    records: &[CycleRecord],
    params: &NoiselessParams,
    line: &LineConfig,
    i_min: f64,
) -> Result<LeakageVerdict> {
    let d = records.iter().map(|r| leakage_discrepancy(r, params, line)).collect::<Result<Vec<_>>>()?;
    let cycles: Vec<usize> = records.iter().map(|r| r.outcome.cycle).collect();
    leakage_verdict(&d, &cycles, i_min)
}

/// Verdict from precomputed per-cycle discrepancies.
pub fn leakage_verdict(discrepancies: &[f64], cycles: &[usize], i_min: f64) -> Result<LeakageVerdict> {
    if !(i_min > 0.0) {
        return domain(format!("ammeter sensitivity must be positive, got {i_min}"));
    }
    if discrepancies.len() != cycles.len() {
        return Err(crate::Error::LengthMismatch { left: discrepancies.len(), right: cycles.len() });
    }
    let first = discrepancies.iter().position(|&d| d > i_min);
    Ok(LeakageVerdict {
        abort: first.is_some(),
        max_discrepancy: discrepancies.iter().copied().fold(0.0, f64::max),
        first_abort_cycle: first.map(|i| cycles[i]),
    })
}
