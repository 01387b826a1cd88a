use super::EveGuess;
use crate::error::{domain, Result};
use crate::protocols::CycleRecord;
use crate::signal::CONSTANTS;
use crate::txline::LineConfig;

/// Detection threshold for the noiseless protocol: any nonzero wave.
pub const NOISELESS_THRESHOLD: f64 = 0.0;

/// Five times the full-band Johnson floor of the tap voltage, `sqrt(2 k T Z0 f_N)`.
pub fn kljn_transient_threshold(line: &LineConfig, kelvin: f64) -> f64 {
    5.0 * (2.0 * CONSTANTS.k_b * kelvin * line.z0 * crate::signal::nyquist(line.dt)).sqrt()
}

/// First-arrival attack on samples with `|v| > threshold`. The wave seen first heading towards Bob means Alice
/// switched on first (bit 1); heading towards Alice means Bob did (bit 0).
/// The statistic is the arrival gap in samples, positive when Alice leads.
pub fn transient_guess(record: &CycleRecord, tap: usize, threshold: f64) -> Result<EveGuess> {
    let Some(t) = record.tap(tap) else {
        return domain(format!("no tap recorded at node {tap}"));
    };
    let first = |x: &[f64]| x.iter().position(|v| v.abs() > threshold);
    let cycle = record.outcome.cycle;
    Ok(match (first(t.v_plus.samples()), first(t.v_minus.samples())) {
        (None, None) => EveGuess::abstain(cycle, 0.0),
        (Some(_), None) => EveGuess { cycle, bit: Some(true), statistic: f64::INFINITY },
        (None, Some(_)) => EveGuess { cycle, bit: Some(false), statistic: f64::NEG_INFINITY },
        (Some(p), Some(m)) => {
            let gap = m as f64 - p as f64;
            if p == m {
                EveGuess::abstain(cycle, 0.0)
            } else {
                EveGuess { cycle, bit: Some(p < m), statistic: gap }
            }
        }
    })
}

pub fn transient_attack(records: &[CycleRecord], tap: usize, threshold: f64) -> Result<Vec<EveGuess>> {
    records.iter().map(|r| transient_guess(r, tap, threshold)).collect()
}
