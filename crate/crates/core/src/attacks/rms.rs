use super::EveGuess;
use crate::error::{domain, Result};
use crate::protocols::{classify_msv, CycleRecord, KljnParams, Level, Thresholds};
use crate::signal::voltmeter_reading;

/// What the RMS attack does on a MID reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmsMode {
    Abstain,
    /// Guess 1 iff the reading lies above the analytic MID level.
    Forced,
}

/// Read Eve's tap with the parties' own voltmeter and classify the cycle.
///
/// LOW and HIGH readings name a discarded LL or HH cycle; the returned guess
/// then carries the bit Eve would assign (`HIGH` as 1) so LL/HH identification
/// can be scored against the choices. MID readings abstain unless forced.
pub fn rms_guess(
    record: &CycleRecord,
    tap: usize,
    params: &KljnParams,
    thresholds: Thresholds,
    mid_level: f64,
    mode: RmsMode,
) -> Result<(EveGuess, Level)> {
    let Some(t) = record.tap(tap) else {
        return domain(format!("no tap recorded at node {tap}"));
    };
    let v = t.voltage();
    if params.settle_samples >= v.len() {
        return domain("tap record is shorter than the settling time");
    }
    let msv = voltmeter_reading(&v[params.settle_samples..], params.voltmeter_block)?;
    let level = classify_msv(msv, thresholds);
    let cycle = record.outcome.cycle;
    let guess = match (level, mode) {
        (Level::Low, _) => EveGuess { cycle, bit: Some(false), statistic: msv },
        (Level::High, _) => EveGuess { cycle, bit: Some(true), statistic: msv },
        (Level::Mid, RmsMode::Abstain) => EveGuess::abstain(cycle, msv),
        (Level::Mid, RmsMode::Forced) => EveGuess { cycle, bit: Some(msv > mid_level), statistic: msv },
    };
    Ok((guess, level))
}

/// RMS attack over a run, with the protocol's own thresholds.
pub fn rms_attack(
    records: &[CycleRecord],
    tap: usize,
    params: &KljnParams,
    dt: f64,
    mode: RmsMode,
) -> Result<Vec<(EveGuess, Level)>> {
    let thresholds = params.effective_thresholds(dt);
    let mid = params.analytic_levels(dt)[1];
    records.iter().map(|r| rms_guess(r, tap, params, thresholds, mid, mode)).collect()
}
