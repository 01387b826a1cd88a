use std::ops::Range;

use super::EveGuess;
use crate::error::{domain, Result};
use crate::protocols::CycleRecord;
use crate::signal::{cross_correlation_slice, mean_square_slice};
use crate::txline::{LineConfig, TapRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct EchoConfig {
    pub tap: usize,
    /// Round trip Eve -> Bob -> Eve in samples.
    pub lag_bob: usize,
    /// Round trip Eve -> Alice -> Eve in samples.
    pub lag_alice: usize,
    /// Cycle-relative sample range to correlate over.
    pub window: Range<usize>,
}

impl EchoConfig {
    pub fn for_tap(line: &LineConfig, tap: usize, window: Range<usize>) -> Result<Self> {
        if tap == 0 || tap >= line.delay {
            return domain(format!("tap {tap} must be an interior node of a line of delay {}", line.delay));
        }
        let cfg = Self { tap, lag_bob: 2 * (line.delay - tap), lag_alice: 2 * tap, window };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag_bob == 0 || self.lag_alice == 0 {
            return domain("echo lags must be positive");
        }
        let longest = self.lag_bob.max(self.lag_alice);
        if self.window.end <= self.window.start || self.window.len() <= longest {
            return domain(format!("window {:?} is not longer than lag {longest}", self.window));
        }
        Ok(())
    }
}

/// Echo correlations normalised by the outgoing wave power: estimates of
/// `Gamma_A` and `Gamma_B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoStatistics {
    pub gamma_alice: f64,
    pub gamma_bob: f64,
}

impl EchoStatistics {
    pub fn alice_high(&self) -> bool {
        self.gamma_alice > 0.0
    }

    pub fn bob_high(&self) -> bool {
        self.gamma_bob > 0.0
    }
}

pub fn echo_statistics(tap: &TapRecord, cfg: &EchoConfig) -> Result<EchoStatistics> {
    cfg.validate()?;
    if cfg.window.end > tap.v_plus.len() {
        return domain(format!("window {:?} exceeds record length {}", cfg.window, tap.v_plus.len()));
    }
    let plus = &tap.v_plus.samples()[cfg.window.clone()];
    let minus = &tap.v_minus.samples()[cfg.window.clone()];
    let c_bob = cross_correlation_slice(plus, minus, cfg.lag_bob)?;
    let c_alice = cross_correlation_slice(minus, plus, cfg.lag_alice)?;
    let p_plus = mean_square_slice(plus);
    let p_minus = mean_square_slice(minus);
    let ratio = |c: f64, p: f64| if p > 0.0 { c / p } else { 0.0 };
    Ok(EchoStatistics { gamma_alice: ratio(c_alice, p_minus), gamma_bob: ratio(c_bob, p_plus) })
}

/// Key guess: Alice is taken to hold H iff her end reflects more than Bob's.
/// An exactly even statistic abstains.
pub fn echo_guess(record: &CycleRecord, cfg: &EchoConfig) -> Result<(EveGuess, EchoStatistics)> {
    let Some(tap) = record.tap(cfg.tap) else {
        return domain(format!("no tap recorded at node {}", cfg.tap));
    };
    let s = echo_statistics(tap, cfg)?;
    let statistic = s.gamma_alice - s.gamma_bob;
    let cycle = record.outcome.cycle;
    let guess = if statistic == 0.0 {
        EveGuess::abstain(cycle, statistic)
    } else {
        EveGuess { cycle, bit: Some(statistic > 0.0), statistic }
    };
    Ok((guess, s))
}

pub fn echo_attack(records: &[CycleRecord], cfg: &EchoConfig) -> Result<Vec<EveGuess>> {
    records.iter().map(|r| echo_guess(r, cfg).map(|g| g.0)).collect()
}
