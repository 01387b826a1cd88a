//! Eve's toolkit: passive attacks on recorded taps and the active shunt attack.
//!
//! Every attack produces one [`EveGuess`] per cycle. A guess is the bit Eve
//! believes Alice and Bob share (1 iff Alice chose H / H-first), or an
//! abstention.

mod echo;
mod rms;
mod shunt;
mod transient;

pub use echo::{echo_attack, echo_guess, echo_statistics, EchoConfig, EchoStatistics};
pub use rms::{rms_attack, rms_guess, RmsMode};
pub use shunt::{leakage_discrepancy, leakage_monitor, leakage_verdict, shunt_attack, shunt_guess, LeakageVerdict};
pub use transient::{kljn_transient_threshold, transient_attack, transient_guess, NOISELESS_THRESHOLD};

use std::io::Write;

use crate::error::{Error, Result};
use crate::protocols::CycleOutcome;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveGuess {
    pub cycle: usize,
    /// `None` is an abstention.
    pub bit: Option<bool>,
    /// Value of the decision statistic behind the guess.
    pub statistic: f64,
}

impl EveGuess {
    pub fn abstain(cycle: usize, statistic: f64) -> Self {
        Self { cycle, bit: None, statistic }
    }
}

/// Use `primary` unless it abstains, then `fallback`.
pub fn combine(primary: &[EveGuess], fallback: &[EveGuess]) -> Result<Vec<EveGuess>> {
    if primary.len() != fallback.len() {
        return Err(Error::LengthMismatch { left: primary.len(), right: fallback.len() });
    }
    Ok(primary.iter().zip(fallback).map(|(p, f)| if p.bit.is_some() { *p } else { *f }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    /// Fraction of answered kept cycles guessed right; `None` if Eve always abstained.
    pub accuracy: Option<f64>,
    pub abstain_rate: f64,
    pub kept: usize,
    pub answered: usize,
    pub correct: usize,
}

/// Score guesses against the shared bits of the kept cycles.
pub fn attack_accuracy(guesses: &[EveGuess], truth: &[CycleOutcome]) -> Result<AccuracyReport> {
    if guesses.len() != truth.len() {
        return Err(Error::LengthMismatch { left: guesses.len(), right: truth.len() });
    }
    let (mut kept, mut answered, mut correct) = (0, 0, 0);
    for (g, o) in guesses.iter().zip(truth) {
        if g.cycle != o.cycle {
            return Err(Error::Domain(format!("guess for cycle {} aligned with cycle {}", g.cycle, o.cycle)));
        }
        let Some(shared) = o.alice_bit else { continue };
        kept += 1;
        if let Some(b) = g.bit {
            answered += 1;
            correct += usize::from(b == shared);
        }
    }
    Ok(AccuracyReport {
        accuracy: (answered > 0).then(|| correct as f64 / answered as f64),
        abstain_rate: if kept == 0 { 0.0 } else { (kept - answered) as f64 / kept as f64 },
        kept,
        answered,
        correct,
    })
}

/// Attack report CSV over kept cycles: `cycle,attack,statistic,guess,truth,correct`.
/// Abstentions leave `guess` and `correct` empty.
pub fn write_attack_csv<W: Write>(w: W, attack: &str, guesses: &[EveGuess], truth: &[CycleOutcome]) -> Result<()> {
    if guesses.len() != truth.len() {
        return Err(Error::LengthMismatch { left: guesses.len(), right: truth.len() });
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cycle", "attack", "statistic", "guess", "truth", "correct"])?;
    for (g, o) in guesses.iter().zip(truth) {
        let Some(shared) = o.alice_bit else { continue };
        let (guess, correct) = match g.bit {
            Some(b) => (u8::from(b).to_string(), u8::from(b == shared).to_string()),
            None => (String::new(), String::new()),
        };
        out.write_record([
            g.cycle.to_string(),
            attack.to_string(),
            format!("{:e}", g.statistic),
            guess,
            u8::from(shared).to_string(),
            correct,
        ])?;
    }
    out.flush()?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Choice;
    use rand::Rng;

    fn kept(cycle: usize, alice_high: bool) -> CycleOutcome {
        CycleOutcome::new(cycle, Choice::from_bit(alice_high), Choice::from_bit(!alice_high), true)
    }

    #[test]
    fn perfect_and_abstaining_guesses() {
        let truth: Vec<_> = (0..10).map(|i| kept(i, i % 3 == 0)).collect();
        let right: Vec<_> = truth.iter().map(|o| EveGuess { cycle: o.cycle, bit: o.alice_bit, statistic: 0.0 }).collect();
        let r = attack_accuracy(&right, &truth).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(r.abstain_rate, 0.0);
        let none: Vec<_> = truth.iter().map(|o| EveGuess::abstain(o.cycle, 0.0)).collect();
        let r = attack_accuracy(&none, &truth).unwrap();
        assert_eq!(r.accuracy, None);
        assert_eq!(r.abstain_rate, 1.0);
        assert!(attack_accuracy(&none[..3], &truth).is_err());
    }

    #[test]
    fn random_guessing_is_at_chance() {
        let mut rng = crate::RngStream::new(1, 0).rng();
        let n = 20_000;
        let truth: Vec<_> = (0..n).map(|i| kept(i, rng.random())).collect();
        let guesses: Vec<_> = (0..n).map(|i| EveGuess { cycle: i, bit: Some(rng.random()), statistic: 0.0 }).collect();
        let acc = attack_accuracy(&guesses, &truth).unwrap().accuracy.unwrap();
        assert!((acc - 0.5).abs() < 3.0 / (2.0 * (n as f64).sqrt()));
    }

    #[test]
    fn csv_rows_cover_kept_cycles() {
        let mut truth = vec![kept(0, true), kept(1, false)];
        truth.push(CycleOutcome::new(2, Choice::Low, Choice::Low, false));
        let guesses = vec![
            EveGuess { cycle: 0, bit: Some(true), statistic: 1.5 },
            EveGuess::abstain(1, 0.0),
            EveGuess { cycle: 2, bit: Some(false), statistic: -1.0 },
        ];
        let mut buf = Vec::new();
        write_attack_csv(&mut buf, "echo", &guesses, &truth).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "cycle,attack,statistic,guess,truth,correct\n0,echo,1.5e0,1,1,1\n1,echo,0e0,,0,\n");
    }
}
