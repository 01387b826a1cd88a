//! The three-observer thermal circuit and one round of advantage distillation.

mod pipeline;

pub use pipeline::{key_rate_pipeline, sweep_re, sweep_rows, write_sweep_csv, DistillRow, MonteCarloCmi, PipelineConfig, PipelineReport, SweepRow};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::infotheory::{GaussianModel, JointSamples};
use crate::signal::{johnson_sigma, RngStream};
use crate::stats::{binary_entropy, normal_upper_tail};

/// A source switched between 0 and `V0`, watched by Alice, Bob and Eve
/// through their own noisy resistors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverCircuit {
    pub v0_volts: f64,
    pub r_a_ohms: f64,
    pub r_b_ohms: f64,
    pub r_e_ohms: f64,
    pub t_kelvin: f64,
    pub dt_seconds: f64,
    pub n: usize,
}

impl ObserverCircuit {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0_volts > 0.0 && self.v0_volts.is_finite()) {
            return domain(format!("V0 must be positive, got {}", self.v0_volts));
        }
        if !(self.r_a_ohms > 0.0 && self.r_b_ohms > 0.0) {
            return domain("R_A and R_B must be positive");
        }
        if !(self.r_e_ohms >= 0.0) {
            return domain("R_E must be non-negative");
        }
        if self.n == 0 {
            return domain("need at least one sample");
        }
        self.sigmas().map(|_| ())
    }

    /// Noise standard deviations `[sigma_A, sigma_B, sigma_E]` in volts.
    pub fn sigmas(&self) -> Result<[f64; 3]> {
        let s = |r| johnson_sigma(r, self.t_kelvin, self.dt_seconds);
        Ok([s(self.r_a_ohms)?, s(self.r_b_ohms)?, s(self.r_e_ohms)?])
    }

    pub fn with_re(&self, r_e: f64) -> Self {
        Self { r_e_ohms: r_e, ..self.clone() }
    }

    /// Jointly Gaussian stand-in for `(A, B, E)`: the binary source is
    /// replaced by a Gaussian of the same variance `V0^2/4`.
    pub fn surrogate(&self) -> Result<GaussianModel> {
        let s = self.sigmas()?;
        let u = self.v0_volts * self.v0_volts / 4.0;
        let cov = DMatrix::from_fn(3, 3, |i, j| u + if i == j { s[i] * s[i] } else { 0.0 });
        GaussianModel::centered(&["A", "B", "E"], cov)
    }
}

/// Draw `n` samples of `U`, `A`, `B`, `E`.
pub fn sample_circuit(params: &ObserverCircuit, rng: RngStream) -> Result<JointSamples> {
    params.validate()?;
    let [sa, sb, se] = params.sigmas()?;
    let mut r = rng.rng();
    let n = params.n;
    let (mut u, mut a, mut b, mut e) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let ui = if r.random::<bool>() { params.v0_volts } else { 0.0 };
        let na: f64 = r.sample(StandardNormal);
        let nb: f64 = r.sample(StandardNormal);
        let ne: f64 = r.sample(StandardNormal);
        u.push(ui);
        a.push(ui + sa * na);
        b.push(ui + sb * nb);
        e.push(ui + se * ne);
    }
    JointSamples::new().with_real("U", u)?.with_real("A", a)?.with_real("B", b)?.with_real("E", e)
}

/// Bit 1 iff the sample exceeds `threshold`.
pub fn hard_decision(values: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if !threshold.is_finite() {
        return domain("decision threshold must be finite");
    }
    Ok(values.iter().map(|&v| v > threshold).collect())
}

/// Error probability of the midpoint decision on `0`/`V0` in noise `sigma`.
pub fn decision_error(v0: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    normal_upper_tail(v0 / (2.0 * sigma))
}

fn disagreement(x: &[bool], y: &[bool]) -> f64 {
    x.iter().zip(y).filter(|(a, b)| a != b).count() as f64 / x.len() as f64
}

/// Empirical `(eps_AB, eps_AE, eps_BE)`.
pub fn pairwise_error_rates(a: &[bool], b: &[bool], e: &[bool]) -> Result<(f64, f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() != e.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: e.len() });
    }
    if a.is_empty() {
        return domain("no bits");
    }
    Ok((disagreement(a, b), disagreement(a, e), disagreement(b, e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistillBlock {
    pub n: usize,
    pub accepted: bool,
    pub bob_bit: Option<bool>,
    pub eve_bit: bool,
    pub true_bit: bool,
}

/// One round of repetition-code advantage distillation over blocks of `n`
/// bits. A trailing partial block is dropped.
pub fn advantage_distill(a: &[bool], b: &[bool], e: &[bool], n: usize, rng: RngStream) -> Result<Vec<DistillBlock>> {
    pairwise_error_rates(a, b, e)?;
    if n == 0 {
        return domain("block length must be at least 1");
    }
    let mut r = rng.rng();
    let blocks = a.len() / n;
    let mut out = Vec::with_capacity(blocks);
    for k in 0..blocks {
        let idx = k * n..(k + 1) * n;
        let c: bool = r.random();
        let first = b[idx.start] ^ a[idx.start] ^ c;
        let accepted = idx.clone().all(|i| (b[i] ^ a[i] ^ c) == first);
        let ones = idx.clone().filter(|&i| e[i] ^ a[i] ^ c).count();
        let eve_bit = match (2 * ones).cmp(&n) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => r.random(),
        };
        out.push(DistillBlock { n, accepted, bob_bit: accepted.then_some(first), eve_bit, true_bit: c });
    }
    Ok(out)
}

/// Bob's error on accepted blocks for raw disagreement `eps`.
pub fn distilled_error(eps: f64, n: usize) -> f64 {
    let (p, q) = (eps.powi(n as i32), (1.0 - eps).powi(n as i32));
    p / (p + q)
}

pub fn acceptance_probability(eps: f64, n: usize) -> f64 {
    eps.powi(n as i32) + (1.0 - eps).powi(n as i32)
}

/// `h(eps_E) - h(eps_B)` floored at 0, in bits per accepted block.
pub fn ck_rate(eps_b: f64, eps_e: f64) -> f64 {
    (binary_entropy(eps_e) - binary_entropy(eps_b)).max(0.0)
}
