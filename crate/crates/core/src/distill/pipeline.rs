use std::io::Write;

use rayon::prelude::*;

use super::{
    acceptance_probability, advantage_distill, ck_rate, decision_error, distilled_error, sample_circuit, hard_decision,
    pairwise_error_rates, ObserverCircuit,
};
use crate::error::{domain, Result};
use crate::infotheory::{cmi, gaussian_cmi, mutual_information, BinningSpec, Column, JointSamples};
use crate::signal::RngStream;
use crate::stats::mean_and_se;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub n_grid: Vec<usize>,
    /// Bins per variable for the Monte Carlo CMI.
    pub bins: usize,
    /// Independent batches used for the Monte Carlo standard error.
    pub mc_batches: usize,
    /// McNemar z Eve's distilled error must exceed Bob's by before a rate
    /// is credited.
    pub significance_z: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { n_grid: vec![1, 3, 5, 7, 9, 11, 13, 15], bins: 16, mc_batches: 10, significance_z: 3.0 }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return domain("N grid must be nonempty with N >= 1");
        }
        if self.bins < 2 {
            return domain("need at least 2 bins");
        }
        if self.mc_batches < 2 {
            return domain("need at least 2 Monte Carlo batches");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillRow {
    pub n_block: usize,
    pub blocks: usize,
    pub accepted: usize,
    pub accept_rate: f64,
    pub accept_expected: f64,
    pub eps_b: f64,
    pub eps_b_expected: f64,
    pub eps_e: f64,
    pub ck_rate: f64,
    /// `ck_rate` times accepted blocks per source sample.
    pub ck_rate_per_sample: f64,
    /// McNemar statistic for Eve erring more often than Bob on accepted blocks.
    pub eve_deficit_z: f64,
    /// `ck_rate_per_sample` if `eve_deficit_z` is significant, else 0.
    pub credited_rate_per_sample: f64,
}

/// Plug-in `I(A;B|E)` on the analog samples, shuffle-corrected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloCmi {
    pub estimate: f64,
    pub raw: f64,
    pub baseline: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub params: ObserverCircuit,
    pub sigmas: [f64; 3],
    /// Analytic per-bit decision errors of A, B, E against U.
    pub eps_analytic: [f64; 3],
    pub eps_ab_analytic: f64,
    pub eps_ab: f64,
    pub eps_ae: f64,
    pub eps_be: f64,
    /// `I(A;B)`, `I(A;E)`, `I(B;E)` on the hard-decided bits.
    pub raw_mi: [f64; 3],
    pub rows: Vec<DistillRow>,
    pub cmi_bound_gauss: f64,
    pub cmi_bound_mc: MonteCarloCmi,
}

impl PipelineReport {
    pub fn best_rate(&self) -> f64 {
        self.rows.iter().map(|r| r.credited_rate_per_sample).fold(0.0, f64::max)
    }

    /// Block lengths whose rate per sample exceeds the Monte Carlo bound by
    /// more than three standard errors.
    pub fn bound_violations(&self) -> Vec<usize> {
        let limit = self.cmi_bound_mc.estimate + 3.0 * self.cmi_bound_mc.standard_error;
        self.rows.iter().filter(|r| r.ck_rate_per_sample > limit).map(|r| r.n_block).collect()
    }
}

fn real(s: &JointSamples, name: &str) -> Result<Vec<f64>> {
    match s.column(name)? {
        Column::Real(v) => Ok(v.clone()),
        Column::Symbol(v) => Ok(v.iter().map(|&x| x as f64).collect()),
    }
}

fn monte_carlo_cmi(a: &[f64], b: &[f64], e: &[f64], cfg: &PipelineConfig, rng: RngStream) -> Result<MonteCarloCmi> {
    let spec = BinningSpec::uniform(cfg.bins);
    let estimate = |range: std::ops::Range<usize>, stream: u64| -> Result<(f64, f64)> {
        let s = JointSamples::new()
            .with_real("A", a[range.clone()].to_vec())?
            .with_real("B", b[range.clone()].to_vec())?
            .with_real("E", e[range].to_vec())?;
        let c = cmi(&s, &["A"], &["B"], &["E"], &spec, rng.substream(stream))?;
        Ok((c.estimate, c.baseline))
    };
    let n = a.len();
    let (raw, baseline) = estimate(0..n, 0)?;
    let k = cfg.mc_batches;
    let size = n / k;
    if size < 2 {
        return domain("too few samples for the Monte Carlo batches");
    }
    let batches = (0..k)
        .map(|i| estimate(i * size..(i + 1) * size, 1 + i as u64).map(|(r, b)| r - b))
        .collect::<Result<Vec<_>>>()?;
    let (_, se) = mean_and_se(&batches);
    // Batches are 1/k of the data; their spread scales as 1/sqrt(n).
    Ok(MonteCarloCmi { estimate: (raw - baseline).max(0.0), raw, baseline, standard_error: se / (k as f64).sqrt() })
}

/// Sample the circuit, hard-decide, distill over the N grid and bound the
/// rate by `I(A;B|E)`.
pub fn key_rate_pipeline(params: &ObserverCircuit, cfg: &PipelineConfig, rng: RngStream) -> Result<PipelineReport> {
    params.validate()?;
    cfg.validate()?;
    let samples = sample_circuit(params, rng.substream(0))?;
    let sigmas = params.sigmas()?;
    let half = params.v0_volts / 2.0;
    let (a, b, e) = (real(&samples, "A")?, real(&samples, "B")?, real(&samples, "E")?);
    let (ba, bb, be) = (hard_decision(&a, half)?, hard_decision(&b, half)?, hard_decision(&e, half)?);
    let (eps_ab, eps_ae, eps_be) = pairwise_error_rates(&ba, &bb, &be)?;
    let eps_analytic = sigmas.map(|s| decision_error(params.v0_volts, s));
    let [ea, eb, _] = eps_analytic;
    let eps_ab_analytic = ea * (1.0 - eb) + eb * (1.0 - ea);

    let bits = JointSamples::new().with_bits("A", &ba)?.with_bits("B", &bb)?.with_bits("E", &be)?;
    let spec = BinningSpec::default();
    let raw_mi = [
        mutual_information(&bits, &["A"], &["B"], &spec)?,
        mutual_information(&bits, &["A"], &["E"], &spec)?,
        mutual_information(&bits, &["B"], &["E"], &spec)?,
    ];

    let n = params.n as f64;
    let rows = cfg
        .n_grid
        .iter()
        .map(|&nb| {
            let blocks = advantage_distill(&ba, &bb, &be, nb, rng.substream(100 + nb as u64))?;
            let acc: Vec<super::DistillBlock> = blocks.iter().filter(|k| k.accepted).copied().collect();
            let accepted = acc.len();
            let bob_wrong = |k: &super::DistillBlock| k.bob_bit != Some(k.true_bit);
            let eve_wrong = |k: &super::DistillBlock| k.eve_bit != k.true_bit;
            let frac = |count: usize| if accepted == 0 { 0.0 } else { count as f64 / accepted as f64 };
            let eps_b = frac(acc.iter().filter(|k| bob_wrong(k)).count());
            let eps_e = frac(acc.iter().filter(|k| eve_wrong(k)).count());
            let only_bob = acc.iter().filter(|k| bob_wrong(k) && !eve_wrong(k)).count() as f64;
            let only_eve = acc.iter().filter(|k| eve_wrong(k) && !bob_wrong(k)).count() as f64;
            let z = if only_bob + only_eve > 0.0 { (only_eve - only_bob) / (only_bob + only_eve).sqrt() } else { 0.0 };
            let rate = ck_rate(eps_b, eps_e);
            let per_sample = rate * accepted as f64 / n;
            Ok(DistillRow {
                n_block: nb,
                blocks: blocks.len(),
                accepted,
                accept_rate: if blocks.is_empty() { 0.0 } else { accepted as f64 / blocks.len() as f64 },
                accept_expected: acceptance_probability(eps_ab_analytic, nb),
                eps_b,
                eps_b_expected: distilled_error(eps_ab_analytic, nb),
                eps_e,
                ck_rate: rate,
                ck_rate_per_sample: per_sample,
                eve_deficit_z: z,
                credited_rate_per_sample: if z >= cfg.significance_z { per_sample } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cmi_bound_gauss = gaussian_cmi(&params.surrogate()?, &["A"], &["B"], &["E"])?;
    let cmi_bound_mc = monte_carlo_cmi(&a, &b, &e, cfg, rng.substream(1))?;
    Ok(PipelineReport {
        params: params.clone(),
        sigmas,
        eps_analytic,
        eps_ab_analytic,
        eps_ab,
        eps_ae,
        eps_be,
        raw_mi,
        rows,
        cmi_bound_gauss,
        cmi_bound_mc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub r_e_ohms: f64,
    pub n_block: usize,
    pub accept_rate: f64,
    pub eps_b: f64,
    pub eps_e: f64,
    /// Credited rate per source sample.
    pub ck_rate_per_sample: f64,
    pub cmi_bound_mc: f64,
    pub cmi_bound_gauss: f64,
}

/// Run the pipeline at every `R_E` in `grid`; grid points use independent
/// streams and are evaluated in parallel.
pub fn sweep_re(params: &ObserverCircuit, grid: &[f64], cfg: &PipelineConfig, rng: RngStream) -> Result<Vec<PipelineReport>> {
    if grid.is_empty() {
        return domain("R_E grid is empty");
    }
    grid.par_iter()
        .enumerate()
        .map(|(i, &r_e)| key_rate_pipeline(&params.with_re(r_e), cfg, rng.substream(i as u64)))
        .collect()
}

pub fn sweep_rows(reports: &[PipelineReport]) -> Vec<SweepRow> {
    reports
        .iter()
        .flat_map(|rep| {
            rep.rows.iter().map(move |r| SweepRow {
                r_e_ohms: rep.params.r_e_ohms,
                n_block: r.n_block,
                accept_rate: r.accept_rate,
                eps_b: r.eps_b,
                eps_e: r.eps_e,
                ck_rate_per_sample: r.credited_rate_per_sample,
                cmi_bound_mc: rep.cmi_bound_mc.estimate,
                cmi_bound_gauss: rep.cmi_bound_gauss,
            })
        })
        .collect()
}

/// Sweep CSV: `R_E,N,accept_rate,eps_B,eps_E,ck_rate_per_sample,cmi_bound_mc,cmi_bound_gauss`.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["R_E", "N", "accept_rate", "eps_B", "eps_E", "ck_rate_per_sample", "cmi_bound_mc", "cmi_bound_gauss"])?;
    for r in rows {
        out.write_record([
            r.r_e_ohms.to_string(),
            r.n_block.to_string(),
            format!("{:e}", r.accept_rate),
            format!("{:e}", r.eps_b),
            format!("{:e}", r.eps_e),
            format!("{:e}", r.ck_rate_per_sample),
            format!("{:e}", r.cmi_bound_mc),
            format!("{:e}", r.cmi_bound_gauss),
        ])?;
    }
    out.flush()?;
    Ok(())
}
