use std::io::Write;

use super::{cmi, conditional_entropy, BinningSpec, CmiEstimate, JointSamples};
use crate::error::Result;
use crate::signal::RngStream;

/// One line of the information report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub quantity: String,
    pub estimate_bits: f64,
    pub baseline_bits: Option<f64>,
    pub n: usize,
    pub bins: usize,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub h_x_given_za: f64,
    pub h_x_given_z: f64,
    pub h_x_given_zy: f64,
    /// `I(X;Z_B|Z_A)`, the gap between the first two entropies.
    pub screening: CmiEstimate,
    /// `I(X;Y|Z)`, the gap between the last two.
    pub cmi_xy: CmiEstimate,
    pub tolerance: f64,
    pub pass: bool,
    pub rows: Vec<ReportRow>,
}

/// Check that `z_a` alone screens X from the rest of Eve's record `z_b` and
/// from Y: `H(X|Z_A) = H(X|Z) = H(X|Z,Y)`, with each gap compared as a CMI
/// against its own shuffle baseline plus `tolerance` bits.
#[allow(clippy::too_many_arguments)]
pub fn markov_test(
    samples: &JointSamples,
    x: &[&str],
    y: &[&str],
    z_a: &[&str],
    z_b: &[&str],
    spec: &BinningSpec,
    tolerance: f64,
    rng: RngStream,
) -> Result<MarkovReport> {
    let z: Vec<&str> = z_a.iter().chain(z_b).copied().collect();
    let zy: Vec<&str> = z.iter().chain(y).copied().collect();
    let h_x_given_za = conditional_entropy(samples, x, z_a, spec)?;
    let h_x_given_z = conditional_entropy(samples, x, &z, spec)?;
    let h_x_given_zy = conditional_entropy(samples, x, &zy, spec)?;
    let screening = cmi(samples, x, z_b, z_a, spec, rng.substream(1))?;
    let cmi_xy = cmi(samples, x, y, &z, spec, rng.substream(2))?;
    let ok = |c: &CmiEstimate| c.estimate <= c.baseline + tolerance;
    let pass = ok(&screening) && ok(&cmi_xy);

    let n = samples.n();
    let bins = spec.default_bins;
    let entropy_row = |q: &str, v: f64| ReportRow { quantity: q.into(), estimate_bits: v, baseline_bits: None, n, bins, pass: None };
    let cmi_row = |q: &str, c: &CmiEstimate| ReportRow {
        quantity: q.into(),
        estimate_bits: c.estimate,
        baseline_bits: Some(c.baseline),
        n,
        bins,
        pass: Some(ok(c)),
    };
    let rows = vec![
        entropy_row("H(X|Z_A)", h_x_given_za),
        entropy_row("H(X|Z)", h_x_given_z),
        entropy_row("H(X|Z,Y)", h_x_given_zy),
        cmi_row("I(X;Z_B|Z_A)", &screening),
        cmi_row("I(X;Y|Z)", &cmi_xy),
    ];
    Ok(MarkovReport { h_x_given_za, h_x_given_z, h_x_given_zy, screening, cmi_xy, tolerance, pass, rows })
}

/// Report CSV: `quantity,estimate_bits,baseline_bits,n,bins,pass`.
pub fn write_report_csv<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["quantity", "estimate_bits", "baseline_bits", "n", "bins", "pass"])?;
    for r in rows {
        out.write_record([
            r.quantity.clone(),
            format!("{:e}", r.estimate_bits),
            r.baseline_bits.map(|b| format!("{b:e}")).unwrap_or_default(),
            r.n.to_string(),
            r.bins.to_string(),
            r.pass.map(|p| if p { "PASS" } else { "FAIL" }.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
