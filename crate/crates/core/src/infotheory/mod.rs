//! Plug-in entropy and conditional mutual information on binned samples, and
//! the closed-form CMI of a Gaussian model.

mod estimate;
mod gaussian;
mod markov;

pub use estimate::{cmi, conditional_entropy, entropy, mutual_information, CmiEstimate};
pub use gaussian::{gaussian_cmi, GaussianModel};
pub use markov::{markov_test, write_report_csv, MarkovReport, ReportRow};

use std::collections::{BTreeMap, HashMap};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Real(Vec<f64>),
    Symbol(Vec<i64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Symbol(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named, equal-length sample columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointSamples {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl JointSamples {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, column: Column) -> Result<()> {
        if self.names.iter().any(|n| n == name) {
            return domain(format!("duplicate column {name}"));
        }
        if let Some(first) = self.columns.first() {
            if first.len() != column.len() {
                return Err(Error::LengthMismatch { left: first.len(), right: column.len() });
            }
        }
        self.names.push(name.to_string());
        self.columns.push(column);
        Ok(())
    }

    pub fn with_real(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.push(name, Column::Real(values))?;
        Ok(self)
    }

    pub fn with_symbols(mut self, name: &str, values: Vec<i64>) -> Result<Self> {
        self.push(name, Column::Symbol(values))?;
        Ok(self)
    }

    pub fn with_bits(self, name: &str, bits: &[bool]) -> Result<Self> {
        self.with_symbols(name, bits.iter().map(|&b| i64::from(b)).collect())
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        match self.names.iter().position(|n| n == name) {
            Some(i) => Ok(&self.columns[i]),
            None => domain(format!("no column named {name}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnBinning {
    /// Equal-width bins over `range`, or the data's min..max when absent.
    EqualWidth { bins: usize, range: Option<(f64, f64)> },
    /// Every distinct value is its own symbol.
    PassThrough,
}

/// How real-valued columns are discretised. Symbol columns always pass through.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningSpec {
    pub default_bins: usize,
    pub per_column: HashMap<String, ColumnBinning>,
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self::uniform(16)
    }
}

impl BinningSpec {
    pub fn uniform(bins: usize) -> Self {
        Self { default_bins: bins, per_column: HashMap::new() }
    }

    pub fn with(mut self, name: &str, b: ColumnBinning) -> Self {
        self.per_column.insert(name.to_string(), b);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.default_bins < 2 {
            return domain("continuous columns need at least 2 bins");
        }
        for (name, b) in &self.per_column {
            if let ColumnBinning::EqualWidth { bins, range } = b {
                if *bins < 2 {
                    return domain(format!("column {name} needs at least 2 bins"));
                }
                if let Some((lo, hi)) = range {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        return domain(format!("column {name} has an invalid range"));
                    }
                }
            }
        }
        Ok(())
    }

    fn rule(&self, name: &str) -> ColumnBinning {
        self.per_column
            .get(name)
            .copied()
            .unwrap_or(ColumnBinning::EqualWidth { bins: self.default_bins, range: None })
    }
}

/// Dense symbol codes `0..card` for one column.
#[derive(Debug, Clone)]
pub(crate) struct Codes {
    pub codes: Vec<u32>,
    pub card: u64,
}

fn dense<K: Ord + Copy>(keys: impl Iterator<Item = K> + Clone) -> Codes {
    let mut map = BTreeMap::new();
    for k in keys.clone() {
        let next = map.len() as u32;
        map.entry(k).or_insert(next);
    }
    let codes = keys.map(|k| map[&k]).collect();
    Codes { codes, card: map.len().max(1) as u64 }
}

pub(crate) fn discretize(samples: &JointSamples, name: &str, spec: &BinningSpec) -> Result<Codes> {
    match samples.column(name)? {
        Column::Symbol(v) => Ok(dense(v.iter().copied())),
        Column::Real(v) => match spec.rule(name) {
            ColumnBinning::PassThrough => {
                if v.iter().any(|x| x.is_nan()) {
                    return domain(format!("column {name} contains NaN"));
                }
                Ok(dense(v.iter().map(|x| ordered_bits(*x + 0.0))))
            }
            ColumnBinning::EqualWidth { bins, range } => {
                if bins < 2 {
                    return domain(format!("column {name} needs at least 2 bins"));
                }
                let (lo, hi) = match range {
                    Some(r) => r,
                    None => v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))),
                };
                if v.iter().any(|x| !x.is_finite()) {
                    return domain(format!("column {name} contains non-finite values"));
                }
                let width = hi - lo;
                let codes = v
                    .iter()
                    .map(|&x| {
                        if width <= 0.0 {
                            0
                        } else {
                            (((x - lo) / width * bins as f64).floor().max(0.0) as usize).min(bins - 1) as u32
                        }
                    })
                    .collect();
                Ok(Codes { codes, card: bins as u64 })
            }
        },
    }
}

/// Order-preserving integer image of a float.
fn ordered_bits(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    if b < 0 {
        b ^ i64::MAX
    } else {
        b
    }
}

/// Mixed-radix joint code of several columns, re-densified whenever the
/// product alphabet would overflow.
pub(crate) fn joint(parts: &[&Codes]) -> Codes {
    let n = parts.first().map_or(0, |c| c.codes.len());
    let mut acc = Codes { codes: vec![0; n], card: 1 };
    for p in parts {
        if acc.card.saturating_mul(p.card) > u32::MAX as u64 {
            acc = dense(acc.codes.iter().copied());
            if acc.card.saturating_mul(p.card) > u32::MAX as u64 {
                let pairs: Vec<(u32, u32)> = acc.codes.iter().copied().zip(p.codes.iter().copied()).collect();
                acc = dense(pairs.into_iter());
                continue;
            }
        }
        for (c, &x) in acc.codes.iter_mut().zip(&p.codes) {
            *c = *c * p.card as u32 + x;
        }
        acc.card *= p.card;
    }
    acc
}
