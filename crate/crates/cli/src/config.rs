use std::fmt;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use kljn_core::attacks::EchoConfig;
use kljn_core::distill::{ObserverCircuit, PipelineConfig};
use kljn_core::protocols::{KljnParams, NoiselessParams};
use kljn_core::txline::LineConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Kljn,
    Noiseless,
    AttackSuite,
    MarkovTest,
    DistillSweep,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Kljn => "kljn",
            Self::Noiseless => "noiseless",
            Self::AttackSuite => "attack-suite",
            Self::MarkovTest => "markov-test",
            Self::DistillSweep => "distill-sweep",
        })
    }
}

/// The config file. Optional fields are filled in by [`ExperimentConfig::resolve`];
/// the resolved form is what gets echoed to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub line: Option<LineSection>,
    pub kljn: Option<KljnSection>,
    pub noiseless: Option<NoiselessSection>,
    pub attacks: Option<AttackSection>,
    pub markov: Option<MarkovSection>,
    pub distill: Option<DistillSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSection {
    pub z0_ohms: f64,
    pub delay_samples: usize,
    pub dt_seconds: f64,
    /// Eve's node; the midpoint by default.
    pub eve_tap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KljnSection {
    #[serde(rename = "R_L_ohms")]
    pub r_low_ohms: f64,
    #[serde(rename = "R_H_ohms")]
    pub r_high_ohms: f64,
    #[serde(rename = "T_kelvin")]
    pub t_kelvin: f64,
    pub cycles: usize,
    pub settle_samples: Option<usize>,
    pub voltmeter_block_samples: Option<usize>,
    pub samples_per_cycle: Option<usize>,
    /// Cycles whose full traces are exported.
    pub trace_cycles: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiselessSection {
    #[serde(rename = "V0_volts")]
    pub v0_volts: f64,
    pub cycles: usize,
    pub samples_per_half: Option<usize>,
    pub ground_samples: Option<usize>,
    pub source_ohms: Option<f64>,
    pub trace_cycles: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub echo_window_round_trips: Option<usize>,
    /// Transient threshold for the KLJN line; five thermal wave sigmas by default.
    pub kljn_transient_threshold_volts: Option<f64>,
    pub shunt_ohms: Option<f64>,
    pub shunt_cycles: Option<usize>,
    pub ammeter_resolution_amps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSection {
    pub bins: Option<usize>,
    pub tolerance_bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSection {
    #[serde(rename = "V0_volts")]
    pub v0_volts: f64,
    #[serde(rename = "R_A_ohms")]
    pub r_a_ohms: f64,
    #[serde(rename = "R_B_ohms")]
    pub r_b_ohms: f64,
    #[serde(rename = "R_E_grid_ohms")]
    pub r_e_grid_ohms: Vec<f64>,
    #[serde(rename = "T_kelvin")]
    pub t_kelvin: f64,
    pub dt_seconds: f64,
    pub samples: usize,
    #[serde(rename = "N_grid")]
    pub n_grid: Option<Vec<usize>>,
    pub bins: Option<usize>,
    pub mc_batches: Option<usize>,
    pub significance_z: Option<f64>,
}

/// Everything an experiment needs, validated.
#[derive(Debug, Clone)]
pub struct Plan {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub line: Option<LineConfig>,
    pub tap: usize,
    pub kljn: Option<(KljnParams, usize)>,
    pub noiseless: Option<(NoiselessParams, usize)>,
    pub echo: Option<EchoConfig>,
    pub kljn_transient_threshold: f64,
    pub shunt: Option<(f64, usize, f64)>,
    pub markov: (usize, f64),
    pub distill: Option<(ObserverCircuit, Vec<f64>, PipelineConfig)>,
}

/// False for NaN as well.
fn is_positive(x: f64) -> bool {
    x > 0.0
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Fill every default and check all parameters. Errors here are usage errors.
    pub fn resolve(mut self) -> Result<(Self, Plan)> {
        let experiment = self.experiment.context("missing field `experiment`")?;
        let seed = self.seed.context("missing field `seed`")?;
        let output_dir = self.output_dir.clone().context("missing field `output_dir` (or pass --out)")?;
        let needs = |name: &str, present: bool| -> Result<()> {
            if !present {
                bail!("experiment {experiment} needs a [{name}] section");
            }
            Ok(())
        };
        use Experiment::*;
        let protocol = matches!(experiment, AttackSuite | MarkovTest);
        if experiment != DistillSweep {
            needs("line", self.line.is_some())?;
        }
        needs("kljn", self.kljn.is_some() || !(experiment == Kljn || protocol))?;
        needs("noiseless", self.noiseless.is_some() || !(experiment == Noiseless || protocol))?;
        needs("distill", self.distill.is_some() || experiment != DistillSweep)?;

        let mut line = None;
        let mut tap = 0;
        if let Some(s) = self.line.as_mut() {
            let mut l = LineConfig::new(s.z0_ohms, s.delay_samples, s.dt_seconds);
            tap = *s.eve_tap.get_or_insert(l.midpoint());
            l = l.with_taps(vec![tap]);
            l.validate().context("[line]")?;
            line = Some(l);
        }

        let mut kljn = None;
        if let (Some(s), Some(l)) = (self.kljn.as_mut(), line.as_ref()) {
            let mut p = KljnParams::for_line(l, s.r_low_ohms, s.r_high_ohms, s.t_kelvin, s.cycles);
            p.settle_samples = *s.settle_samples.get_or_insert(p.settle_samples);
            p.voltmeter_block = *s.voltmeter_block_samples.get_or_insert(p.voltmeter_block);
            p.samples_per_cycle = *s.samples_per_cycle.get_or_insert(p.settle_samples + 800 * p.voltmeter_block);
            p.validate().context("[kljn]")?;
            if s.cycles == 0 {
                bail!("[kljn] cycles must be positive");
            }
            kljn = Some((p, *s.trace_cycles.get_or_insert(0)));
        }

        let mut noiseless = None;
        if let (Some(s), Some(l)) = (self.noiseless.as_mut(), line.as_ref()) {
            let mut p = NoiselessParams::for_line(l, s.v0_volts, s.cycles);
            p.samples_per_half = *s.samples_per_half.get_or_insert(p.samples_per_half);
            p.ground_samples = *s.ground_samples.get_or_insert(p.ground_samples);
            p.source_ohms = Some(*s.source_ohms.get_or_insert(l.z0));
            p.validate_for(l).context("[noiseless]")?;
            if s.cycles == 0 {
                bail!("[noiseless] cycles must be positive");
            }
            noiseless = Some((p, *s.trace_cycles.get_or_insert(0)));
        }

        let mut echo = None;
        let mut kljn_transient_threshold = 0.0;
        let mut shunt = None;
        if protocol {
            let a = self.attacks.get_or_insert(AttackSection {
                echo_window_round_trips: None,
                kljn_transient_threshold_volts: None,
                shunt_ohms: None,
                shunt_cycles: None,
                ammeter_resolution_amps: None,
            });
            let l = line.as_ref().expect("checked above");
            let (kp, _) = kljn.as_ref().expect("checked above");
            let (np, _) = noiseless.as_ref().expect("checked above");
            let rt = 2 * l.delay;
            let w = *a.echo_window_round_trips.get_or_insert(64);
            let end = kp.settle_samples + w * rt;
            if end > kp.samples_per_cycle {
                bail!("[attacks] echo window of {w} round trips does not fit the KLJN cycle");
            }
            echo = Some(EchoConfig::for_tap(l, tap, kp.settle_samples..end).context("[attacks]")?);
            kljn_transient_threshold = *a
                .kljn_transient_threshold_volts
                .get_or_insert(kljn_core::attacks::kljn_transient_threshold(l, kp.t_kelvin));
            let r_s = *a.shunt_ohms.get_or_insert(100.0 * l.z0);
            let cycles = *a.shunt_cycles.get_or_insert(np.cycles);
            let i_min = *a.ammeter_resolution_amps.get_or_insert(f64::MIN_POSITIVE);
            if !is_positive(r_s) || cycles == 0 || !is_positive(i_min) {
                bail!("[attacks] shunt_ohms, shunt_cycles and ammeter_resolution_amps must be positive");
            }
            l.clone().with_shunt(tap, r_s).validate().context("[attacks]")?;
            shunt = Some((r_s, cycles, i_min));
        }

        let m = self.markov.get_or_insert(MarkovSection { bins: None, tolerance_bits: None });
        let markov = (*m.bins.get_or_insert(16), *m.tolerance_bits.get_or_insert(0.01));
        if markov.0 < 2 || !(is_positive(markov.1) || markov.1 == 0.0) {
            bail!("[markov] needs bins >= 2 and tolerance_bits >= 0");
        }
        if experiment != MarkovTest {
            self.markov = None;
        }
        if !protocol {
            self.attacks = None;
        }

        let mut distill = None;
        if let Some(s) = self.distill.as_mut() {
            let defaults = PipelineConfig::default();
            let params = ObserverCircuit {
                v0_volts: s.v0_volts,
                r_a_ohms: s.r_a_ohms,
                r_b_ohms: s.r_b_ohms,
                r_e_ohms: s.r_e_grid_ohms.first().copied().unwrap_or(0.0),
                t_kelvin: s.t_kelvin,
                dt_seconds: s.dt_seconds,
                n: s.samples,
            };
            let cfg = PipelineConfig {
                n_grid: s.n_grid.get_or_insert(defaults.n_grid).clone(),
                bins: *s.bins.get_or_insert(defaults.bins),
                mc_batches: *s.mc_batches.get_or_insert(defaults.mc_batches),
                significance_z: *s.significance_z.get_or_insert(defaults.significance_z),
            };
            if s.r_e_grid_ohms.is_empty() {
                bail!("[distill] R_E_grid_ohms is empty");
            }
            for &r_e in &s.r_e_grid_ohms {
                params.with_re(r_e).validate().context("[distill]")?;
            }
            cfg.validate().context("[distill]")?;
            distill = Some((params, s.r_e_grid_ohms.clone(), cfg));
        }

        let plan = Plan {
            experiment,
            seed,
            output_dir,
            line,
            tap,
            kljn,
            noiseless,
            echo,
            kljn_transient_threshold,
            shunt,
            markov,
            distill,
        };
        Ok((self, plan))
    }
}
