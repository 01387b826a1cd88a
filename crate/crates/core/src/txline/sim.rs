use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{shunt_reflection, shunt_scatter_with, terminate_scatter, LineConfig, Resistance, Source, Termination};
use crate::error::Result;
use crate::signal::{johnson_sigma, RngStream};

#[derive(Debug, Clone, Copy)]
struct ShuntState {
    position: usize,
    ohms: f64,
    rho: f64,
    a_left: f64,
    a_right: f64,
}

/// Waves on both sides of a node. For an ordinary node the two sides agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSides {
    /// `(v+, v-)` on the segment towards Alice.
    pub alice_side: (f64, f64),
    /// `(v+, v-)` on the segment towards Bob.
    pub bob_side: (f64, f64),
}

/// Cached Johnson sigma for the last thermal termination seen at one end.
#[derive(Debug, Clone, Copy)]
struct NoiseCache {
    ohms: f64,
    kelvin: f64,
    sigma: f64,
}

/// Stateful single-threaded line simulator.
///
/// `right[i]` / `left[i]` hold the waves at node `i`. At the terminals the
/// incident wave is kept in the buffer next to the reflected one so that the
/// terminal voltage is `right + left` like any other node.
#[derive(Debug, Clone)]
pub struct LineSimulator {
    config: LineConfig,
    right: Vec<f64>,
    left: Vec<f64>,
    shunt: Option<ShuntState>,
    noise_a: ChaCha8Rng,
    noise_b: ChaCha8Rng,
    cache_a: Option<NoiseCache>,
    cache_b: Option<NoiseCache>,
    last_e: (f64, f64),
    time: usize,
}

impl LineSimulator {
    /// Thermal noise at the two terminals is drawn from independent
    /// substreams of `rng`.
    pub fn new(config: LineConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        let nodes = config.delay + 1;
        let shunt = config.shunt.map(|s| ShuntState {
            position: s.position,
            ohms: s.ohms,
            rho: shunt_reflection(s.ohms, config.z0),
            a_left: 0.0,
            a_right: 0.0,
        });
        Ok(Self {
            right: vec![0.0; nodes],
            left: vec![0.0; nodes],
            shunt,
            noise_a: rng.substream(0xA11CE).rng(),
            noise_b: rng.substream(0xB0B).rng(),
            cache_a: None,
            cache_b: None,
            last_e: (0.0, 0.0),
            time: 0,
            config,
        })
    }

    pub fn config(&self) -> &LineConfig {
        &self.config
    }

    /// Number of steps taken so far.
    pub fn time(&self) -> usize {
        self.time
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    /// Series source samples applied at Alice's and Bob's terminals in the last step.
    pub fn last_sources(&self) -> (f64, f64) {
        self.last_e
    }

    /// Advance one sample: propagate every wave one cell, then scatter at the
    /// terminals and at the shunt.
    pub fn step(&mut self, alice: &Termination, bob: &Termination) -> Result<()> {
        let d = self.config.delay;
        let z0 = self.config.z0;
        self.right.copy_within(0..d, 1);
        self.left.copy_within(1..=d, 0);

        if let Some(sh) = self.shunt.as_mut() {
            let p = sh.position;
            sh.a_left = self.right[p];
            sh.a_right = self.left[p];
            let (bl, br) = shunt_scatter_with(sh.a_left, sh.a_right, sh.rho);
            self.left[p] = bl;
            self.right[p] = br;
        }

        let e_a = source_sample(alice, self.time, self.config.dt, &mut self.noise_a, &mut self.cache_a)?;
        let e_b = source_sample(bob, self.time, self.config.dt, &mut self.noise_b, &mut self.cache_b)?;
        self.right[0] = terminate_scatter(self.left[0], alice.resistance, e_a, z0);
        self.left[d] = terminate_scatter(self.right[d], bob.resistance, e_b, z0);
        self.last_e = (e_a, e_b);
        self.time += 1;
        Ok(())
    }

    /// Force every wave to zero (ideal momentary grounding of the whole line).
    pub fn ground(&mut self) {
        self.right.fill(0.0);
        self.left.fill(0.0);
        if let Some(sh) = self.shunt.as_mut() {
            sh.a_left = 0.0;
            sh.a_right = 0.0;
        }
    }

    fn is_shunt(&self, node: usize) -> Option<&ShuntState> {
        self.shunt.as_ref().filter(|s| s.position == node)
    }

    pub fn sides(&self, node: usize) -> NodeSides {
        match self.is_shunt(node) {
            Some(sh) => NodeSides {
                alice_side: (sh.a_left, self.left[node]),
                bob_side: (self.right[node], sh.a_right),
            },
            None => {
                let w = (self.right[node], self.left[node]);
                NodeSides { alice_side: w, bob_side: w }
            }
        }
    }

    /// `(v+, v-)` at a node, taken on the Alice side of a shunt.
    pub fn waves(&self, node: usize) -> (f64, f64) {
        self.sides(node).alice_side
    }

    pub fn node_voltage(&self, node: usize) -> f64 {
        let (p, m) = self.waves(node);
        p + m
    }

    /// Current towards Bob on the Alice side of `node`.
    pub fn node_current(&self, node: usize) -> f64 {
        let (p, m) = self.waves(node);
        (p - m) / self.config.z0
    }

    /// Current delivered into the line by Alice's terminal.
    pub fn alice_current(&self) -> f64 {
        self.node_current(0)
    }

    /// Current delivered into Bob's terminal from the line.
    pub fn bob_current(&self) -> f64 {
        self.node_current(self.config.delay)
    }

    /// Current through the shunt to ground, if one is fitted.
    pub fn shunt_current(&self) -> Option<f64> {
        self.shunt.map(|sh| self.node_voltage(sh.position) / sh.ohms)
    }

    /// Electromagnetic energy of the travelling waves, summed over the `D`
    /// line segments, in units of volts squared per ohm.
    pub fn energy(&self) -> f64 {
        let d = self.config.delay;
        let r: f64 = self.right[..d].iter().map(|v| v * v).sum();
        let l: f64 = self.left[1..=d].iter().map(|v| v * v).sum();
        (r + l) / self.config.z0
    }
}

fn source_sample(
    term: &Termination,
    time: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    cache: &mut Option<NoiseCache>,
) -> Result<f64> {
    Ok(match &term.source {
        Source::None => 0.0,
        Source::Constant(v) => *v,
        Source::Trace(t) => t.get_or_zero(time),
        Source::Thermal { kelvin } => {
            let Resistance::Ohms(ohms) = term.resistance else {
                term.validate()?;
                unreachable!("validated thermal termination is resistive")
            };
            let sigma = match *cache {
                Some(c) if c.ohms == ohms && c.kelvin == *kelvin => c.sigma,
                _ => {
                    term.validate()?;
                    let sigma = johnson_sigma(ohms, *kelvin, dt)?;
                    *cache = Some(NoiseCache { ohms, kelvin: *kelvin, sigma });
                    sigma
                }
            };
            sigma * rng.sample::<f64, _>(StandardNormal)
        }
    })
}
