//! Seeded randomness, Johnson-Nyquist noise scaling and basic trace statistics.
//!
//! Thermal noise is discrete-time white Gaussian, band limited to the
//! simulation Nyquist frequency `f_N = 1 / (2 dt)`. The sample interval is
//! therefore the only bandwidth knob: a measurement bandwidth `B` corresponds
//! to `f_N`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};

/// Physical constants used by the noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Boltzmann constant in joules per kelvin.
    pub k_b: f64,
}

/// CODATA 2018 exact value of the Boltzmann constant.
pub const BOLTZMANN: f64 = 1.380649e-23;

pub const CONSTANTS: PhysicalConstants = PhysicalConstants { k_b: BOLTZMANN };

/// Nyquist frequency of a sampled signal with interval `dt`.
pub fn nyquist(dt: f64) -> f64 {
    0.5 / dt
}

/// A uniformly sampled real-valued time series.
///
/// Values are finite by construction; `dt` is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    dt: f64,
    samples: Vec<f64>,
}

impl SampledTrace {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return domain(format!("sample interval must be positive, got {dt}"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite sample at index {i}"));
        }
        Ok(Self { dt, samples })
    }

    pub fn zeros(dt: f64, len: usize) -> Result<Self> {
        Self::new(dt, vec![0.0; len])
    }

    pub fn constant(dt: f64, len: usize, value: f64) -> Result<Self> {
        Self::new(dt, vec![value; len])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Sample at `index`, or zero past the end of the trace.
    pub fn get_or_zero(&self, index: usize) -> f64 {
        self.samples.get(index).copied().unwrap_or(0.0)
    }
}

/// Identifies a reproducible random stream: a 64-bit seed plus a stream id.
///
/// The generator is ChaCha8 with the stream id mapped onto ChaCha's native
/// stream counter, so distinct ids give independent sequences and the output
/// never depends on thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Child stream labelled by `label`. The id is mixed with splitmix64 so
    /// that nested derivations do not collide with sibling ids.
    pub fn substream(&self, label: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(label.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-sample standard deviation of the Thevenin noise source of a resistor
/// `r` ohms at `t` kelvin, white up to the Nyquist frequency of `dt`:
/// `sqrt(4 k_B T R f_N)`.
pub fn johnson_sigma(r: f64, t: f64, dt: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return domain(format!("resistance must be finite and non-negative, got {r}"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("temperature must be finite and non-negative, got {t}"));
    }
    if !(dt > 0.0) {
        return domain(format!("sample interval must be positive, got {dt}"));
    }
    Ok((4.0 * BOLTZMANN * t * r * nyquist(dt)).sqrt())
}

fn check_window(len: usize, window: &std::ops::Range<usize>) -> Result<()> {
    if window.start >= window.end {
        return domain("empty averaging window");
    }
    if window.end > len {
        return domain(format!("window {window:?} exceeds trace length {len}"));
    }
    Ok(())
}

/// Mean of the squared samples over `window`.
pub fn mean_square(trace: &SampledTrace, window: std::ops::Range<usize>) -> Result<f64> {
    check_window(trace.len(), &window)?;
    Ok(mean_square_slice(&trace.samples[window]))
}

pub(crate) fn mean_square_slice(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// `(1/n) sum a(t) b(t + lag)` over the overlap of the two traces.
pub fn cross_correlation(a: &SampledTrace, b: &SampledTrace, lag: usize) -> Result<f64> {
    if a.dt != b.dt {
        return domain(format!("sample intervals differ: {} vs {}", a.dt, b.dt));
    }
    cross_correlation_slice(&a.samples, &b.samples, lag)
}

pub(crate) fn cross_correlation_slice(a: &[f64], b: &[f64], lag: usize) -> Result<f64> {
    let n = a.len().min(b.len().saturating_sub(lag));
    if n == 0 {
        return domain(format!("no overlap at lag {lag}"));
    }
    let sum: f64 = a[..n].iter().zip(&b[lag..lag + n]).map(|(x, y)| x * y).sum();
    Ok(sum / n as f64)
}

/// Mean-square reading of an integrating voltmeter.
///
/// The window is cut into consecutive blocks of `block` samples; each block is
/// averaged (integrate and dump) and the mean square of the block averages is
/// scaled by `block`. For white input of variance `s^2` this returns `s^2`;
/// for a coloured process it estimates the zero-frequency (long-run) variance,
/// i.e. the level a slow instrument sees. Trailing samples that do not fill a
/// block are ignored.
pub fn integrated_mean_square(x: &[f64], block: usize) -> Result<f64> {
    if block == 0 {
        return domain("voltmeter block length must be positive");
    }
    let blocks = x.len() / block;
    if blocks == 0 {
        return domain(format!("window of {} samples is shorter than one block of {block}", x.len()));
    }
    let mut acc = 0.0;
    for chunk in x.chunks_exact(block) {
        let m = chunk.iter().sum::<f64>() / block as f64;
        acc += m * m;
    }
    Ok(block as f64 * acc / blocks as f64)
}

/// Overlapping batch means: `block` times the mean square of every running
/// average of `block` consecutive samples.
pub fn overlapping_mean_square(x: &[f64], block: usize) -> Result<f64> {
    if block == 0 {
        return domain("voltmeter block length must be positive");
    }
    if x.len() < block {
        return domain(format!("window of {} samples is shorter than one block of {block}", x.len()));
    }
    let mut sum: f64 = x[..block].iter().sum();
    let mut acc = sum * sum;
    for k in block..x.len() {
        sum += x[k] - x[k - block];
        acc += sum * sum;
    }
    let windows = (x.len() - block + 1) as f64;
    Ok(acc / (windows * block as f64))
}

/// Zero-frequency mean-square level as a slow voltmeter reports it.
///
/// Batch means over `b` samples estimate the long-run variance with a bias
/// proportional to `1/b`; `2 OBM(2b) - OBM(b)` cancels it, leaving an
/// estimate that is exact for any process whose correlations die out within
/// `b` samples. Needs at least `2b` samples.
pub fn voltmeter_reading(x: &[f64], block: usize) -> Result<f64> {
    if block == 0 || x.len() < 2 * block {
        return domain(format!("voltmeter needs at least two blocks of {block} samples, got {}", x.len()));
    }
    Ok(2.0 * overlapping_mean_square(x, 2 * block)? - overlapping_mean_square(x, block)?)
}

/// Two-sided Thevenin/lumped prediction of the mean-square node voltage of two
/// thermal resistors joined by an ideal wire: `4 k_B T (ra || rb) f_N`.
pub fn lumped_msv(ra: f64, rb: f64, t: f64, dt: f64) -> f64 {
    4.0 * BOLTZMANN * t * parallel(ra, rb) * nyquist(dt)
}

pub fn parallel(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn johnson_sigma_values() {
        assert_eq!(johnson_sigma(0.0, 300.0, 5e-6).unwrap(), 0.0);
        // sqrt(4 * 1.380649e-23 * 300 * 1000 * 1e5)
        let s = johnson_sigma(1000.0, 300.0, 5e-6).unwrap();
        assert!((s - 1.287_159_197_613e-6).abs() < 1e-17, "{s}");
        let s4 = johnson_sigma(4000.0, 300.0, 5e-6).unwrap();
        assert!((s4 - 2.0 * s).abs() < 1e-18);
    }

    #[test]
    fn johnson_sigma_squared_is_linear() {
        let base = johnson_sigma(100.0, 10.0, 1e-3).unwrap().powi(2);
        for &k in &[0.5, 2.0, 3.0, 17.0] {
            let r = johnson_sigma(100.0 * k, 10.0, 1e-3).unwrap().powi(2);
            let t = johnson_sigma(100.0, 10.0 * k, 1e-3).unwrap().powi(2);
            // f_N scales as 1/dt
            let f = johnson_sigma(100.0, 10.0, 1e-3 / k).unwrap().powi(2);
            for v in [r, t, f] {
                assert!((v / base - k).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn johnson_sigma_rejects_bad_input() {
        assert!(johnson_sigma(-1.0, 300.0, 1e-6).is_err());
        assert!(johnson_sigma(1.0, -300.0, 1e-6).is_err());
        assert!(johnson_sigma(1.0, 300.0, 0.0).is_err());
    }

    #[test]
    fn trace_rejects_nan_and_bad_dt() {
        assert!(SampledTrace::new(1.0, vec![0.0, f64::NAN]).is_err());
        assert!(SampledTrace::new(1.0, vec![f64::INFINITY]).is_err());
        assert!(SampledTrace::new(0.0, vec![]).is_err());
    }

    #[test]
    fn mean_square_basics() {
        let z = SampledTrace::zeros(1.0, 10).unwrap();
        assert_eq!(mean_square(&z, 0..10).unwrap(), 0.0);
        let c = SampledTrace::constant(1.0, 10, 3.0).unwrap();
        assert_eq!(mean_square(&c, 2..7).unwrap(), 9.0);
        assert!(mean_square(&c, 3..3).is_err());
        assert!(mean_square(&c, 0..11).is_err());
    }

    #[test]
    fn mean_square_of_white_noise() {
        let sigma = 2.5;
        let n = 100_000;
        let mut rng = RngStream::new(7, 0).rng();
        let x: Vec<f64> = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let t = SampledTrace::new(1.0, x).unwrap();
        let ms = mean_square(&t, 0..n).unwrap();
        let tol = 4.0 * sigma * sigma * (2.0 / n as f64).sqrt();
        assert!((ms - sigma * sigma).abs() < tol, "{ms}");
    }

    #[test]
    fn cross_correlation_of_delayed_copy() {
        let mut rng = RngStream::new(11, 3).rng();
        let n = 50_000;
        let lag = 17;
        let gamma = -0.6;
        let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut b = vec![0.0; n];
        for i in lag..n {
            b[i] = gamma * a[i - lag];
        }
        let ta = SampledTrace::new(1.0, a.clone()).unwrap();
        let tb = SampledTrace::new(1.0, b).unwrap();
        let unit = SampledTrace::new(
            1.0,
            (0..n).map(|i| if i >= lag { a[i - lag] } else { 0.0 }).collect(),
        )
        .unwrap();
        let ms = mean_square(&ta, 0..n - lag).unwrap();
        assert_eq!(cross_correlation(&ta, &unit, lag).unwrap(), ms);
        let c = cross_correlation(&ta, &tb, lag).unwrap();
        assert!((c - gamma * ms).abs() < 1e-12);
    }

    #[test]
    fn cross_correlation_of_independent_noise() {
        let mut rng = RngStream::new(5, 1).rng();
        let n = 40_000;
        let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let c = cross_correlation_slice(&a, &b, 0).unwrap();
        assert!(c.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn cross_correlation_rejects_dt_mismatch_and_no_overlap() {
        let a = SampledTrace::zeros(1.0, 4).unwrap();
        let b = SampledTrace::zeros(2.0, 4).unwrap();
        assert!(cross_correlation(&a, &b, 0).is_err());
        assert!(cross_correlation(&a, &a, 4).is_err());
    }

    #[test]
    fn autocorrelation_at_zero_lag_equals_mean_square() {
        let mut rng = RngStream::new(2, 2).rng();
        let t = SampledTrace::new(0.1, (0..1000).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
        assert_eq!(cross_correlation(&t, &t, 0).unwrap(), mean_square(&t, 0..1000).unwrap());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(42, 9);
        let a: Vec<u64> = { let mut r = s.rng(); (0..8).map(|_| r.random()).collect() };
        let b: Vec<u64> = { let mut r = s.rng(); (0..8).map(|_| r.random()).collect() };
        assert_eq!(a, b);
        let c: Vec<u64> = { let mut r = s.substream(1).rng(); (0..8).map(|_| r.random()).collect() };
        assert_ne!(a, c);
        assert_ne!(s.substream(1), s.substream(2));
        assert_ne!(s.substream(1).substream(2), s.substream(2).substream(1));
    }

    #[test]
    fn voltmeter_reading_removes_batch_bias() {
        // AR(1) with coefficient a: long-run variance 1/(1-a)^2, batch bias O(1/b).
        let a = 0.5;
        let mut rng = RngStream::new(4, 0).rng();
        let mut y = 0.0;
        let x: Vec<f64> = (0..400_000)
            .map(|_| {
                y = a * y + rng.sample::<f64, _>(StandardNormal);
                y
            })
            .collect();
        let truth = 1.0 / ((1.0 - a) * (1.0 - a));
        let plain = overlapping_mean_square(&x, 16).unwrap() / truth;
        let reading = voltmeter_reading(&x, 16).unwrap() / truth;
        // OBM(b) sits near 1 - 2a/((1-a^2) b) = 1 - 1/12 here.
        assert!((plain - 11.0 / 12.0).abs() < 0.02, "{plain}");
        assert!((reading - 1.0).abs() < 0.02, "{reading}");
        assert!(voltmeter_reading(&x[..31], 16).is_err());
        assert!(overlapping_mean_square(&x, 0).is_err());
    }

    #[test]
    fn integrated_mean_square_of_white_noise_is_variance() {
        let mut rng = RngStream::new(3, 0).rng();
        let x: Vec<f64> = (0..64_000).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let v = integrated_mean_square(&x, 64).unwrap();
        // 1000 blocks: relative sd sqrt(2/1000)
        assert!((v / 4.0 - 1.0).abs() < 5.0 * (2.0f64 / 1000.0).sqrt());
        assert!(integrated_mean_square(&x[..10], 64).is_err());
        assert!(integrated_mean_square(&x, 0).is_err());
    }
}
