use rand::seq::SliceRandom;

use super::{discretize, joint, BinningSpec, Codes, JointSamples};
use crate::error::{domain, Result};
use crate::signal::RngStream;

fn entropy_of(c: &Codes) -> f64 {
    let n = c.codes.len();
    if n == 0 {
        return 0.0;
    }
    let mut counts: Vec<u64>;
    if c.card <= 1 << 24 {
        counts = vec![0; c.card as usize];
        for &x in &c.codes {
            counts[x as usize] += 1;
        }
    } else {
        let mut sorted = c.codes.clone();
        sorted.sort_unstable();
        counts = sorted.chunk_by(|a, b| a == b).map(|run| run.len() as u64).collect();
    }
    let nf = n as f64;
    let sum: f64 = counts.iter().filter(|&&k| k > 0).map(|&k| k as f64 * (k as f64).log2()).sum();
    (nf.log2() - sum / nf).max(0.0)
}

fn codes_for(samples: &JointSamples, cols: &[&str], spec: &BinningSpec) -> Result<Codes> {
    let parts = cols.iter().map(|c| discretize(samples, c, spec)).collect::<Result<Vec<_>>>()?;
    Ok(joint(&parts.iter().collect::<Vec<_>>()))
}

fn check(samples: &JointSamples, spec: &BinningSpec) -> Result<()> {
    spec.validate()?;
    if samples.n() == 0 {
        return domain("no samples");
    }
    Ok(())
}

/// Plug-in joint entropy of `cols`, in bits.
pub fn entropy(samples: &JointSamples, cols: &[&str], spec: &BinningSpec) -> Result<f64> {
    check(samples, spec)?;
    Ok(entropy_of(&codes_for(samples, cols, spec)?))
}

/// `H(target | given) = H(target, given) - H(given)`.
pub fn conditional_entropy(samples: &JointSamples, target: &[&str], given: &[&str], spec: &BinningSpec) -> Result<f64> {
    check(samples, spec)?;
    let t = codes_for(samples, target, spec)?;
    let g = codes_for(samples, given, spec)?;
    Ok((entropy_of(&joint(&[&t, &g])) - entropy_of(&g)).max(0.0))
}

pub fn mutual_information(samples: &JointSamples, x: &[&str], y: &[&str], spec: &BinningSpec) -> Result<f64> {
    check(samples, spec)?;
    let xc = codes_for(samples, x, spec)?;
    let yc = codes_for(samples, y, spec)?;
    Ok((entropy_of(&xc) + entropy_of(&yc) - entropy_of(&joint(&[&xc, &yc]))).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmiEstimate {
    pub estimate: f64,
    /// The same estimator after permuting Y within each Z bin.
    pub baseline: f64,
    pub n: usize,
    /// Occupied Z bins.
    pub z_bins: usize,
    /// Occupied Z bins holding a single sample; they contribute nothing.
    pub singleton_z_bins: usize,
}

impl CmiEstimate {
    pub fn corrected(&self) -> f64 {
        self.estimate - self.baseline
    }
}

fn cmi_codes(x: &Codes, y: &Codes, z: &Codes) -> f64 {
    let xz = joint(&[x, z]);
    let yz = joint(&[y, z]);
    let xyz = joint(&[x, y, z]);
    (entropy_of(&xz) + entropy_of(&yz) - entropy_of(&xyz) - entropy_of(z)).max(0.0)
}

/// Plug-in `I(X;Y|Z) = H(X|Z) - H(X|Y,Z)` with a within-Z shuffle baseline.
/// An empty `z` conditions on nothing.
pub fn cmi(
    samples: &JointSamples,
    x: &[&str],
    y: &[&str],
    z: &[&str],
    spec: &BinningSpec,
    rng: RngStream,
) -> Result<CmiEstimate> {
    check(samples, spec)?;
    if x.is_empty() || y.is_empty() {
        return domain("X and Y must name at least one column");
    }
    let xc = codes_for(samples, x, spec)?;
    let yc = codes_for(samples, y, spec)?;
    let zc = codes_for(samples, z, spec)?;
    let estimate = cmi_codes(&xc, &yc, &zc);

    // Group sample indices by Z bin, then shuffle Y inside each group.
    let n = samples.n();
    let zd = if zc.card <= 1 << 24 { zc.clone() } else { super::dense(zc.codes.iter().copied()) };
    let mut starts = vec![0usize; zd.card as usize + 1];
    for &c in &zd.codes {
        starts[c as usize + 1] += 1;
    }
    let z_bins = starts.iter().skip(1).filter(|&&k| k > 0).count();
    let singleton_z_bins = starts.iter().skip(1).filter(|&&k| k == 1).count();
    for i in 1..starts.len() {
        starts[i] += starts[i - 1];
    }
    let mut order = vec![0usize; n];
    let mut fill = starts.clone();
    for (i, &c) in zd.codes.iter().enumerate() {
        order[fill[c as usize]] = i;
        fill[c as usize] += 1;
    }
    let mut shuffled_y = yc.codes.clone();
    let mut r = rng.rng();
    let mut group: Vec<u32> = Vec::new();
    for w in starts.windows(2) {
        let idx = &order[w[0]..w[1]];
        if idx.len() < 2 {
            continue;
        }
        group.clear();
        group.extend(idx.iter().map(|&i| yc.codes[i]));
        group.shuffle(&mut r);
        for (&i, &v) in idx.iter().zip(&group) {
            shuffled_y[i] = v;
        }
    }
    let baseline = cmi_codes(&xc, &Codes { codes: shuffled_y, card: yc.card }, &zc);
    Ok(CmiEstimate { estimate, baseline, n, z_bins, singleton_z_bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::binary_entropy;
    use proptest::prelude::*;
    use rand::Rng;

    fn bits(v: &[u8]) -> Vec<i64> {
        v.iter().map(|&b| b as i64).collect()
    }

    #[test]
    fn entropy_examples() {
        let spec = BinningSpec::default();
        let s = JointSamples::new().with_symbols("X", bits(&[0, 1, 0, 1])).unwrap();
        assert_eq!(entropy(&s, &["X"], &spec).unwrap(), 1.0);
        let s = JointSamples::new().with_symbols("X", bits(&[1, 1, 1, 1])).unwrap();
        assert_eq!(entropy(&s, &["X"], &spec).unwrap(), 0.0);
        let s = JointSamples::new().with_symbols("X", bits(&[0, 1, 1, 1])).unwrap();
        // -(1/4 log2 1/4 + 3/4 log2 3/4)
        assert!((entropy(&s, &["X"], &spec).unwrap() - 0.811_278_124_459_132_8).abs() < 1e-12);
    }

    #[test]
    fn conditional_entropy_of_noisy_copy() {
        let mut r = RngStream::new(3, 0).rng();
        let n = 200_000;
        let x: Vec<i64> = (0..n).map(|_| r.random_range(0..2)).collect();
        let y: Vec<i64> = x.iter().map(|&b| if r.random_bool(0.1) { 1 - b } else { b }).collect();
        let s = JointSamples::new().with_symbols("X", x).unwrap().with_symbols("Y", y).unwrap();
        let spec = BinningSpec::default();
        assert_eq!(conditional_entropy(&s, &["X"], &["X"], &spec).unwrap(), 0.0);
        let h = conditional_entropy(&s, &["X"], &["Y"], &spec).unwrap();
        assert!((h - binary_entropy(0.1)).abs() < 0.005, "{h}");
    }

    #[test]
    fn cmi_examples() {
        let spec = BinningSpec::default();
        let mut r = RngStream::new(4, 0).rng();
        let n = 50_000;
        let b: Vec<i64> = (0..n).map(|_| r.random_range(0..2)).collect();
        let other: Vec<i64> = (0..n).map(|_| r.random_range(0..2)).collect();
        let s = JointSamples::new()
            .with_symbols("X", b.clone())
            .unwrap()
            .with_symbols("Y", b.clone())
            .unwrap()
            .with_symbols("Z", b)
            .unwrap()
            .with_symbols("W", other)
            .unwrap()
            .with_symbols("C", vec![0; n])
            .unwrap();
        let rs = RngStream::new(4, 1);
        assert_eq!(cmi(&s, &["X"], &["Y"], &["Z"], &spec, rs).unwrap().estimate, 0.0);
        let e = cmi(&s, &["X"], &["Y"], &["C"], &spec, rs).unwrap();
        assert!((e.estimate - 1.0).abs() < 1e-3);
        assert!(e.baseline < 1e-3);
        let e = cmi(&s, &["X"], &["W"], &["C"], &spec, rs).unwrap();
        assert!(e.estimate <= e.baseline + 1e-3, "{e:?}");
    }

    #[test]
    fn singleton_z_bins_are_reported() {
        let s = JointSamples::new()
            .with_symbols("X", vec![0, 1, 0, 1, 1])
            .unwrap()
            .with_symbols("Y", vec![0, 1, 1, 0, 1])
            .unwrap()
            .with_symbols("Z", vec![0, 0, 1, 1, 2])
            .unwrap();
        let e = cmi(&s, &["X"], &["Y"], &["Z"], &BinningSpec::default(), RngStream::new(0, 0)).unwrap();
        assert_eq!((e.z_bins, e.singleton_z_bins), (3, 1));
    }

    #[test]
    fn baseline_shrinks_with_n() {
        let spec = BinningSpec::default();
        let mut last = f64::INFINITY;
        for (k, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
            let mut r = RngStream::new(9, k as u64).rng();
            let col = |r: &mut rand_chacha::ChaCha8Rng| (0..n).map(|_| r.random::<f64>()).collect::<Vec<_>>();
            let s = JointSamples::new()
                .with_real("X", col(&mut r))
                .unwrap()
                .with_real("Y", col(&mut r))
                .unwrap()
                .with_real("Z", col(&mut r))
                .unwrap();
            let e = cmi(&s, &["X"], &["Y"], &["Z"], &spec, RngStream::new(9, 100 + k as u64)).unwrap();
            assert!(e.baseline < last, "{n}: {e:?}");
            last = e.baseline;
        }
    }

    #[test]
    fn bins_are_validated() {
        let s = JointSamples::new().with_real("X", vec![0.0, 1.0]).unwrap();
        assert!(entropy(&s, &["X"], &BinningSpec::uniform(1)).is_err());
        assert!(JointSamples::new().with_real("X", vec![0.0]).unwrap().with_real("X", vec![1.0]).is_err());
        assert!(JointSamples::new().with_real("X", vec![0.0]).unwrap().with_real("Y", vec![1.0, 2.0]).is_err());
    }

    fn symbols(len: usize) -> impl Strategy<Value = (Vec<i64>, Vec<i64>, Vec<i64>)> {
        (
            proptest::collection::vec(0i64..4, len),
            proptest::collection::vec(0i64..3, len),
            proptest::collection::vec(0i64..3, len),
        )
    }

    proptest! {
        #[test]
        fn estimates_are_non_negative((x, y, z) in (1usize..200).prop_flat_map(symbols)) {
            let s = JointSamples::new().with_symbols("X", x).unwrap().with_symbols("Y", y).unwrap().with_symbols("Z", z).unwrap();
            let spec = BinningSpec::default();
            prop_assert!(entropy(&s, &["X", "Y"], &spec).unwrap() >= 0.0);
            prop_assert!(conditional_entropy(&s, &["X"], &["Y", "Z"], &spec).unwrap() >= 0.0);
            prop_assert!(mutual_information(&s, &["X"], &["Y"], &spec).unwrap() >= 0.0);
            let e = cmi(&s, &["X"], &["Y"], &["Z"], &spec, RngStream::new(1, 1)).unwrap();
            prop_assert!(e.estimate >= 0.0 && e.baseline >= 0.0);
        }

        #[test]
        fn chain_rule((x, y, _z) in (1usize..200).prop_flat_map(symbols)) {
            let s = JointSamples::new().with_symbols("X", x).unwrap().with_symbols("Y", y).unwrap();
            let spec = BinningSpec::default();
            let hxy = entropy(&s, &["X", "Y"], &spec).unwrap();
            let hx = entropy(&s, &["X"], &spec).unwrap();
            let hy_x = conditional_entropy(&s, &["Y"], &["X"], &spec).unwrap();
            prop_assert!((hxy - (hx + hy_x)).abs() < 1e-12);
        }

        #[test]
        fn function_of_condition_adds_nothing((x, _y, z) in (1usize..200).prop_flat_map(symbols), k in 1i64..4) {
            let fz: Vec<i64> = z.iter().map(|v| (v * k + 1) % 2).collect();
            let s = JointSamples::new().with_symbols("X", x).unwrap().with_symbols("FZ", fz).unwrap().with_symbols("Z", z).unwrap();
            let e = cmi(&s, &["X"], &["FZ"], &["Z"], &BinningSpec::default(), RngStream::new(2, 2)).unwrap();
            prop_assert!(e.estimate.abs() < 1e-12);
        }
    }
}
