use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Column, JointSamples};
use crate::error::{domain, Error, Result};
use crate::signal::RngStream;

/// Jointly Gaussian variables, covariance in volts squared.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    names: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianModel {
    pub fn new(names: &[&str], mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = names.len();
        if cov.nrows() != k || cov.ncols() != k || mean.len() != k {
            return domain(format!("model over {k} variables needs a {k}x{k} covariance and {k} means"));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return domain(format!("duplicate variable {a}"));
            }
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return domain("covariance is not symmetric");
        }
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 * scale {
            return domain(format!("covariance is not positive semidefinite (eigenvalue {min_eig:e})"));
        }
        Ok(Self { names: names.iter().map(|s| s.to_string()).collect(), mean, cov })
    }

    /// Zero-mean model from a covariance.
    pub fn centered(names: &[&str], cov: DMatrix<f64>) -> Result<Self> {
        Self::new(names, DVector::zeros(names.len()), cov)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn indices(&self, set: &[&str]) -> Result<Vec<usize>> {
        set.iter()
            .map(|s| match self.names.iter().position(|n| n == s) {
                Some(i) => Ok(i),
                None => domain(format!("no variable named {s}")),
            })
            .collect()
    }

    /// Draw `n` joint samples, one real column per variable.
    pub fn sample(&self, n: usize, rng: RngStream) -> Result<JointSamples> {
        let k = self.names.len();
        // A tiny ridge lets degenerate (PSD) models factor.
        let ridge = 1e-300_f64.max(self.cov.amax() * 1e-15);
        let chol = (&self.cov + DMatrix::identity(k, k) * ridge)
            .cholesky()
            .ok_or_else(|| Error::Domain("covariance does not factor".into()))?;
        let l = chol.l();
        let mut r = rng.rng();
        let mut cols = vec![Vec::with_capacity(n); k];
        let mut z = vec![0.0; k];
        for _ in 0..n {
            for v in z.iter_mut() {
                *v = r.sample(StandardNormal);
            }
            for (i, col) in cols.iter_mut().enumerate() {
                let mut x = self.mean[i];
                for (j, zj) in z.iter().enumerate().take(i + 1) {
                    x += l[(i, j)] * zj;
                }
                col.push(x);
            }
        }
        let mut out = JointSamples::new();
        for (name, col) in self.names.iter().zip(cols) {
            out.push(name, Column::Real(col))?;
        }
        Ok(out)
    }

    fn sub(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.cov[(rows[i], cols[j])])
    }
}

/// Cholesky factor, or `None` when the matrix is numerically singular.
fn factor(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = (0..m.nrows()).map(|i| m[(i, i)]).fold(0.0, f64::max);
    let chol = m.cholesky()?;
    let l = chol.l_dirty();
    (0..l.nrows()).all(|i| l[(i, i)] * l[(i, i)] > 1e-13 * scale).then_some(chol)
}

/// Closed-form `I(A;B|E)` in bits, from the canonical correlations of A and
/// B given E. A singular `E`, `AE` or `BE` block is an error; a singular
/// `ABE` block alone (deterministic dependence) gives `f64::INFINITY`.
/// Results below round-off are reported as 0.
pub fn gaussian_cmi(model: &GaussianModel, a: &[&str], b: &[&str], e: &[&str]) -> Result<f64> {
    let ia = model.indices(a)?;
    let ib = model.indices(b)?;
    let ie = model.indices(e)?;
    if ia.is_empty() || ib.is_empty() {
        return domain("A and B must name at least one variable");
    }
    let singular = |block: &str| Error::SingularBlock { block: block.to_string() };
    let ab: Vec<usize> = ia.iter().chain(&ib).copied().collect();
    // Covariance of (A, B) given E.
    let mut s = model.sub(&ab, &ab);
    if !ie.is_empty() {
        let ce = factor(model.sub(&ie, &ie)).ok_or_else(|| singular("E"))?;
        let cross = model.sub(&ab, &ie);
        s -= &cross * ce.solve(&cross.transpose());
    }
    let (na, nb) = (ia.len(), ib.len());
    let la = factor(s.view((0, 0), (na, na)).into_owned()).ok_or_else(|| singular("AE"))?;
    let lb = factor(s.view((na, na), (nb, nb)).into_owned()).ok_or_else(|| singular("BE"))?;
    let sab = s.view((0, na), (na, nb)).into_owned();
    let la = la.l();
    let lb = lb.l();
    // K = La^-1 S_ab Lb^-T; its singular values are the canonical correlations.
    let left = la.solve_lower_triangular(&sab).expect("triangular factor is invertible");
    let k = lb.solve_lower_triangular(&left.transpose()).expect("triangular factor is invertible").transpose();
    let mut bits = 0.0;
    for rho in k.singular_values().iter() {
        let r2 = rho * rho;
        if r2 >= 1.0 - 1e-12 {
            return Ok(f64::INFINITY);
        }
        bits -= 0.5 * (-r2).ln_1p() / std::f64::consts::LN_2;
    }
    Ok(if bits < 1e-14 { 0.0 } else { bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Shared binary-source surrogate with unit variances everywhere.
    fn surrogate(su: f64, sa: f64, sb: f64, se: f64) -> GaussianModel {
        let s = [sa, sb, se];
        let cov = DMatrix::from_fn(3, 3, |i, j| su * su + if i == j { s[i] * s[i] } else { 0.0 });
        GaussianModel::centered(&["A", "B", "E"], cov).unwrap()
    }

    #[test]
    fn unit_surrogate_value() {
        // Sigma = I + 11^T: det(AE) = det(BE) = 3, det(E) = 2, det(ABE) = 4.
        let v = gaussian_cmi(&surrogate(1.0, 1.0, 1.0, 1.0), &["A"], &["B"], &["E"]).unwrap();
        assert!((v - 0.5 * (9.0f64 / 8.0).log2()).abs() < 1e-14);
    }

    #[test]
    fn samples_follow_covariance() {
        let m = surrogate(1.0, 0.5, 2.0, 1.0);
        let s = m.sample(100_000, RngStream::new(5, 0)).unwrap();
        let col = |n: &str| match s.column(n).unwrap() {
            Column::Real(v) => v.clone(),
            _ => unreachable!(),
        };
        let (a, b) = (col("A"), col("B"));
        let cov = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
        let var = b.iter().map(|y| y * y).sum::<f64>() / b.len() as f64;
        assert!((cov - 1.0).abs() < 0.05, "{cov}");
        assert!((var - 5.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn independent_blocks_give_zero() {
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let m = GaussianModel::centered(&["A", "B", "E"], cov).unwrap();
        assert!(gaussian_cmi(&m, &["A"], &["B"], &["E"]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn singular_blocks() {
        // A = B exactly, E independent.
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let m = GaussianModel::centered(&["A", "B", "E"], cov).unwrap();
        assert_eq!(gaussian_cmi(&m, &["A"], &["B"], &["E"]).unwrap(), f64::INFINITY);
        // A noiseless observer of the common source screens A from B.
        let m = surrogate(1.0, 1.0, 1.0, 0.0);
        assert!(gaussian_cmi(&m, &["A"], &["B"], &["E"]).unwrap() < 1e-14);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let m = GaussianModel::centered(&["A", "E"], cov).unwrap();
        match gaussian_cmi(&m, &["A"], &["A"], &["E"]) {
            Err(Error::SingularBlock { block }) => assert_eq!(block, "E"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianModel::centered(&["A", "B"], cov).is_err());
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GaussianModel::centered(&["A", "B"], cov).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_rescaling(
            su in 0.1f64..3.0, sa in 0.1f64..3.0, sb in 0.1f64..3.0, se in 0.1f64..3.0,
            ka in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
            kb in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
            ke in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        ) {
            let m = surrogate(su, sa, sb, se);
            let base = gaussian_cmi(&m, &["A"], &["B"], &["E"]).unwrap();
            let d = DMatrix::from_diagonal(&DVector::from_vec(vec![ka, kb, ke]));
            let scaled = GaussianModel::centered(&["A", "B", "E"], &d * &m.cov * &d).unwrap();
            let v = gaussian_cmi(&scaled, &["A"], &["B"], &["E"]).unwrap();
            prop_assert!(((v - base) / base).abs() < 1e-10, "{base} {v}");
        }
    }
}
