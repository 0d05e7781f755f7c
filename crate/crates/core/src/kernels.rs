//! Kernel functions and Gram-matrix assembly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Kernel choice for the implicit feature map.
///
/// The quadratic and cubic kernels used by the built-in experiments are the
/// inhomogeneous polynomials `(x·z + 1)ᵈ` (gain 1, offset 1), which include
/// the affine features that curved region boundaries need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(try_from = "KernelSpecWire")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, gain: f64, offset: f64 },
    Rbf { gamma: f64 },
}

/// Unchecked mirror used to validate on deserialization.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum KernelSpecWire {
    Linear,
    Polynomial { degree: u32, gain: f64, offset: f64 },
    Rbf { gamma: f64 },
}

impl TryFrom<KernelSpecWire> for KernelSpec {
    type Error = Error;

    fn try_from(wire: KernelSpecWire) -> Result<Self> {
        let spec = match wire {
            KernelSpecWire::Linear => KernelSpec::Linear,
            KernelSpecWire::Polynomial { degree, gain, offset } => {
                KernelSpec::polynomial(degree, gain, offset)?
            }
            KernelSpecWire::Rbf { gamma } => KernelSpec::rbf(gamma)?,
        };
        Ok(spec)
    }
}

impl KernelSpec {
    pub fn polynomial(degree: u32, gain: f64, offset: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
        }
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(Error::InvalidParameter("polynomial gain must be > 0".into()));
        }
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::InvalidParameter("polynomial offset must be >= 0".into()));
        }
        Ok(KernelSpec::Polynomial { degree, gain, offset })
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter("rbf gamma must be > 0".into()));
        }
        Ok(KernelSpec::Rbf { gamma })
    }

    /// `(x·z + 1)²`.
    pub fn quadratic() -> Self {
        KernelSpec::Polynomial { degree: 2, gain: 1.0, offset: 1.0 }
    }

    /// `(x·z + 1)³`.
    pub fn cubic() -> Self {
        KernelSpec::Polynomial { degree: 3, gain: 1.0, offset: 1.0 }
    }

    /// Kernel value for two points of equal dimension; the hot path, so no
    /// dimension check here (the public [`kernel_eval`] validates).
    pub(crate) fn eval_slices(&self, x: &[f64], z: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), z.len());
        match *self {
            KernelSpec::Linear => dot(x, z),
            KernelSpec::Polynomial { degree, gain, offset } => {
                (gain * dot(x, z) + offset).powi(degree as i32)
            }
            KernelSpec::Rbf { gamma } => {
                let mut dist2 = 0.0;
                for (a, b) in x.iter().zip(z) {
                    let diff = a - b;
                    dist2 += diff * diff;
                }
                (-gamma * dist2).exp()
            }
        }
    }
}

fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// `k(x, z)` with dimension validation.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    check_dim(x.len(), z.len())?;
    Ok(spec.eval_slices(x, z))
}

/// A set of points stored point-contiguously, so row extraction in solver
/// and Gram loops is a plain slice.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PointSet {
    data: Vec<f64>,
    dim: usize,
    len: usize,
}

impl PointSet {
    /// Copies the rows of an `n×d` matrix.
    pub(crate) fn from_rows(points: &DMatrix<f64>) -> Self {
        let (n, d) = (points.nrows(), points.ncols());
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..d {
                data.push(points[(i, j)]);
            }
        }
        Self { data, dim: d, len: n }
    }

    pub(crate) fn from_vecs(points: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        let len = points.len();
        let mut data = Vec::with_capacity(len * dim);
        for p in &points {
            check_dim(dim, p.len())?;
            data.extend_from_slice(p);
        }
        Ok(Self { data, dim, len })
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len, self.dim, &self.data)
    }
}

/// Cross Gram matrix: entry `(i, j) = k(X_i, Z_j)`.
pub fn gram(spec: &KernelSpec, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(x.ncols(), z.ncols())?;
    let xs = PointSet::from_rows(x);
    let zs = PointSet::from_rows(z);
    let mut out = DMatrix::zeros(xs.len(), zs.len());
    for i in 0..xs.len() {
        for j in 0..zs.len() {
            out[(i, j)] = spec.eval_slices(xs.point(i), zs.point(j));
        }
    }
    Ok(out)
}

/// Gram matrix of a point set against itself. The upper triangle is computed
/// once and mirrored, so the result is exactly symmetric.
pub fn gram_self(spec: &KernelSpec, x: &DMatrix<f64>) -> DMatrix<f64> {
    let xs = PointSet::from_rows(x);
    let n = xs.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_slices(xs.point(i), xs.point(j));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_sdr::GaussianClassModel;
    use crate::sampling::{mvn_sample, RngSeed};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn all_specs() -> Vec<KernelSpec> {
        vec![
            KernelSpec::Linear,
            KernelSpec::quadratic(),
            KernelSpec::cubic(),
            KernelSpec::rbf(0.7).unwrap(),
        ]
    }

    #[test]
    fn basic_values() {
        assert_eq!(
            kernel_eval(&KernelSpec::Linear, &[1.0, 1.0], &[1.0, 1.0]).unwrap(),
            2.0
        );
        let ortho = KernelSpec::polynomial(2, 1.0, 0.0).unwrap();
        assert_eq!(kernel_eval(&ortho, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let rbf = KernelSpec::rbf(3.1).unwrap();
        assert_eq!(kernel_eval(&rbf, &[0.4, -0.2], &[0.4, -0.2]).unwrap(), 1.0);
    }

    #[test]
    fn gram_self_is_exactly_symmetric() {
        let model = GaussianClassModel::new(
            DVector::zeros(3),
            nalgebra::DMatrix::identity(3, 3),
        )
        .unwrap();
        let x = mvn_sample(&model, 15, RngSeed(1));
        for spec in all_specs() {
            let k = gram_self(&spec, &x);
            for i in 0..15 {
                for j in 0..15 {
                    assert_eq!(k[(i, j)], k[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn linear_gram_of_identity_rows_is_identity() {
        let x = nalgebra::DMatrix::identity(2, 2);
        let k = gram_self(&KernelSpec::Linear, &x);
        assert_eq!(k, nalgebra::DMatrix::identity(2, 2));
    }

    #[test]
    fn gram_cross_matches_eval() {
        let model = GaussianClassModel::new(
            DVector::zeros(2),
            nalgebra::DMatrix::identity(2, 2),
        )
        .unwrap();
        let x = mvn_sample(&model, 4, RngSeed(2));
        let z = mvn_sample(&model, 3, RngSeed(3));
        for spec in all_specs() {
            let k = gram(&spec, &x, &z).unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    let xi: Vec<f64> = x.row(i).iter().copied().collect();
                    let zj: Vec<f64> = z.row(j).iter().copied().collect();
                    assert_eq!(k[(i, j)], kernel_eval(&spec, &xi, &zj).unwrap());
                }
            }
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        let model = GaussianClassModel::new(
            DVector::zeros(3),
            nalgebra::DMatrix::identity(3, 3),
        )
        .unwrap();
        for trial in 0..50 {
            let n = 5 + (trial % 26);
            let x = mvn_sample(&model, n, RngSeed(100 + trial as u64));
            for spec in all_specs() {
                let k = gram_self(&spec, &x);
                let min_eig = k
                    .symmetric_eigenvalues()
                    .iter()
                    .fold(f64::INFINITY, |a, &v| a.min(v));
                assert!(min_eig >= -1e-8, "{spec:?} trial {trial}: {min_eig}");
            }
        }
    }

    #[test]
    fn cauchy_schwarz_on_random_triples() {
        let model = GaussianClassModel::new(
            DVector::zeros(4),
            nalgebra::DMatrix::identity(4, 4),
        )
        .unwrap();
        let pts = mvn_sample(&model, 60, RngSeed(42));
        let set = PointSet::from_rows(&pts);
        for spec in all_specs() {
            for t in 0..20 {
                let (x, z) = (set.point(t), set.point(59 - t));
                let kxz = spec.eval_slices(x, z);
                let kxx = spec.eval_slices(x, x);
                let kzz = spec.eval_slices(z, z);
                assert!(kxz * kxz <= kxx * kzz * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn serde_round_trip_and_validation() {
        for spec in all_specs() {
            let text = serde_json::to_string(&spec).unwrap();
            let back: KernelSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
        }
        assert!(serde_json::to_string(&KernelSpec::quadratic())
            .unwrap()
            .contains("\"kind\":\"polynomial\""));
        for bad in [
            r#"{"kind":"polynomial","degree":0,"gain":1.0,"offset":1.0}"#,
            r#"{"kind":"polynomial","degree":2,"gain":-1.0,"offset":1.0}"#,
            r#"{"kind":"rbf","gamma":0.0}"#,
        ] {
            assert!(serde_json::from_str::<KernelSpec>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        assert!(kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]).is_err());
    }
}
