//! Exact safe decision regions for two-class exponential-family data.
//!
//! For class-conditional densities of the form `c⁻¹·exp(−g(x))`, the set of
//! inputs whose posterior probability of the safe class is at least `1 − ε`
//! is the sublevel set `Γ(x) ≤ ρ(p_S, ε)` of the boundary function
//!
//! ```text
//! Γ(x) = (g_S(x) + ln c_S) − (g_U(x) + ln c_U),
//! ρ(p_S, ε) = ln(p_S / (1 − p_S)) + ln(ε / (1 − ε)).
//! ```
//!
//! `Γ` fixes the shape of the region from the two densities alone, while the
//! radius `ρ` selects the level: the class prior `p_S` and the risk level `ε`
//! enter only additively through `ρ`. For Gaussian classes the boundary is a
//! hyperplane, an ellipsoid, or a general quadric depending on how the two
//! covariance matrices relate; [`classify_boundary`] performs that taxonomy.
//!
//! All types are immutable after construction and every operation is pure,
//! so values can be shared freely across threads.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{check_dim, check_probability, Error, Result};

/// One Gaussian class-conditional density `N(μ, Σ)` with its Cholesky factor
/// and log normalizing constant cached at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GaussianModelWire", into = "GaussianModelWire")]
pub struct GaussianClassModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    /// Lower-triangular `L` with `L·Lᵀ = Σ`.
    chol_l: DMatrix<f64>,
    chol_lt: DMatrix<f64>,
    /// `½·ln det(2π·Σ)`.
    log_norm: f64,
}

/// JSON shape of a Gaussian class model: `{"mu": [..], "sigma": [[..], ..]}`.
#[derive(Serialize, Deserialize)]
struct GaussianModelWire {
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

impl TryFrom<GaussianModelWire> for GaussianClassModel {
    type Error = Error;

    fn try_from(wire: GaussianModelWire) -> Result<Self> {
        let d = wire.mu.len();
        let mut sigma = DMatrix::zeros(d, d);
        if wire.sigma.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: wire.sigma.len(),
            });
        }
        for (i, row) in wire.sigma.iter().enumerate() {
            check_dim(d, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                sigma[(i, j)] = v;
            }
        }
        GaussianClassModel::new(DVector::from_vec(wire.mu), sigma)
    }
}

impl From<GaussianClassModel> for GaussianModelWire {
    fn from(model: GaussianClassModel) -> Self {
        let d = model.dim();
        GaussianModelWire {
            mu: model.mu.iter().copied().collect(),
            sigma: (0..d)
                .map(|i| (0..d).map(|j| model.sigma[(i, j)]).collect())
                .collect(),
        }
    }
}

/// Relative symmetry tolerance for covariance inputs.
const SYMMETRY_TOL: f64 = 1e-12;

impl GaussianClassModel {
    /// Builds a class model from a mean and a symmetric positive-definite
    /// covariance. Symmetry is checked to `1e-12` relative to the largest
    /// entry; positive definiteness via the Cholesky factorization itself.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        check_dim(d, sigma.nrows())?;
        check_dim(d, sigma.ncols())?;
        if mu.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        let scale = sigma.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..d {
            for j in (i + 1)..d {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        let chol = nalgebra::Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite)?;
        let chol_l = chol.unpack();
        let chol_lt = chol_l.transpose();
        let log_norm = 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
            + chol_l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            mu,
            sigma,
            chol_l,
            chol_lt,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// `½·ln det(2π·Σ)`, i.e. the log of the density's normalizing constant.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Cached lower-triangular Cholesky factor of Σ.
    pub(crate) fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    /// Solves `Σ·z = v` by two triangular solves against the cached factor.
    fn sigma_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let half = self
            .chol_l
            .solve_lower_triangular(v)
            .expect("Cholesky diagonal is positive");
        self.chol_lt
            .solve_upper_triangular(&half)
            .expect("Cholesky diagonal is positive")
    }

    /// Dense `Σ⁻¹`, for reporting quadric coefficients. Everything else in
    /// this module goes through triangular solves.
    fn sigma_inverse(&self) -> DMatrix<f64> {
        let d = self.dim();
        let linv = self
            .chol_l
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .expect("Cholesky diagonal is positive");
        let inv = linv.transpose() * linv;
        // Symmetrize away the last-ulp asymmetry of the product.
        0.5 * (&inv + inv.transpose())
    }

    /// `μᵀ·Σ⁻¹·μ`-style quadratic form `vᵀ·Σ⁻¹·v` as `‖L⁻¹v‖²`.
    fn inv_quadratic_form(&self, v: &DVector<f64>) -> f64 {
        self.chol_l
            .solve_lower_triangular(v)
            .expect("Cholesky diagonal is positive")
            .norm_squared()
    }
}

/// A class-conditional density `c⁻¹·exp(−g(x))` seen through its exponent
/// and log normalizing constant.
pub trait ClassDensity {
    fn dim(&self) -> usize;

    /// The exponent `g(x)`. Implementations may assume `x.len() == self.dim()`;
    /// the free functions of this module validate dimensions first.
    fn exponent(&self, x: &DVector<f64>) -> f64;

    /// `ln c`, the log normalizing constant.
    fn log_norm(&self) -> f64;
}

impl ClassDensity for GaussianClassModel {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn exponent(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mu;
        let z = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("Cholesky diagonal is positive");
        0.5 * z.norm_squared()
    }

    fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

/// A generic exponential-family class density with a caller-supplied exponent
/// and log normalizing constant. No numeric integration is attempted; the
/// caller owns the constant.
#[derive(Clone)]
pub struct ExponentialClassDensity {
    dim: usize,
    exponent: Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    log_norm: f64,
}

impl ExponentialClassDensity {
    pub fn new(
        dim: usize,
        exponent: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        log_norm: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !log_norm.is_finite() {
            return Err(Error::InvalidParameter(
                "log normalizing constant must be finite".into(),
            ));
        }
        Ok(Self {
            dim,
            exponent: Arc::new(exponent),
            log_norm,
        })
    }
}

impl std::fmt::Debug for ExponentialClassDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExponentialClassDensity")
            .field("dim", &self.dim)
            .field("log_norm", &self.log_norm)
            .finish()
    }
}

impl ClassDensity for ExponentialClassDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn exponent(&self, x: &DVector<f64>) -> f64 {
        (self.exponent)(x)
    }

    fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

/// The radius `ρ(p_S, ε) = ln(p_S/(1−p_S)) + ln(ε/(1−ε))` selecting the
/// sublevel set of `Γ`. Strictly increasing in both arguments; zero at
/// `(½, ½)`. Despite the name it is signed.
pub fn radius(p_s: f64, epsilon: f64) -> Result<f64> {
    Ok(radius_prior(p_s)? + radius_risk(epsilon)?)
}

/// The prior contribution `ρ_{p_S} = ln(p_S/(1−p_S))`.
pub fn radius_prior(p_s: f64) -> Result<f64> {
    check_probability("p_s", p_s)?;
    Ok((p_s / (1.0 - p_s)).ln())
}

/// The risk contribution `ρ_ε = ln(ε/(1−ε))`.
pub fn radius_risk(epsilon: f64) -> Result<f64> {
    check_probability("epsilon", epsilon)?;
    Ok((epsilon / (1.0 - epsilon)).ln())
}

/// A `(p_S, ε)` pair with its derived radius; parameterizes region queries.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SafeRegionSpec {
    p_s: f64,
    epsilon: f64,
    rho_prior: f64,
    rho_risk: f64,
    rho: f64,
}

impl SafeRegionSpec {
    pub fn new(p_s: f64, epsilon: f64) -> Result<Self> {
        let rho_prior = radius_prior(p_s)?;
        let rho_risk = radius_risk(epsilon)?;
        Ok(Self {
            p_s,
            epsilon,
            rho_prior,
            rho_risk,
            rho: rho_prior + rho_risk,
        })
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rho_prior(&self) -> f64 {
        self.rho_prior
    }

    pub fn rho_risk(&self) -> f64 {
        self.rho_risk
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// The boundary function `Γ(x) = (g_S(x) + ln c_S) − (g_U(x) + ln c_U)`.
pub fn gamma_fn<S, U>(model_s: &S, model_u: &U, x: &DVector<f64>) -> Result<f64>
where
    S: ClassDensity + ?Sized,
    U: ClassDensity + ?Sized,
{
    check_dim(model_s.dim(), model_u.dim())?;
    check_dim(model_s.dim(), x.len())?;
    // Grouped so identical densities cancel exactly.
    Ok((model_s.exponent(x) + model_s.log_norm()) - (model_u.exponent(x) + model_u.log_norm()))
}

/// The Gaussian exponent `g(x) = ½(x−μ)ᵀΣ⁻¹(x−μ)`, computed as
/// `½‖L⁻¹(x−μ)‖²` against the cached Cholesky factor.
pub fn gaussian_exponent(model: &GaussianClassModel, x: &DVector<f64>) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    Ok(ClassDensity::exponent(model, x))
}

/// Region membership: `x` is inside iff `Γ(x) ≤ ρ(p_S, ε)` (inclusive).
pub fn sdr_contains<S, U>(
    model_s: &S,
    model_u: &U,
    spec: &SafeRegionSpec,
    x: &DVector<f64>,
) -> Result<bool>
where
    S: ClassDensity + ?Sized,
    U: ClassDensity + ?Sized,
{
    Ok(gamma_fn(model_s, model_u, x)? <= spec.rho())
}

/// The posterior probability of the safe class,
/// `p(S|x) = f(x|S)·p_S / (f(x|S)·p_S + f(x|U)·(1−p_S))`,
/// evaluated in log space as `1 / (1 + exp(Γ(x) − ρ_{p_S}))` so that it never
/// underflows where the individual densities would.
pub fn posterior_safe<S, U>(model_s: &S, model_u: &U, p_s: f64, x: &DVector<f64>) -> Result<f64>
where
    S: ClassDensity + ?Sized,
    U: ClassDensity + ?Sized,
{
    let rho_prior = radius_prior(p_s)?;
    let t = gamma_fn(model_s, model_u, x)? - rho_prior;
    // Stable logistic: 1/(1+e^t) evaluated on the non-overflowing branch.
    Ok(if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    })
}

/// Ellipsoid orientation: negative when the covariance ratio `k` lies in
/// (0, 1), i.e. the region is the *outside* of the ellipsoid for small radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Positive,
    Negative,
}

/// Closed-form shape of the Gaussian region boundary.
///
/// Each variant stores coefficients such that [`BoundaryKind::eval`]
/// reproduces `Γ(x)`; the boundary itself is the level set `Γ(x) = ρ`.
#[derive(Debug, Clone)]
pub enum BoundaryKind {
    /// Both covariances (effectively) equal: `Γ(x) = normalᵀx + offset`.
    Hyperplane { normal: DVector<f64>, offset: f64 },
    /// `Σ_U = k·Σ_S` with `k ≠ 1`:
    /// `Γ(x) = ½(x−center)ᵀ·shape_inv·(x−center) + gamma`.
    Ellipsoid {
        center: DVector<f64>,
        shape_inv: DMatrix<f64>,
        gamma: f64,
        orientation: Orientation,
    },
    /// General case: `Γ(x) = ½xᵀ·quad·x + linearᵀx + offset` with the
    /// eigenvalue sign signature `(n_pos, n_neg, n_zero)` of `quad`.
    Quadric {
        quad: DMatrix<f64>,
        linear: DVector<f64>,
        offset: f64,
        eig_signature: (usize, usize, usize),
    },
}

impl BoundaryKind {
    /// Evaluates the closed-form expression for `Γ` at `x`.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            BoundaryKind::Hyperplane { normal, offset } => normal.dot(x) + offset,
            BoundaryKind::Ellipsoid {
                center,
                shape_inv,
                gamma,
                ..
            } => {
                let diff = x - center;
                0.5 * diff.dot(&(shape_inv * &diff)) + gamma
            }
            BoundaryKind::Quadric {
                quad,
                linear,
                offset,
                ..
            } => 0.5 * x.dot(&(quad * x)) + linear.dot(x) + offset,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BoundaryKind::Hyperplane { .. } => "hyperplane",
            BoundaryKind::Ellipsoid { .. } => "ellipsoid",
            BoundaryKind::Quadric { .. } => "quadric",
        }
    }
}

/// Coefficients `(A, a, b)` with `Γ(x) = ½xᵀAx + aᵀx + b` for two Gaussian
/// classes:
///
/// ```text
/// A = Σ_S⁻¹ − Σ_U⁻¹,
/// a = −(Σ_S⁻¹μ_S − Σ_U⁻¹μ_U),
/// b = ½(μ_Sᵀ Σ_S⁻¹ μ_S − μ_Uᵀ Σ_U⁻¹ μ_U) + ln(c_S/c_U).
/// ```
///
/// The constant carries the overall ½ of the exponent difference; the
/// identity with `Γ` is what the tests pin down.
pub fn quadric_coefficients(
    model_s: &GaussianClassModel,
    model_u: &GaussianClassModel,
) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    check_dim(model_s.dim(), model_u.dim())?;
    let quad = model_s.sigma_inverse() - model_u.sigma_inverse();
    let linear = -(model_s.sigma_solve(model_s.mu()) - model_u.sigma_solve(model_u.mu()));
    let offset = 0.5
        * (model_s.inv_quadratic_form(model_s.mu()) - model_u.inv_quadratic_form(model_u.mu()))
        + (model_s.log_norm() - model_u.log_norm());
    Ok((quad, linear, offset))
}

/// Classifies the boundary of the Gaussian region.
///
/// The scalar-multiple test fits `k` by least squares over the Frobenius
/// inner product, `k = ⟨Σ_S, Σ_U⟩_F / ⟨Σ_S, Σ_S⟩_F`, and declares
/// `Σ_U = k·Σ_S` when `‖Σ_U − kΣ_S‖_F ≤ tol·‖Σ_U‖_F`. With `|k − 1| ≤ tol`
/// the boundary is a hyperplane, with `k ≠ 1` an ellipsoid, otherwise a
/// general quadric whose eigenvalue signature is reported (singular
/// directions show up as `n_zero > 0` rather than as an error).
pub fn classify_boundary(
    model_s: &GaussianClassModel,
    model_u: &GaussianClassModel,
    tol: f64,
) -> Result<BoundaryKind> {
    check_dim(model_s.dim(), model_u.dim())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be > 0".into()));
    }
    let sigma_s = model_s.sigma();
    let sigma_u = model_u.sigma();
    let inner_su: f64 = sigma_s.iter().zip(sigma_u.iter()).map(|(a, b)| a * b).sum();
    let inner_ss: f64 = sigma_s.iter().map(|a| a * a).sum();
    let k = inner_su / inner_ss;
    let residual = (sigma_u - k * sigma_s).norm();
    let scalar_multiple = residual <= tol * sigma_u.norm();

    let log_ratio = model_s.log_norm() - model_u.log_norm();
    if scalar_multiple && (k - 1.0).abs() <= tol {
        let normal = -model_s.sigma_solve(&(model_s.mu() - model_u.mu()));
        let offset = 0.5
            * (model_s.inv_quadratic_form(model_s.mu())
                - model_s.inv_quadratic_form(model_u.mu()))
            + log_ratio;
        return Ok(BoundaryKind::Hyperplane { normal, offset });
    }
    if scalar_multiple {
        let shape_inv = (1.0 - 1.0 / k) * model_s.sigma_inverse();
        let center = (k * model_s.mu() - model_u.mu()) / (k - 1.0);
        let gamma = 0.5
            * (model_s.inv_quadratic_form(model_s.mu())
                - model_u.inv_quadratic_form(model_u.mu())
                - center.dot(&(&shape_inv * &center)))
            + log_ratio;
        let orientation = if k > 0.0 && k < 1.0 {
            Orientation::Negative
        } else {
            Orientation::Positive
        };
        return Ok(BoundaryKind::Ellipsoid {
            center,
            shape_inv,
            gamma,
            orientation,
        });
    }
    let (quad, linear, offset) = quadric_coefficients(model_s, model_u)?;
    let eigenvalues = quad.clone().symmetric_eigenvalues();
    let max_abs = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let zero_cut = tol * max_abs;
    let mut signature = (0usize, 0usize, 0usize);
    for &lambda in eigenvalues.iter() {
        if lambda.abs() <= zero_cut {
            signature.2 += 1;
        } else if lambda > 0.0 {
            signature.0 += 1;
        } else {
            signature.1 += 1;
        }
    }
    Ok(BoundaryKind::Quadric {
        quad,
        linear,
        offset,
        eig_signature: signature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example1_models() -> (GaussianClassModel, GaussianClassModel) {
        let safe = GaussianClassModel::new(
            DVector::from_vec(vec![4.0, 6.0]),
            DMatrix::from_row_slice(2, 2, &[1.3, 0.9, 0.9, 1.3]),
        )
        .unwrap();
        let unsafe_ = GaussianClassModel::new(
            DVector::from_vec(vec![3.0, 8.0]),
            DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 1.4]),
        )
        .unwrap();
        (safe, unsafe_)
    }

    /// Log-density difference computed the naive way: dense inverse, explicit
    /// determinant. Oracle for `gamma_fn` and `gaussian_exponent`.
    fn dense_log_pdf(mu: &DVector<f64>, sigma: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
        let d = mu.len() as f64;
        let inv = sigma.clone().try_inverse().unwrap();
        let det = sigma.determinant();
        let diff = x - mu;
        -0.5 * diff.dot(&(&inv * &diff))
            - 0.5 * (d * (2.0 * std::f64::consts::PI).ln() + det.ln())
    }

    fn grid_points(lo: f64, hi: f64, steps: usize) -> Vec<DVector<f64>> {
        let mut pts = Vec::new();
        for i in 0..steps {
            for j in 0..steps {
                let fx = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
                let fy = lo + (hi - lo) * j as f64 / (steps - 1) as f64;
                pts.push(DVector::from_vec(vec![fx, fy]));
            }
        }
        pts
    }

    #[test]
    fn radius_at_half_half_is_exactly_zero() {
        assert_eq!(radius(0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn radius_symmetric_arguments_cancel() {
        assert!(radius(0.9, 0.1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn radius_direct_value() {
        let r = radius(0.5, 0.05).unwrap();
        assert_abs_diff_eq!(r, (1.0f64 / 19.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn radius_rejects_boundary_arguments() {
        for bad in [0.0, 1.0, -0.2, 1.4, f64::NAN] {
            assert!(radius(bad, 0.5).is_err());
            assert!(radius(0.5, bad).is_err());
        }
    }

    #[test]
    fn radius_decomposes_exactly_on_grid() {
        let levels: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        for &p in &levels {
            for &eps in &levels {
                let full = radius(p, eps).unwrap();
                let split = radius(p, 0.5).unwrap() + radius(0.5, eps).unwrap();
                assert!((full - split).abs() <= 1e-12, "p={p} eps={eps}");
            }
        }
    }

    #[test]
    fn radius_strictly_increasing_in_each_argument() {
        let levels: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        for w in levels.windows(2) {
            assert!(radius(w[1], 0.3).unwrap() > radius(w[0], 0.3).unwrap());
            assert!(radius(0.3, w[1]).unwrap() > radius(0.3, w[0]).unwrap());
        }
    }

    #[test]
    fn exponent_zero_at_mean() {
        let (safe, _) = example1_models();
        assert_eq!(gaussian_exponent(&safe, safe.mu()).unwrap(), 0.0);
    }

    #[test]
    fn exponent_identity_covariance() {
        let model =
            GaussianClassModel::new(DVector::from_vec(vec![1.0, -2.0]), DMatrix::identity(2, 2))
                .unwrap();
        let x = DVector::from_vec(vec![4.0, 2.0]); // displacement (3, 4)
        assert_abs_diff_eq!(gaussian_exponent(&model, &x).unwrap(), 12.5, epsilon = 1e-12);
    }

    #[test]
    fn exponent_matches_dense_inverse_form() {
        let (safe, _) = example1_models();
        // Frozen check at displacement (1, 1): (1,1)ᵀΣ⁻¹(1,1) = 0.8/0.88, so
        // g = 5/11.
        let x = DVector::from_vec(vec![5.0, 7.0]);
        assert_abs_diff_eq!(
            gaussian_exponent(&safe, &x).unwrap(),
            5.0 / 11.0,
            epsilon = 1e-12
        );
        let inv = safe.sigma().clone().try_inverse().unwrap();
        for point in grid_points(0.0, 9.0, 7) {
            let diff = &point - safe.mu();
            let expected = 0.5 * diff.dot(&(&inv * &diff));
            assert_abs_diff_eq!(
                gaussian_exponent(&safe, &point).unwrap(),
                expected,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn gamma_zero_for_identical_densities() {
        let (safe, _) = example1_models();
        for point in grid_points(-3.0, 10.0, 5) {
            assert_eq!(gamma_fn(&safe, &safe, &point).unwrap(), 0.0);
        }
    }

    #[test]
    fn gamma_affine_when_covariances_match() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a = GaussianClassModel::new(DVector::from_vec(vec![1.0, 0.0]), sigma.clone()).unwrap();
        let b = GaussianClassModel::new(DVector::from_vec(vec![-1.0, 2.0]), sigma).unwrap();
        // Second differences along a line vanish for an affine function.
        let dir = DVector::from_vec(vec![0.7, -0.4]);
        let base = DVector::from_vec(vec![0.2, 0.9]);
        let g0 = gamma_fn(&a, &b, &base).unwrap();
        let g1 = gamma_fn(&a, &b, &(&base + &dir)).unwrap();
        let g2 = gamma_fn(&a, &b, &(&base + 2.0 * &dir)).unwrap();
        assert_abs_diff_eq!(g2 - 2.0 * g1 + g0, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn gamma_matches_log_density_oracle() {
        let (safe, unsafe_) = example1_models();
        let x = DVector::from_vec(vec![4.0, 6.0]);
        let expected = dense_log_pdf(unsafe_.mu(), unsafe_.sigma(), &x)
            - dense_log_pdf(safe.mu(), safe.sigma(), &x);
        let gamma = gamma_fn(&safe, &unsafe_, &x).unwrap();
        assert_abs_diff_eq!(gamma, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(gamma, -2.2386447542, epsilon = 1e-9);
        for point in grid_points(0.0, 9.0, 8) {
            let expected = dense_log_pdf(unsafe_.mu(), unsafe_.sigma(), &point)
                - dense_log_pdf(safe.mu(), safe.sigma(), &point);
            assert_abs_diff_eq!(
                gamma_fn(&safe, &unsafe_, &point).unwrap(),
                expected,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn generic_density_agrees_with_gaussian_path() {
        let (safe, unsafe_) = example1_models();
        let mu = safe.mu().clone();
        let inv = safe.sigma().clone().try_inverse().unwrap();
        let generic = ExponentialClassDensity::new(
            2,
            move |x: &DVector<f64>| {
                let diff = x - &mu;
                0.5 * diff.dot(&(&inv * &diff))
            },
            safe.log_norm(),
        )
        .unwrap();
        for point in grid_points(1.0, 8.0, 5) {
            let via_generic = gamma_fn(&generic, &unsafe_, &point).unwrap();
            let via_gaussian = gamma_fn(&safe, &unsafe_, &point).unwrap();
            assert_abs_diff_eq!(via_generic, via_gaussian, epsilon = 1e-10);
        }
    }

    #[test]
    fn contains_everything_for_identical_models_at_half() {
        let (safe, _) = example1_models();
        let spec = SafeRegionSpec::new(0.5, 0.5).unwrap();
        for point in grid_points(-5.0, 12.0, 5) {
            assert!(sdr_contains(&safe, &safe, &spec, &point).unwrap());
        }
    }

    #[test]
    fn contains_nothing_for_identical_models_below_half_risk() {
        let (safe, _) = example1_models();
        let spec = SafeRegionSpec::new(0.5, 0.2).unwrap();
        for point in grid_points(-5.0, 12.0, 5) {
            assert!(!sdr_contains(&safe, &safe, &spec, &point).unwrap());
        }
    }

    #[test]
    fn membership_nests_in_epsilon() {
        let (safe, unsafe_) = example1_models();
        let tight = SafeRegionSpec::new(0.4, 0.05).unwrap();
        let loose = SafeRegionSpec::new(0.4, 0.2).unwrap();
        for point in grid_points(0.0, 9.0, 20) {
            if sdr_contains(&safe, &unsafe_, &tight, &point).unwrap() {
                assert!(sdr_contains(&safe, &unsafe_, &loose, &point).unwrap());
            }
        }
    }

    #[test]
    fn posterior_for_identical_models_is_prior() {
        let (safe, _) = example1_models();
        for p in [0.05, 0.3, 0.5, 0.95] {
            let x = DVector::from_vec(vec![1.0, 2.0]);
            let post = posterior_safe(&safe, &safe, p, &x).unwrap();
            assert_abs_diff_eq!(post, p, epsilon = 1e-14);
        }
    }

    #[test]
    fn posterior_monotone_decreasing_in_gamma() {
        let (safe, unsafe_) = example1_models();
        // Walk from the safe mean toward the unsafe mean and beyond; collect
        // (gamma, posterior) pairs and check order agreement.
        let mut seen: Vec<(f64, f64)> = Vec::new();
        for t in 0..40 {
            let x = safe.mu() + (unsafe_.mu() - safe.mu()) * (t as f64 / 10.0 - 1.0);
            let gamma = gamma_fn(&safe, &unsafe_, &x).unwrap();
            let post = posterior_safe(&safe, &unsafe_, 0.4, &x).unwrap();
            seen.push((gamma, post));
        }
        seen.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in seen.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }

    #[test]
    fn posterior_matches_naive_density_ratio() {
        let (safe, unsafe_) = example1_models();
        for point in grid_points(1.0, 9.0, 8) {
            let fs = dense_log_pdf(safe.mu(), safe.sigma(), &point).exp();
            let fu = dense_log_pdf(unsafe_.mu(), unsafe_.sigma(), &point).exp();
            let p_s = 0.35;
            let naive = fs * p_s / (fs * p_s + fu * (1.0 - p_s));
            let stable = posterior_safe(&safe, &unsafe_, p_s, &point).unwrap();
            assert_abs_diff_eq!(stable, naive, epsilon = 1e-12);
        }
    }

    #[test]
    fn posterior_equivalent_to_membership_off_the_boundary() {
        let (safe, unsafe_) = example1_models();
        let spec = SafeRegionSpec::new(0.5, 0.05).unwrap();
        for point in grid_points(-1.0, 11.0, 100) {
            let gamma = gamma_fn(&safe, &unsafe_, &point).unwrap();
            if (gamma - spec.rho()).abs() <= 1e-9 {
                continue;
            }
            let inside = sdr_contains(&safe, &unsafe_, &spec, &point).unwrap();
            let post = posterior_safe(&safe, &unsafe_, spec.p_s(), &point).unwrap();
            assert_eq!(inside, post >= 1.0 - spec.epsilon(), "at {point:?}");
        }
    }

    #[test]
    fn equal_covariances_classify_as_hyperplane() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.1, 0.4, 0.4, 0.9]);
        let a = GaussianClassModel::new(DVector::from_vec(vec![0.0, 0.0]), sigma.clone()).unwrap();
        let b = GaussianClassModel::new(DVector::from_vec(vec![2.0, -1.0]), sigma).unwrap();
        let kind = classify_boundary(&a, &b, 1e-9).unwrap();
        assert!(matches!(kind, BoundaryKind::Hyperplane { .. }));
        for point in grid_points(-3.0, 3.0, 6) {
            assert_abs_diff_eq!(
                kind.eval(&point),
                gamma_fn(&a, &b, &point).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn scalar_multiple_classifies_as_ellipsoid_with_orientation() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]);
        let a = GaussianClassModel::new(DVector::from_vec(vec![0.5, 0.0]), sigma.clone()).unwrap();
        let doubled =
            GaussianClassModel::new(DVector::from_vec(vec![-0.5, 1.0]), 2.0 * sigma.clone())
                .unwrap();
        let halved =
            GaussianClassModel::new(DVector::from_vec(vec![-0.5, 1.0]), 0.5 * sigma).unwrap();

        let kind = classify_boundary(&a, &doubled, 1e-9).unwrap();
        match &kind {
            BoundaryKind::Ellipsoid { orientation, .. } => {
                assert_eq!(*orientation, Orientation::Positive)
            }
            other => panic!("expected ellipsoid, got {}", other.kind_name()),
        }
        for point in grid_points(-2.0, 2.0, 6) {
            assert_abs_diff_eq!(
                kind.eval(&point),
                gamma_fn(&a, &doubled, &point).unwrap(),
                epsilon = 1e-9
            );
        }

        let kind = classify_boundary(&a, &halved, 1e-9).unwrap();
        match &kind {
            BoundaryKind::Ellipsoid { orientation, .. } => {
                assert_eq!(*orientation, Orientation::Negative)
            }
            other => panic!("expected ellipsoid, got {}", other.kind_name()),
        }
        for point in grid_points(-2.0, 2.0, 6) {
            assert_abs_diff_eq!(
                kind.eval(&point),
                gamma_fn(&a, &halved, &point).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn example1_boundary_is_a_mixed_signature_quadric() {
        let (safe, unsafe_) = example1_models();
        let kind = classify_boundary(&safe, &unsafe_, 1e-9).unwrap();
        match &kind {
            BoundaryKind::Quadric {
                quad,
                eig_signature,
                ..
            } => {
                let expected = [[-0.19, -1.02], [-1.02, 0.76]];
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(
                            (quad[(i, j)] - expected[i][j]).abs() <= 0.01,
                            "A[{i}][{j}] = {}",
                            quad[(i, j)]
                        );
                    }
                }
                assert_eq!(*eig_signature, (1, 1, 0));
            }
            other => panic!("expected quadric, got {}", other.kind_name()),
        }
        for point in grid_points(0.0, 9.0, 8) {
            assert_abs_diff_eq!(
                kind.eval(&point),
                gamma_fn(&safe, &unsafe_, &point).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn quadric_coefficients_vanish_for_identical_models() {
        let (safe, _) = example1_models();
        let (quad, linear, offset) = quadric_coefficients(&safe, &safe).unwrap();
        assert!(quad.iter().all(|v| v.abs() < 1e-12));
        assert!(linear.iter().all(|v| v.abs() < 1e-12));
        assert!(offset.abs() < 1e-12);
    }

    #[test]
    fn quadric_coefficients_reduce_to_affine_for_equal_covariances() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.4, -0.2, -0.2, 0.7]);
        let a = GaussianClassModel::new(DVector::from_vec(vec![1.0, 1.0]), sigma.clone()).unwrap();
        let b = GaussianClassModel::new(DVector::from_vec(vec![-1.0, 0.5]), sigma).unwrap();
        let (quad, linear, offset) = quadric_coefficients(&a, &b).unwrap();
        assert!(quad.iter().all(|v| v.abs() < 1e-12));
        for point in grid_points(-2.0, 2.0, 6) {
            assert_abs_diff_eq!(
                linear.dot(&point) + offset,
                gamma_fn(&a, &b, &point).unwrap(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn quadric_coefficients_reproduce_gamma() {
        let (safe, unsafe_) = example1_models();
        let (quad, linear, offset) = quadric_coefficients(&safe, &unsafe_).unwrap();
        for point in grid_points(-1.0, 10.0, 10) {
            let closed = 0.5 * point.dot(&(&quad * &point)) + linear.dot(&point) + offset;
            assert_abs_diff_eq!(
                closed,
                gamma_fn(&safe, &unsafe_, &point).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn log_norm_matches_determinant() {
        let (safe, _) = example1_models();
        let det = safe.sigma().determinant();
        let expected = 0.5 * ((2.0 * std::f64::consts::PI).powi(2) * det).ln();
        assert_abs_diff_eq!(safe.log_norm(), expected, epsilon = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite_covariances() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(
            GaussianClassModel::new(DVector::zeros(2), asym),
            Err(Error::NotSymmetric)
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianClassModel::new(DVector::zeros(2), indefinite),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let (safe, _) = example1_models();
        let text = serde_json::to_string(&safe).unwrap();
        assert!(text.contains("\"mu\""));
        assert!(text.contains("\"sigma\""));
        let back: GaussianClassModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back.mu(), safe.mu());
        assert_eq!(back.sigma(), safe.sigma());
        let bad = r#"{"mu": [0.0, 0.0], "sigma": [[1.0, 2.0], [2.0, 1.0]]}"#;
        assert!(serde_json::from_str::<GaussianClassModel>(bad).is_err());
    }

    #[test]
    fn dimension_mismatches_are_reported() {
        let (safe, unsafe_) = example1_models();
        let wrong = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(gaussian_exponent(&safe, &wrong).is_err());
        assert!(gamma_fn(&safe, &unsafe_, &wrong).is_err());
        let three = GaussianClassModel::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        assert!(gamma_fn(&safe, &three, &DVector::zeros(2)).is_err());
    }
}
