//! Shared test oracles, kept independent of the library's solver paths.

use nalgebra::DMatrix;
use sdr_core::kernels::{kernel_eval, KernelSpec};
use sdr_core::sampling::{Label, LabeledDataset};

/// Dense projected-gradient solution of the shared-hyperplane dual:
/// maximize `1ᵀᾱ − (η/2)·ᾱᵀDKDᾱ` with per-block balance and box
/// constraints. Projection onto each block's feasible set (box intersected
/// with the balance hyperplane) is computed by bisection on the hyperplane
/// multiplier.
pub struct PgSolution {
    /// Block-major coefficients, `alpha[k*n + i]`.
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub iterations: usize,
}

pub fn pg_solve(
    gram: &DMatrix<f64>,
    y: &[f64],
    taus: &[f64],
    eta: f64,
    max_iterations: usize,
) -> PgSolution {
    let upper: Vec<Vec<f64>> = taus
        .iter()
        .map(|&tau| {
            y.iter()
                .map(|&yi| 0.5 * ((1.0 - 2.0 * tau) * yi + 1.0))
                .collect()
        })
        .collect();
    pg_solve_with_bounds(gram, y, &upper, eta, max_iterations)
}

/// Same dual with caller-supplied per-block box bounds (the classic
/// single-cost formulation uses a unit box).
pub fn pg_solve_with_bounds(
    gram: &DMatrix<f64>,
    y: &[f64],
    upper: &[Vec<f64>],
    eta: f64,
    max_iterations: usize,
) -> PgSolution {
    let n = y.len();
    let m = upper.len();
    // Lipschitz constant of the gradient over the stacked variables:
    // the Hessian is η·(1 1ᵀ ⊗ DKD), so L = η·m·λ_max(K).
    let lambda_max = gram
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |a, &v| a.max(v));
    let step = 1.0 / (eta * m as f64 * lambda_max + 1e-12);

    let mut alpha = vec![0.0f64; n * m];
    let mut iterations = 0;
    for iter in 0..max_iterations {
        iterations = iter + 1;
        let mut alpha_bar = vec![0.0f64; n];
        for k in 0..m {
            for i in 0..n {
                alpha_bar[i] += alpha[k * n + i];
            }
        }
        // Shared gradient: 1 − η·(DKD·ᾱ)_i.
        let mut grad = vec![0.0f64; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += gram[(i, j)] * y[j] * alpha_bar[j];
            }
            grad[i] = 1.0 - eta * y[i] * s;
        }
        let mut max_change = 0.0f64;
        for k in 0..m {
            let z: Vec<f64> = (0..n)
                .map(|i| alpha[k * n + i] + step * grad[i])
                .collect();
            let projected = project_box_hyperplane(&z, y, &upper[k]);
            for i in 0..n {
                max_change = max_change.max((projected[i] - alpha[k * n + i]).abs());
                alpha[k * n + i] = projected[i];
            }
        }
        if iter > 100 && max_change <= 1e-13 {
            break;
        }
    }
    let mut alpha_bar = vec![0.0f64; n];
    for k in 0..m {
        for i in 0..n {
            alpha_bar[i] += alpha[k * n + i];
        }
    }
    PgSolution {
        alpha,
        alpha_bar,
        iterations,
    }
}

/// Euclidean projection of `z` onto `{a : 0 ≤ a ≤ upper, Σ a_i·y_i = 0}` via
/// bisection on the multiplier λ of the balance constraint:
/// `a(λ) = clip(z − λ·y)` and `h(λ) = Σ a_i(λ)·y_i` is nonincreasing.
pub fn project_box_hyperplane(z: &[f64], y: &[f64], upper: &[f64]) -> Vec<f64> {
    let bound = z
        .iter()
        .chain(upper.iter())
        .fold(1.0f64, |a, &v| a.max(v.abs()))
        + 1.0;
    let h = |lambda: f64| -> f64 {
        z.iter()
            .zip(y)
            .zip(upper)
            .map(|((&zi, &yi), &ui)| (zi - lambda * yi).clamp(0.0, ui) * yi)
            .sum()
    };
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    z.iter()
        .zip(y)
        .zip(upper)
        .map(|((&zi, &yi), &ui)| (zi - lambda * yi).clamp(0.0, ui))
        .collect()
}

/// Margin of the oracle solution at a probe point:
/// `w·φ(x) = −η·Σ ᾱ_i·y_i·k(x_i, x)`.
pub fn pg_margin(
    solution: &PgSolution,
    kernel: &KernelSpec,
    eta: f64,
    data: &LabeledDataset,
    x: &[f64],
) -> f64 {
    let mut acc = 0.0;
    for i in 0..data.len() {
        let xi: Vec<f64> = (0..data.dim()).map(|j| data.points()[(i, j)]).collect();
        acc += solution.alpha_bar[i]
            * data.label(i).sign()
            * kernel_eval(kernel, &xi, x).unwrap();
    }
    -eta * acc
}

/// Offset of block `k` recovered from the oracle solution by the margin
/// condition (mean of `w·φ(x_i) + y_i` over free variables); falls back to
/// the feasible-interval midpoint exactly like the production rule.
pub fn pg_bias(
    solution: &PgSolution,
    kernel: &KernelSpec,
    eta: f64,
    data: &LabeledDataset,
    tau: f64,
    block: usize,
    free_tol: f64,
) -> f64 {
    let n = data.len();
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper_bound = f64::INFINITY;
    for i in 0..n {
        let y = data.label(i).sign();
        let u = 0.5 * ((1.0 - 2.0 * tau) * y + 1.0);
        let a = solution.alpha[block * n + i];
        let xi: Vec<f64> = (0..data.dim()).map(|j| data.points()[(i, j)]).collect();
        let v = pg_margin(solution, kernel, eta, data, &xi) + y;
        if a > free_tol && a < u - free_tol {
            free_sum += v;
            free_count += 1;
        } else if a <= free_tol {
            if y > 0.0 {
                lower = lower.max(v);
            } else {
                upper_bound = upper_bound.min(v);
            }
        } else if y > 0.0 {
            upper_bound = upper_bound.min(v);
        } else {
            lower = lower.max(v);
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if lower.is_finite() && upper_bound.is_finite() {
        0.5 * (lower + upper_bound)
    } else if lower.is_finite() {
        lower
    } else {
        upper_bound
    }
}

/// Deterministic mixed-label dataset builders for oracle tests.
pub fn two_blob_dataset(n: usize, d: usize, separation: f64, seed: u64) -> LabeledDataset {
    use sdr_core::exact_sdr::GaussianClassModel;
    use sdr_core::sampling::{sample_mixture, RngSeed};
    let mu_s = nalgebra::DVector::from_element(d, separation);
    let mu_u = nalgebra::DVector::from_element(d, -separation);
    let sigma = nalgebra::DMatrix::identity(d, d);
    let s = GaussianClassModel::new(mu_s, sigma.clone()).unwrap();
    let u = GaussianClassModel::new(mu_u, sigma).unwrap();
    sample_mixture(n, 0.5, &s, &u, RngSeed(seed)).unwrap()
}

/// Ensures a dataset has both labels; oracle instances need feasible blocks.
pub fn force_both_classes(data: &LabeledDataset) -> LabeledDataset {
    if data.count(Label::Safe) > 0 && data.count(Label::Unsafe) > 0 {
        return data.clone();
    }
    let mut labels: Vec<Label> = data.labels().to_vec();
    labels[0] = labels[0].flipped();
    LabeledDataset::new(data.points().clone(), labels).unwrap()
}
