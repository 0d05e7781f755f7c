//! Offset selection: four ways to pick the bias `b` of a trained model so
//! that a chosen error ratio is controlled on fresh data.
//!
//! All four methods work on the margin values `w·φ(x̃) = −η·Σ ᾱᵢyᵢk(xᵢ, x̃)`
//! of a calibration set; the decision rule downstream is
//! `safe ⇔ w·φ(x) − b < 0`.
//!
//! * [`bias_adjustment`] — midpoint between the largest unsafe margin and the
//!   smallest safe margin; the classical recentering for imbalanced data.
//! * [`probabilistic_scaling_bias`] — order-statistic selection: `b` is the
//!   `r`-th smallest margin over unsafe calibration points, with the
//!   discarding parameter `r` chosen from a binomial tail bound so that with
//!   confidence `1 − δ` the probability of an unsafe point landing strictly
//!   inside the safe set is at most `ε`.
//! * [`conformal_bias`] — the same offset reached through conformal scores
//!   `s(x̃, ŷ) = −ŷ·ρ̄(x̃)` on the unsafe class; the upper score quantile at
//!   the matching index coincides with the scaling offset exactly, and the
//!   two implementations are required to agree bit for bit.
//! * [`epsilon_hinge_bias`] — exact minimizer of the one-dimensional
//!   weighted hinge objective in `b`, found by a breakpoint scan.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::PointSet;
use crate::mcsvm::McSvmModel;
use crate::sampling::{Label, LabeledDataset};

/// Which error ratio the hinge objective targets. Bounding false positives
/// swaps the weight `ε ↦ 1−ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTarget {
    FalseNegative,
    FalsePositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    BiasAdjustment,
    ProbabilisticScaling,
    Conformal,
    EpsilonHinge,
}

/// Method-specific diagnostics carried alongside the chosen offset.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CalibrationDiagnostics {
    BiasAdjustment {
        b_unsafe: f64,
        b_safe: f64,
    },
    ProbabilisticScaling {
        r: usize,
        n_unsafe: usize,
        /// True when fewer than `r` unsafe points were available and the
        /// whole space is the only valid safe set (`b = +∞`).
        whole_space: bool,
    },
    Conformal {
        r: usize,
        n_unsafe: usize,
        /// 1-based index of the selected score in ascending order.
        quantile_index: usize,
        whole_space: bool,
    },
    EpsilonHinge {
        breakpoints: usize,
        /// Closed interval of minimizers; endpoints may be infinite.
        interval: (f64, f64),
        half_bounded: bool,
    },
}

/// A single calibrated offset with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub b: f64,
    pub method: CalibrationMethod,
    pub diagnostics: CalibrationDiagnostics,
}

fn margins_by_class(model: &McSvmModel, calib: &LabeledDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    crate::error::check_dim(model.dim(), calib.dim())?;
    let points = PointSet::from_rows(calib.points());
    let mut safe = Vec::new();
    let mut unsafe_ = Vec::new();
    for i in 0..points.len() {
        let margin = model.margin_slice(points.point(i));
        match calib.label(i) {
            Label::Safe => safe.push(margin),
            Label::Unsafe => unsafe_.push(margin),
        }
    }
    Ok((safe, unsafe_))
}

/// Midpoint recentering `b = (bᵁ + bˢ)/2` with `bᵁ` the largest margin over
/// unsafe calibration points and `bˢ` the smallest over safe ones. Requires
/// both classes.
pub fn bias_adjustment(model: &McSvmModel, calib: &LabeledDataset) -> Result<CalibrationResult> {
    let (safe, unsafe_) = margins_by_class(model, calib)?;
    let b_unsafe = unsafe_
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let b_safe = safe.iter().copied().fold(f64::INFINITY, f64::min);
    if unsafe_.is_empty() {
        return Err(Error::MissingClass("unsafe"));
    }
    if safe.is_empty() {
        return Err(Error::MissingClass("safe"));
    }
    Ok(CalibrationResult {
        b: 0.5 * (b_unsafe + b_safe),
        method: CalibrationMethod::BiasAdjustment,
        diagnostics: CalibrationDiagnostics::BiasAdjustment { b_unsafe, b_safe },
    })
}

/// Largest integer `r ∈ [1, n_c]` with `BinomialCdf(r−1; n_c, ε) ≤ δ`.
///
/// The CDF terms are accumulated in log space with compensated summation;
/// the scan stops as soon as the running CDF exceeds `δ`. When even
/// `r = 1` fails the bound (i.e. `(1−ε)^{n_c} > δ`) the calibration set is
/// too small for the requested guarantee.
pub fn discarding_parameter(n_c: usize, epsilon: f64, delta: f64) -> Result<usize> {
    if n_c == 0 {
        return Err(Error::InvalidParameter("n_c must be >= 1".into()));
    }
    crate::error::check_probability("epsilon", epsilon)?;
    crate::error::check_probability("delta", delta)?;
    let n = n_c as f64;
    // ln of the j-th probability mass, updated multiplicatively.
    let mut log_term = n * (1.0 - epsilon).ln();
    let log_odds = (epsilon / (1.0 - epsilon)).ln();
    let mut cdf = 0.0f64;
    let mut compensation = 0.0f64;
    let mut r: usize = 0;
    for j in 0..n_c {
        // Kahan step keeps the tiny leading terms from being absorbed.
        let term = log_term.exp() - compensation;
        let next = cdf + term;
        compensation = (next - cdf) - term;
        cdf = next;
        if cdf > delta {
            break;
        }
        r = j + 1;
        log_term += ((n - j as f64) / (j as f64 + 1.0)).ln() + log_odds;
    }
    if r == 0 {
        return Err(Error::CalibrationTooSmall {
            n_c,
            epsilon,
            delta,
        });
    }
    Ok(r)
}

/// The `r`-th largest element (duplicates counted with multiplicity).
pub fn r_max(values: &[f64], r: usize) -> Result<f64> {
    if r == 0 || r > values.len() {
        return Err(Error::RankOutOfRange {
            rank: r,
            len: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[r - 1])
}

/// Order-statistic offset: `b` is the `r`-th smallest margin over unsafe
/// calibration points (equivalently `−ρ̄_ε` with `ρ̄(x̃) = −w·φ(x̃)` and
/// `ρ̄_ε` their `r`-maximum), with `r` from [`discarding_parameter`] over the
/// full calibration size. At most `r − 1` unsafe calibration points then
/// satisfy `w·φ(x̃) − b < 0`. With fewer than `r` unsafe points the only
/// valid safe set is the whole space: `b = +∞`, flagged in the diagnostics.
pub fn probabilistic_scaling_bias(
    model: &McSvmModel,
    calib: &LabeledDataset,
    epsilon: f64,
    delta: f64,
) -> Result<CalibrationResult> {
    let r = discarding_parameter(calib.len(), epsilon, delta)?;
    let (_, unsafe_margins) = margins_by_class(model, calib)?;
    let n_unsafe = unsafe_margins.len();
    if n_unsafe < r {
        return Ok(CalibrationResult {
            b: f64::INFINITY,
            method: CalibrationMethod::ProbabilisticScaling,
            diagnostics: CalibrationDiagnostics::ProbabilisticScaling {
                r,
                n_unsafe,
                whole_space: true,
            },
        });
    }
    let rho_values: Vec<f64> = unsafe_margins.iter().map(|&m| -m).collect();
    let rho_eps = r_max(&rho_values, r)?;
    Ok(CalibrationResult {
        b: -rho_eps,
        method: CalibrationMethod::ProbabilisticScaling,
        diagnostics: CalibrationDiagnostics::ProbabilisticScaling {
            r,
            n_unsafe,
            whole_space: false,
        },
    })
}

/// Conformal-score route to the same offset: scores `s = ρ̄(x̃) = −w·φ(x̃)`
/// on the unsafe calibration points, upper quantile at ascending index
/// `n_U − r + 1`, negated. Bit-equal to [`probabilistic_scaling_bias`] on
/// identical inputs by construction, but reached through an independent
/// (ascending-sort) code path.
pub fn conformal_bias(
    model: &McSvmModel,
    calib: &LabeledDataset,
    epsilon: f64,
    delta: f64,
) -> Result<CalibrationResult> {
    let r = discarding_parameter(calib.len(), epsilon, delta)?;
    let (_, unsafe_margins) = margins_by_class(model, calib)?;
    let n_unsafe = unsafe_margins.len();
    if n_unsafe == 0 {
        return Err(Error::MissingClass("unsafe"));
    }
    if n_unsafe < r {
        return Ok(CalibrationResult {
            b: f64::INFINITY,
            method: CalibrationMethod::Conformal,
            diagnostics: CalibrationDiagnostics::Conformal {
                r,
                n_unsafe,
                quantile_index: 0,
                whole_space: true,
            },
        });
    }
    let mut scores: Vec<f64> = unsafe_margins.iter().map(|&m| -m).collect();
    scores.sort_by(f64::total_cmp);
    let quantile_index = n_unsafe - r + 1; // 1-based in ascending order
    let q = scores[quantile_index - 1];
    Ok(CalibrationResult {
        b: -q,
        method: CalibrationMethod::Conformal,
        diagnostics: CalibrationDiagnostics::Conformal {
            r,
            n_unsafe,
            quantile_index,
            whole_space: false,
        },
    })
}

/// Exact minimizer of the weighted hinge objective in the offset alone,
///
/// ```text
/// J(b) = Σᵢ cᵢ·max(0, ỹᵢ(w·φ(x̃ᵢ) − b) + 1),    cᵢ = ½((1−2ε̂)ỹᵢ + 1),
/// ```
///
/// with `ε̂ = ε` when bounding false negatives and `ε̂ = 1−ε` for false
/// positives. `J` is convex piecewise-linear with one breakpoint
/// `bᵢ = mᵢ + ỹᵢ` per point, so a scan over the sorted breakpoints finds the
/// minimizer interval exactly: the midpoint is returned for an interior
/// interval, the finite endpoint (flagged) for a half-bounded one.
pub fn epsilon_hinge_bias(
    model: &McSvmModel,
    calib: &LabeledDataset,
    epsilon: f64,
    target: ErrorTarget,
) -> Result<CalibrationResult> {
    crate::error::check_probability("epsilon", epsilon)?;
    crate::error::check_dim(model.dim(), calib.dim())?;
    let eps_eff = match target {
        ErrorTarget::FalseNegative => epsilon,
        ErrorTarget::FalsePositive => 1.0 - epsilon,
    };
    let points = PointSet::from_rows(calib.points());
    let mut breakpoints: Vec<(f64, f64)> = Vec::with_capacity(points.len()); // (b_i, c_i)
    let mut slope = 0.0f64; // slope of J left of every breakpoint
    let mut total_weight = 0.0f64;
    for i in 0..points.len() {
        let y = calib.label(i).sign();
        let margin = model.margin_slice(points.point(i));
        let weight = 0.5 * ((1.0 - 2.0 * eps_eff) * y + 1.0);
        breakpoints.push((margin + y, weight));
        total_weight += weight;
        if y > 0.0 {
            slope -= weight;
        }
    }
    breakpoints.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Crossing a breakpoint raises the subgradient by its weight (a safe
    // term deactivates, an unsafe term activates). Flat segments are judged
    // relative to the total weight.
    let flat_tol = 1e-12 * total_weight.max(1.0);
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    if slope < -flat_tol {
        // Find the breakpoint where the slope stops being negative.
        let mut running = slope;
        for &(b_i, c_i) in &breakpoints {
            running += c_i;
            if running >= -flat_tol {
                lower = b_i;
                break;
            }
        }
    }
    {
        // Find the breakpoint where the slope first becomes positive.
        let mut running = slope;
        for &(b_i, c_i) in &breakpoints {
            if running > flat_tol {
                break;
            }
            running += c_i;
            if running > flat_tol {
                upper = b_i;
            }
        }
        // `upper` stays +∞ when the slope never turns positive.
    }
    // A degenerate scan (slope nonnegative from the start) leaves
    // lower = −∞: J is flat until `upper`.
    if lower.is_infinite() && upper.is_infinite() && !breakpoints.is_empty() {
        // All-flat objective: any b works; pick the first breakpoint.
        lower = breakpoints[0].0;
        upper = breakpoints[0].0;
    }
    let (b, half_bounded) = match (lower.is_finite(), upper.is_finite()) {
        (true, true) => (0.5 * (lower + upper), false),
        (true, false) => (lower, true),
        (false, true) => (upper, true),
        (false, false) => (0.0, true),
    };
    Ok(CalibrationResult {
        b,
        method: CalibrationMethod::EpsilonHinge,
        diagnostics: CalibrationDiagnostics::EpsilonHinge {
            breakpoints: breakpoints.len(),
            interval: (lower, upper),
            half_bounded,
        },
    })
}

/// The hinge objective itself, exposed for optimality checks.
pub fn hinge_objective(
    model: &McSvmModel,
    calib: &LabeledDataset,
    epsilon: f64,
    target: ErrorTarget,
    b: f64,
) -> Result<f64> {
    crate::error::check_probability("epsilon", epsilon)?;
    crate::error::check_dim(model.dim(), calib.dim())?;
    let eps_eff = match target {
        ErrorTarget::FalseNegative => epsilon,
        ErrorTarget::FalsePositive => 1.0 - epsilon,
    };
    let points = PointSet::from_rows(calib.points());
    let mut total = 0.0;
    for i in 0..points.len() {
        let y = calib.label(i).sign();
        let margin = model.margin_slice(points.point(i));
        let weight = 0.5 * ((1.0 - 2.0 * eps_eff) * y + 1.0);
        total += weight * (y * (margin - b) + 1.0).max(0.0);
    }
    Ok(total)
}
