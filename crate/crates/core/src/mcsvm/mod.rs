//! Multi-cost SVM: one shared hyperplane across many misclassification-cost
//! weights.
//!
//! Training solves a single coupled dual over `m` cost blocks. Block `k`
//! carries a weight `τ_k ∈ (0, 1)` trading false negatives against false
//! positives; all blocks share the hyperplane direction through the summed
//! coefficients `ᾱ_i = Σ_k α_{i,k}`, while each keeps its own offset `b_k`.
//! The decision function is
//!
//! ```text
//! value(x) = −η·Σ_i ᾱ_i·y_i·k(x_i, x) − b,       safe ⇔ value(x) < 0,
//! ```
//!
//! with ties (exactly zero) classified unsafe. The bias `b` is a free
//! parameter at prediction time; `b_per_tau` holds the per-block offsets
//! recovered from the margin conditions, and the calibration module offers
//! risk-targeted replacements.
//!
//! Trained models are immutable and safe for concurrent prediction.

mod solver;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{check_dim, Error, Result};
use crate::kernels::{KernelSpec, PointSet};
use crate::sampling::{Label, LabeledDataset, RngSeed};

/// Training points with `ᾱ` at or below this weight are dropped from the
/// finished model; they cannot move a decision value.
const SUPPORT_PRUNE_TOL: f64 = 1e-12;

/// Training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kernel: KernelSpec,
    /// Regularization trade-off; larger values weight the margin term less.
    pub eta: f64,
    /// Cost weights, one dual block per entry, each strictly inside (0, 1).
    pub taus: Vec<f64>,
    /// Convergence threshold on the worst per-block optimality violation.
    pub kkt_tol: f64,
    /// Maximum full sweeps over the blocks before giving up.
    pub max_passes: usize,
    /// Seed for the per-sweep block order shuffle (echoed in diagnostics).
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Linear,
            eta: 1e-3,
            taus: vec![0.5],
            kkt_tol: 1e-6,
            max_passes: 1000,
            seed: RngSeed(0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter("eta must be > 0".into()));
        }
        if self.taus.is_empty() {
            return Err(Error::InvalidParameter("taus must be nonempty".into()));
        }
        for &tau in &self.taus {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "tau must lie strictly inside (0, 1), got {tau}"
                )));
            }
        }
        let mut sorted = self.taus.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("taus must be distinct".into()));
        }
        if !(self.kkt_tol > 0.0) || !self.kkt_tol.is_finite() {
            return Err(Error::InvalidParameter("kkt_tol must be > 0".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidParameter("max_passes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Upper box bound `½((1−2τ)·y + 1)` on a dual coefficient: `1−τ` for safe
/// points, `τ` for unsafe ones.
pub fn box_upper(tau: f64, y: Label) -> f64 {
    0.5 * ((1.0 - 2.0 * tau) * y.sign() + 1.0)
}

/// A fitted multi-cost SVM.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelWire", into = "ModelWire")]
pub struct McSvmModel {
    kernel: KernelSpec,
    eta: f64,
    taus: Vec<f64>,
    b_per_tau: Vec<f64>,
    support: PointSet,
    support_y: Vec<Label>,
    /// Per-block coefficients of the retained points, `n_sv × m`.
    alpha: DMatrix<f64>,
    alpha_bar: DVector<f64>,
}

/// Solver-side facts about a training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainDiagnostics {
    pub epochs: usize,
    pub pair_updates: u64,
    pub final_kkt_violation: f64,
    pub converged: bool,
    /// Dual objective after each full sweep; nondecreasing.
    pub dual_objective_by_epoch: Vec<f64>,
    /// Blocks whose balance constraint forces all coefficients to zero
    /// (a class is absent from the training data).
    pub infeasible_blocks: Vec<bool>,
    /// Blocks whose offset came from the bound-interval fallback rather than
    /// free support vectors.
    pub bias_fallback: Vec<bool>,
    /// Block-shuffle seed, echoed for reproducibility.
    pub seed: u64,
}

/// A trained model together with its training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: McSvmModel,
    pub diagnostics: TrainDiagnostics,
}

/// How a per-block offset was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct BiasRecovery {
    pub b: f64,
    /// Number of free support vectors averaged; zero means fallback.
    pub free_count: usize,
    pub fallback: bool,
    /// KKT-feasible interval from bound variables, when the fallback ran
    /// (entries may be infinite on half-bounded sides).
    pub interval: Option<(f64, f64)>,
}

/// Primal and dual objective values of a trained model on its training set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Objectives {
    pub primal: f64,
    pub dual: f64,
    /// `(primal − dual) / (1 + |primal|)`; nonnegative by weak duality.
    pub relative_gap: f64,
}

/// Trains the shared-hyperplane ensemble on a ±1-labeled dataset.
///
/// The returned coefficients satisfy the box and balance constraints of
/// every block to within `kkt_tol`; non-convergence within `max_passes`
/// sweeps is an error that still carries the best iterate. A dataset with a
/// class missing is not an error: every block is then infeasible (all
/// coefficients zero) and flagged in the diagnostics.
pub fn train(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let points = PointSet::from_rows(dataset.points());
    let y: Vec<f64> = dataset.labels().iter().map(|l| l.sign()).collect();
    let state = solver::solve(&points, &y, &config.kernel, config);
    let converged = state.converged;
    let passes = state.epochs;
    let violation = state.final_violation;
    let outcome = finalize(dataset, &points, &y, config, state);
    if converged {
        Ok(outcome)
    } else {
        Err(Error::NonConvergence {
            best: Box::new(outcome),
            passes,
            violation,
        })
    }
}

/// Assembles the pruned model and per-block offsets from a solver state.
fn finalize(
    dataset: &LabeledDataset,
    points: &PointSet,
    y: &[f64],
    config: &TrainConfig,
    state: solver::SolveState,
) -> TrainOutcome {
    let n = points.len();
    let m = config.taus.len();

    // Recompute the per-point sums exactly from the block coefficients.
    let mut alpha_bar = vec![0.0; n];
    for (i, slot) in alpha_bar.iter_mut().enumerate() {
        *slot = (0..m).map(|k| state.alpha[k * n + i]).sum();
    }

    let kept: Vec<usize> = (0..n).filter(|&i| alpha_bar[i] > SUPPORT_PRUNE_TOL).collect();
    let support = PointSet::from_vecs(
        kept.iter().map(|&i| points.point(i).to_vec()).collect(),
        points.dim(),
    )
    .expect("support rows share the training dimension");
    let support_y: Vec<Label> = kept.iter().map(|&i| dataset.label(i)).collect();
    let mut alpha = DMatrix::zeros(kept.len(), m);
    for (row, &i) in kept.iter().enumerate() {
        for k in 0..m {
            alpha[(row, k)] = state.alpha[k * n + i];
        }
    }
    let support_alpha_bar = DVector::from_iterator(kept.len(), kept.iter().map(|&i| alpha_bar[i]));

    let mut model = McSvmModel {
        kernel: config.kernel.clone(),
        eta: config.eta,
        taus: config.taus.clone(),
        b_per_tau: vec![0.0; m],
        support,
        support_y,
        alpha,
        alpha_bar: support_alpha_bar,
    };

    // Margin values of every training point under the pruned hyperplane;
    // offsets for all blocks come from these.
    let margins: Vec<f64> = (0..n).map(|i| model.margin_slice(points.point(i))).collect();
    let mut bias_fallback = vec![false; m];
    for k in 0..m {
        let recovery = bias_from_margins(
            |i| state.alpha[k * n + i],
            y,
            &margins,
            1.0 - config.taus[k],
            config.taus[k],
            config.kkt_tol,
        );
        model.b_per_tau[k] = recovery.b;
        bias_fallback[k] = recovery.fallback;
    }

    TrainOutcome {
        model,
        diagnostics: TrainDiagnostics {
            epochs: state.epochs,
            pair_updates: state.pair_updates,
            final_kkt_violation: state.final_violation,
            converged: state.converged,
            dual_objective_by_epoch: state.objective_by_epoch,
            infeasible_blocks: state.infeasible_blocks,
            bias_fallback,
            seed: config.seed.0,
        },
    }
}

/// Offset for one block from the KKT margin conditions: the mean of
/// `w·φ(x_i) + y_i` over free support vectors enforces
/// `y_i(w·φ(x_i) − b) = −1`; with no free variable the offset falls back to
/// the midpoint of the feasible interval that the bound variables imply
/// (finite endpoint when half-bounded).
fn bias_from_margins(
    alpha_of: impl Fn(usize) -> f64,
    y: &[f64],
    margins: &[f64],
    upper_pos: f64,
    upper_neg: f64,
    free_tol: f64,
) -> BiasRecovery {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..y.len() {
        let bound = if y[i] > 0.0 { upper_pos } else { upper_neg };
        let a = alpha_of(i);
        let v = margins[i] + y[i];
        if a > free_tol && a < bound - free_tol {
            free_sum += v;
            free_count += 1;
        } else if a <= free_tol {
            // Inactive constraint: y(wφ − b) ≤ −1.
            if y[i] > 0.0 {
                lower = lower.max(v);
            } else {
                upper = upper.min(v);
            }
        } else {
            // Saturated constraint: y(wφ − b) ≥ −1.
            if y[i] > 0.0 {
                upper = upper.min(v);
            } else {
                lower = lower.max(v);
            }
        }
    }
    if free_count > 0 {
        BiasRecovery {
            b: free_sum / free_count as f64,
            free_count,
            fallback: false,
            interval: None,
        }
    } else {
        let b = match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        };
        BiasRecovery {
            b,
            free_count: 0,
            fallback: true,
            interval: Some((lower, upper)),
        }
    }
}

/// Recovers the offset of one block from a trained model and its training
/// set.
///
/// Dataset rows are matched to support rows by exact coordinates and label
/// (each support row consumed once); unmatched rows count as zero
/// coefficients, which is exactly what pruning removed. On the training set
/// this reproduces `b_per_tau[block]` bit for bit.
pub fn recover_bias(
    model: &McSvmModel,
    dataset: &LabeledDataset,
    block: usize,
) -> Result<BiasRecovery> {
    if block >= model.taus.len() {
        return Err(Error::BlockOutOfRange {
            block,
            blocks: model.taus.len(),
        });
    }
    check_dim(model.dim(), dataset.dim())?;
    let points = PointSet::from_rows(dataset.points());
    let n = points.len();

    let mut support_lookup: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for i in (0..model.n_support()).rev() {
        support_lookup
            .entry(point_key(model.support.point(i), model.support_y[i]))
            .or_default()
            .push(i);
    }
    let mut alpha_col = vec![0.0; n];
    for i in 0..n {
        if let Some(rows) = support_lookup.get_mut(&point_key(points.point(i), dataset.label(i))) {
            if let Some(row) = rows.pop() {
                alpha_col[i] = model.alpha[(row, block)];
            }
        }
    }

    let y: Vec<f64> = dataset.labels().iter().map(|l| l.sign()).collect();
    let margins: Vec<f64> = (0..n).map(|i| model.margin_slice(points.point(i))).collect();
    Ok(bias_from_margins(
        |i| alpha_col[i],
        &y,
        &margins,
        1.0 - model.taus[block],
        model.taus[block],
        model_free_tol(model),
    ))
}

fn model_free_tol(_model: &McSvmModel) -> f64 {
    // The training default; models do not record their kkt_tol.
    1e-6
}

fn point_key(coords: &[f64], label: Label) -> Vec<u64> {
    let mut key: Vec<u64> = coords.iter().map(|v| v.to_bits()).collect();
    key.push(label.sign().to_bits());
    key
}

impl McSvmModel {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn b_per_tau(&self) -> &[f64] {
        &self.b_per_tau
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Retained training points as an `n_sv × d` matrix.
    pub fn support_points(&self) -> DMatrix<f64> {
        self.support.to_matrix()
    }

    pub fn support_labels(&self) -> &[Label] {
        &self.support_y
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn alpha_bar(&self) -> &DVector<f64> {
        &self.alpha_bar
    }

    /// `w·φ(x) = −η·Σ_i ᾱ_i·y_i·k(x_i, x)`, the decision value before any
    /// offset.
    pub fn margin(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.margin_slice(x.as_slice()))
    }

    pub(crate) fn margin_slice(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.support.len() {
            acc += self.alpha_bar[i]
                * self.support_y[i].sign()
                * self.kernel.eval_slices(self.support.point(i), x);
        }
        -self.eta * acc
    }

    /// `w·φ(x) − b`.
    pub fn decision_value(&self, x: &DVector<f64>, b: f64) -> Result<f64> {
        Ok(self.margin(x)? - b)
    }

    /// Safe iff the decision value is strictly negative; a value of exactly
    /// zero is classified unsafe.
    pub fn predict(&self, x: &DVector<f64>, b: f64) -> Result<Label> {
        Ok(if self.decision_value(x, b)? < 0.0 {
            Label::Safe
        } else {
            Label::Unsafe
        })
    }

    /// Dual objective `1ᵀᾱ − (η/2)·ᾱᵀDKDᾱ` over the retained points.
    pub fn dual_objective(&self) -> f64 {
        let n = self.n_support();
        let linear: f64 = self.alpha_bar.iter().sum();
        let mut quad = 0.0;
        for i in 0..n {
            let mut s_i = 0.0;
            for j in 0..n {
                s_i += self.kernel.eval_slices(self.support.point(i), self.support.point(j))
                    * self.support_y[j].sign()
                    * self.alpha_bar[j];
            }
            quad += self.alpha_bar[i] * self.support_y[i].sign() * s_i;
        }
        linear - 0.5 * self.eta * quad
    }

    /// Primal objective `wᵀw/(2η) + Σ_k Σ_i U_{i,k}·ξ_{i,k}` with the hinge
    /// slacks `ξ_{i,k} = max(0, y_i(w·φ(x_i) − b_k) + 1)` evaluated on the
    /// given dataset and the recovered offsets.
    pub fn primal_objective(&self, dataset: &LabeledDataset) -> Result<f64> {
        check_dim(self.dim(), dataset.dim())?;
        let ww = w_inner_product(self, self)?;
        let points = PointSet::from_rows(dataset.points());
        let mut hinge = 0.0;
        for i in 0..points.len() {
            let margin = self.margin_slice(points.point(i));
            let y = dataset.label(i).sign();
            for (k, &tau) in self.taus.iter().enumerate() {
                let xi = (y * (margin - self.b_per_tau[k]) + 1.0).max(0.0);
                hinge += box_upper(tau, dataset.label(i)) * xi;
            }
        }
        Ok(ww / (2.0 * self.eta) + hinge)
    }

    /// Primal/dual pair with the relative duality gap.
    pub fn objectives(&self, dataset: &LabeledDataset) -> Result<Objectives> {
        let primal = self.primal_objective(dataset)?;
        let dual = self.dual_objective();
        Ok(Objectives {
            primal,
            dual,
            relative_gap: (primal - dual) / (1.0 + primal.abs()),
        })
    }

    pub fn write_json_path<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read_json_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Exact feature-space inner product of two hyperplanes sharing a kernel:
/// `w_a·w_b = η_a·η_b·Σ_{i,j} ᾱᵢᵃ ᾱⱼᵇ yᵢᵃ yⱼᵇ k(xᵢᵃ, xⱼᵇ)`.
///
/// The accumulation order is canonicalized over the two operands, so the
/// result is exactly symmetric in its arguments.
pub fn w_inner_product(a: &McSvmModel, b: &McSvmModel) -> Result<f64> {
    if a.kernel != b.kernel {
        return Err(Error::KernelMismatch);
    }
    check_dim(a.dim(), b.dim())?;
    let (first, second) = if canonical_order_swapped(a, b) { (b, a) } else { (a, b) };
    let mut total = 0.0;
    for i in 0..first.n_support() {
        let xi = first.support.point(i);
        let ci = first.alpha_bar[i] * first.support_y[i].sign();
        let mut inner = 0.0;
        for j in 0..second.n_support() {
            inner += second.alpha_bar[j]
                * second.support_y[j].sign()
                * first.kernel.eval_slices(xi, second.support.point(j));
        }
        total += ci * inner;
    }
    Ok(a.eta * b.eta * total)
}

/// Content-based operand ordering for [`w_inner_product`].
fn canonical_order_swapped(a: &McSvmModel, b: &McSvmModel) -> bool {
    use std::cmp::Ordering;
    let by_len = a.n_support().cmp(&b.n_support());
    if by_len != Ordering::Equal {
        return by_len == Ordering::Greater;
    }
    for i in 0..a.n_support() {
        for (va, vb) in a.support.point(i).iter().zip(b.support.point(i)) {
            match va.total_cmp(vb) {
                Ordering::Equal => {}
                other => return other == Ordering::Greater,
            }
        }
        match a.alpha_bar[i].total_cmp(&b.alpha_bar[i]) {
            Ordering::Equal => {}
            other => return other == Ordering::Greater,
        }
    }
    false
}

/// On-disk model schema.
#[derive(Serialize, Deserialize)]
struct ModelWire {
    version: u32,
    kernel: KernelSpec,
    eta: f64,
    taus: Vec<f64>,
    b_per_tau: Vec<f64>,
    dim: usize,
    support: Vec<SupportWire>,
}

#[derive(Serialize, Deserialize)]
struct SupportWire {
    x: Vec<f64>,
    y: Label,
    alpha_bar: f64,
    alpha_row: Vec<f64>,
}

const MODEL_FILE_VERSION: u32 = 1;

impl From<McSvmModel> for ModelWire {
    fn from(model: McSvmModel) -> Self {
        let support = (0..model.n_support())
            .map(|i| SupportWire {
                x: model.support.point(i).to_vec(),
                y: model.support_y[i],
                alpha_bar: model.alpha_bar[i],
                alpha_row: (0..model.taus.len()).map(|k| model.alpha[(i, k)]).collect(),
            })
            .collect();
        ModelWire {
            version: MODEL_FILE_VERSION,
            kernel: model.kernel,
            eta: model.eta,
            taus: model.taus,
            b_per_tau: model.b_per_tau,
            dim: model.support.dim(),
            support,
        }
    }
}

impl TryFrom<ModelWire> for McSvmModel {
    type Error = Error;

    fn try_from(wire: ModelWire) -> Result<Self> {
        if wire.version != MODEL_FILE_VERSION {
            return Err(Error::UnsupportedVersion(wire.version));
        }
        let m = wire.taus.len();
        if m == 0 {
            return Err(Error::InvalidParameter("taus must be nonempty".into()));
        }
        check_dim(m, wire.b_per_tau.len())?;
        if wire.dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        if !(wire.eta > 0.0) || !wire.eta.is_finite() {
            return Err(Error::InvalidParameter("eta must be > 0".into()));
        }
        let n_sv = wire.support.len();
        let mut alpha = DMatrix::zeros(n_sv, m);
        let mut alpha_bar = DVector::zeros(n_sv);
        let mut support_y = Vec::with_capacity(n_sv);
        let mut rows = Vec::with_capacity(n_sv);
        for (i, entry) in wire.support.into_iter().enumerate() {
            check_dim(wire.dim, entry.x.len())?;
            check_dim(m, entry.alpha_row.len())?;
            let row_sum: f64 = entry.alpha_row.iter().sum();
            if (row_sum - entry.alpha_bar).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "support {i}: alpha_bar {} does not match row sum {row_sum}",
                    entry.alpha_bar
                )));
            }
            for (k, &v) in entry.alpha_row.iter().enumerate() {
                alpha[(i, k)] = v;
            }
            alpha_bar[i] = entry.alpha_bar;
            support_y.push(entry.y);
            rows.push(entry.x);
        }
        Ok(McSvmModel {
            kernel: wire.kernel,
            eta: wire.eta,
            taus: wire.taus,
            b_per_tau: wire.b_per_tau,
            support: PointSet::from_vecs(rows, wire.dim)?,
            support_y,
            alpha,
            alpha_bar,
        })
    }
}
