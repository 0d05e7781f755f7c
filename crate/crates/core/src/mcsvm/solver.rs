//! Blockwise pairwise-update solver for the shared-hyperplane dual.
//!
//! The dual maximizes `1ᵀᾱ − (η/2)·ᾱᵀDKDᾱ` where `ᾱ_i = Σ_k α_{i,k}` and each
//! cost block `k` constrains its own coefficients by `Σ_i α_{i,k}·y_i = 0`
//! and `0 ≤ α_{i,k} ≤ ½((1−2τ_k)y_i + 1)`. Because the objective depends on
//! the blocks only through `ᾱ`, a pairwise transfer inside one block is the
//! natural feasible move: `α_{i,k} += y_i·δ`, `α_{j,k} −= y_j·δ` keeps the
//! block balance for any `δ`.
//!
//! Optimality of a block is measured on the maximally violating pair: the
//! largest `G_i` over the up-movable set against the smallest `G_j` over the
//! down-movable set, where `G_i = y_i − η·s_i` and `s = KDᾱ` (ties broken by
//! lowest index). The pair actually updated is chosen by expected gain: with
//! both extremes as anchors, the partner maximizing
//! `(G_i − G_j)² / (2η·κ_ij)` wins, where `κ_ij = K_ii + K_jj − 2K_ij` is
//! the curvature of the transfer direction. First-order selection stalls
//! badly on ill-conditioned Gram matrices (high-degree polynomial kernels);
//! gain-based selection needs the anchor rows that the update computes
//! anyway. The one-dimensional subproblem is then solved exactly: step
//! `(G_i − G_j) / (η·κ)` clipped to the box, vanishing-curvature pairs
//! moving straight to the box edge. Every step increases the dual
//! objective, which is recorded once per epoch. The two anchor scans and
//! tie-breaks are mirror images of each other, so relabeling classes and
//! mirroring the cost weights replays the solve exactly.
//!
//! Because every block sees the same gradient, pure block-coordinate ascent
//! shuttles weight between blocks one sweep at a time and converges slowly
//! when many cost weights interact. Two accelerators keep the epoch count
//! down, both of them plain feasible ascent steps:
//!
//! * a compound phase opening each epoch: one transfer direction `(i, j)`
//!   chosen on the union of the blocks' movable sets and applied in every
//!   block at once, each block contributing as much of the step as its own
//!   box allows (a stack of per-block feasible transfers, so block balance
//!   is never disturbed);
//! * a refinement step closing each epoch: the dual restricted to the
//!   currently free coefficients is an equality-constrained quadratic, so
//!   its exact maximizer is one linear solve away. The move toward it is
//!   clipped at the first box face it hits; along that segment the
//!   objective is concave and ends no lower than it starts, so the step is
//!   monotone like every other. This is what collapses the long
//!   mass-shuttling tails that pairwise exchanges alone crawl through on
//!   ill-conditioned kernels.
//!
//! Blocks are visited in an order reshuffled each epoch from the config
//! seed; the whole solve is single-threaded and deterministic.

use crate::kernels::{KernelSpec, PointSet};
use crate::mcsvm::TrainConfig;
use crate::sampling::MixtureStream;

/// Points at or beyond this distance from a box face count as movable.
const BOUND_EPS: f64 = 1e-12;
/// Curvature below this is treated as zero (step to the box edge).
const ZERO_CURVATURE: f64 = 1e-12;
/// Largest point count for which the full Gram matrix is precomputed
/// (2048² doubles = 32 MiB); larger problems compute rows on demand.
const DENSE_GRAM_LIMIT: usize = 2048;
/// Cap on pair updates per block visit; progress beyond this waits for the
/// next sweep so no single block can starve the others.
fn inner_cap(n: usize) -> u64 {
    16 * n as u64 + 64
}
/// Free variables beyond this count skip the refinement solve for that
/// epoch; the cubic solve cost would outweigh the sweeps it saves.
const REFINE_MAX_FREE: usize = 1200;
/// Multiple of `kkt_tol` (floored at `BOUND_EPS`) separating "free" from
/// "at bound" when collecting the refinement subspace.
const REFINE_FREE_MARGIN: f64 = 1e-2;
/// Active-set walk length per epoch: each truncated refinement pins at
/// least one coefficient, so a short walk usually ends with a full step.
const REFINE_ROUNDS: usize = 25;
/// Relative singular-value cutoff of the saddle-system pseudo-inverse.
const REFINE_SVD_CUTOFF: f64 = 1e-10;

pub(crate) struct SolveState {
    /// Block-major coefficients: `alpha[k*n + i]`.
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    /// `s = K·D·ᾱ`, maintained incrementally.
    pub s: Vec<f64>,
    pub epochs: usize,
    pub pair_updates: u64,
    pub final_violation: f64,
    pub objective_by_epoch: Vec<f64>,
    pub infeasible_blocks: Vec<bool>,
    pub converged: bool,
}

/// Gram rows, either from a precomputed dense matrix or recomputed on demand
/// into two scratch buffers.
struct Gram<'a> {
    dense: Option<Vec<f64>>,
    points: &'a PointSet,
    kernel: &'a KernelSpec,
    n: usize,
    buf_i: Vec<f64>,
    key_i: usize,
    buf_j: Vec<f64>,
    key_j: usize,
}

impl<'a> Gram<'a> {
    fn new(points: &'a PointSet, kernel: &'a KernelSpec) -> Self {
        let n = points.len();
        let dense = (n <= DENSE_GRAM_LIMIT).then(|| {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel.eval_slices(points.point(i), points.point(j));
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        });
        Self {
            dense,
            points,
            kernel,
            n,
            buf_i: vec![0.0; n],
            key_i: usize::MAX,
            buf_j: vec![0.0; n],
            key_j: usize::MAX,
        }
    }

    fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        if let Some(dense) = &self.dense {
            return (
                &dense[i * self.n..(i + 1) * self.n],
                &dense[j * self.n..(j + 1) * self.n],
            );
        }
        if self.key_i != i {
            fill_row(self.points, self.kernel, i, &mut self.buf_i);
            self.key_i = i;
        }
        if self.key_j != j {
            fill_row(self.points, self.kernel, j, &mut self.buf_j);
            self.key_j = j;
        }
        (&self.buf_i, &self.buf_j)
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if let Some(dense) = &self.dense {
            return &dense[i * self.n..(i + 1) * self.n];
        }
        if self.key_i != i {
            fill_row(self.points, self.kernel, i, &mut self.buf_i);
            self.key_i = i;
        }
        &self.buf_i
    }

    fn entry(&mut self, i: usize, j: usize) -> f64 {
        if let Some(dense) = &self.dense {
            return dense[i * self.n + j];
        }
        self.kernel.eval_slices(self.points.point(i), self.points.point(j))
    }
}

fn fill_row(points: &PointSet, kernel: &KernelSpec, i: usize, out: &mut [f64]) {
    let xi = points.point(i);
    for (l, slot) in out.iter_mut().enumerate() {
        *slot = kernel.eval_slices(xi, points.point(l));
    }
}

struct BlockView<'a> {
    alpha: &'a [f64],
    y: &'a [f64],
    s: &'a [f64],
    eta: f64,
    upper_pos: f64,
    upper_neg: f64,
}

impl BlockView<'_> {
    fn upper(&self, i: usize) -> f64 {
        if self.y[i] > 0.0 {
            self.upper_pos
        } else {
            self.upper_neg
        }
    }

    fn gradient(&self, i: usize) -> f64 {
        self.y[i] - self.eta * self.s[i]
    }

    /// Room to move index `i` in the "up" transfer direction `+y_i`.
    fn room_up(&self, i: usize) -> f64 {
        if self.y[i] > 0.0 {
            self.upper(i) - self.alpha[i]
        } else {
            self.alpha[i]
        }
    }

    /// Room to move index `j` in the "down" transfer direction `−y_j`.
    fn room_down(&self, j: usize) -> f64 {
        if self.y[j] > 0.0 {
            self.alpha[j]
        } else {
            self.upper(j) - self.alpha[j]
        }
    }

    /// Maximally violating pair: `argmax G` over up-movable indices against
    /// `argmin G` over down-movable ones, lowest index on ties. `None` when
    /// the block admits no ascent at all.
    fn select(&self) -> Option<(usize, usize, f64)> {
        let mut best_up: Option<(f64, usize)> = None;
        let mut best_down: Option<(f64, usize)> = None;
        for i in 0..self.y.len() {
            let g = self.gradient(i);
            if self.room_up(i) > BOUND_EPS && best_up.is_none_or(|(bg, _)| g > bg) {
                best_up = Some((g, i));
            }
            if self.room_down(i) > BOUND_EPS && best_down.is_none_or(|(bg, _)| g < bg) {
                best_down = Some((g, i));
            }
        }
        let ((g_up, i), (g_down, j)) = (best_up?, best_down?);
        let violation = g_up - g_down;
        (violation > 0.0 && i != j).then_some((i, j, violation))
    }
}

pub(crate) fn solve(
    points: &PointSet,
    y: &[f64],
    kernel: &KernelSpec,
    config: &TrainConfig,
) -> SolveState {
    let n = points.len();
    let m = config.taus.len();
    let eta = config.eta;

    let has_pos = y.iter().any(|&v| v > 0.0);
    let has_neg = y.iter().any(|&v| v < 0.0);
    let mut state = SolveState {
        alpha: vec![0.0; n * m],
        alpha_bar: vec![0.0; n],
        s: vec![0.0; n],
        epochs: 0,
        pair_updates: 0,
        final_violation: 0.0,
        objective_by_epoch: Vec::new(),
        infeasible_blocks: vec![!(has_pos && has_neg); m],
        converged: true,
    };
    if !(has_pos && has_neg) {
        // The per-block balance constraint pins every coefficient at zero.
        return state;
    }

    let upper: Vec<(f64, f64)> = config
        .taus
        .iter()
        .map(|&tau| (1.0 - tau, tau))
        .collect();
    let mut gram = Gram::new(points, kernel);
    let diag: Vec<f64> = (0..n)
        .map(|i| kernel.eval_slices(points.point(i), points.point(i)))
        .collect();
    let mut shuffle = MixtureStream::new(config.seed);
    let cap = inner_cap(n);

    state.converged = false;
    for _pass in 0..config.max_passes {
        compound_phase(n, m, eta, &upper, y, &diag, &mut gram, &mut state, config.kkt_tol, cap);
        let order = shuffle.shuffled_indices(m);
        for &k in &order {
            optimize_block(k, n, eta, &upper, y, &diag, &mut gram, &mut state, config.kkt_tol, cap);
        }
        // Walk the active set: each truncated refine pins at least one
        // coefficient to a box face; a full step means the free-subspace
        // optimum was reached.
        for _ in 0..REFINE_ROUNDS {
            match refine_free_subspace(n, m, eta, &upper, y, &mut gram, &mut state, config.kkt_tol)
            {
                Some(t) if t < 1.0 => continue,
                _ => break,
            }
        }
        state.epochs += 1;
        state
            .objective_by_epoch
            .push(dual_objective_from_state(eta, y, &state.alpha_bar, &state.s));

        let mut violation = 0.0f64;
        for k in 0..m {
            let view = BlockView {
                alpha: &state.alpha[k * n..(k + 1) * n],
                y,
                s: &state.s,
                eta,
                upper_pos: upper[k].0,
                upper_neg: upper[k].1,
            };
            if let Some((i, j, v)) = view.select() {
                if std::env::var_os("SDR_SOLVER_TRACE").is_some() && state.epochs % 100 == 0 {
                    eprintln!(
                        "epoch {} block {k}: viol {v:.3e} pair ({i},{j}) a_i {:.3e} a_j {:.3e} room_up {:.3e} room_down {:.3e}",
                        state.epochs,
                        state.alpha[k * n + i],
                        state.alpha[k * n + j],
                        view.room_up(i),
                        view.room_down(j),
                    );
                }
                violation = violation.max(v);
            }
        }
        state.final_violation = violation;
        if violation <= config.kkt_tol {
            state.converged = true;
            break;
        }
    }
    state
}

/// One exact ascent step on the free subspace.
///
/// With the bound coefficients frozen, the dual restricted to the free ones
/// is an equality-constrained concave quadratic, so its maximizer solves the
/// saddle system
///
/// ```text
/// [ η·H   C ] [ z ]   [ r ]      H_{ab} = y_a·y_b·K_{i_a,i_b},
/// [ Cᵀ    0 ] [ ν ] = [ 0 ],     r_a = 1 − η·y_{i_a}·s_{i_a},
/// ```
///
/// where `C` holds one balance column `y` per block that has free
/// coefficients. `H` is rank-deficient whenever free directions overlap
/// across blocks, so the system is solved by an SVD pseudo-inverse with a
/// relative cutoff: the minimum-norm solution carries no null-space junk
/// that the box would immediately truncate. Constraint columns are sign-
/// normalized (first entry positive), which changes nothing mathematically
/// but makes relabeled mirror problems assemble the identical system.
///
/// The move toward `α + z` is truncated at the first box face it touches;
/// along that segment the objective is concave and no lower at the far end,
/// so the step never decreases it. Returns the applied fraction of the step,
/// `None` when nothing moved.
#[allow(clippy::too_many_arguments)]
fn refine_free_subspace(
    n: usize,
    m: usize,
    eta: f64,
    upper: &[(f64, f64)],
    y: &[f64],
    gram: &mut Gram<'_>,
    state: &mut SolveState,
    kkt_tol: f64,
) -> Option<f64> {
    let free_margin = (REFINE_FREE_MARGIN * kkt_tol).max(BOUND_EPS);
    // Free coefficients, block-major, and per-block membership counts.
    let mut free: Vec<(usize, usize)> = Vec::new(); // (i, k)
    for k in 0..m {
        if state.infeasible_blocks[k] {
            continue;
        }
        for i in 0..n {
            let bound = if y[i] > 0.0 { upper[k].0 } else { upper[k].1 };
            let a = state.alpha[k * n + i];
            if a > free_margin && a < bound - free_margin {
                free.push((i, k));
            }
        }
    }
    let f = free.len();
    if f < 2 || f > REFINE_MAX_FREE {
        return None;
    }
    // `free` is block-major, so the block list is already sorted.
    let mut active_blocks: Vec<usize> = free.iter().map(|&(_, k)| k).collect();
    active_blocks.dedup();
    let block_column: Vec<usize> = (0..m)
        .map(|k| active_blocks.iter().position(|&b| b == k).unwrap_or(usize::MAX))
        .collect();
    // Sign that makes each block's constraint column start positive.
    let mut column_sign = vec![1.0f64; m];
    for &(i, k) in free.iter().rev() {
        column_sign[k] = y[i];
    }
    let dim = f + active_blocks.len();

    // Sub-Gram over the distinct free points.
    let mut unique_points: Vec<usize> = free.iter().map(|&(i, _)| i).collect();
    unique_points.sort_unstable();
    unique_points.dedup();
    let point_slot: std::collections::HashMap<usize, usize> = unique_points
        .iter()
        .enumerate()
        .map(|(slot, &i)| (i, slot))
        .collect();
    let u = unique_points.len();
    let mut sub_gram = vec![0.0f64; u * u];
    for a in 0..u {
        for b in a..u {
            let v = gram.entry(unique_points[a], unique_points[b]);
            sub_gram[a * u + b] = v;
            sub_gram[b * u + a] = v;
        }
    }

    let mut system = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for a in 0..f {
        let (ia, _) = free[a];
        let sa = point_slot[&ia];
        for b in 0..f {
            let (ib, _) = free[b];
            let value = eta * y[ia] * y[ib] * sub_gram[sa * u + point_slot[&ib]];
            system[(a, b)] = value;
        }
    }
    for (a, &(ia, k)) in free.iter().enumerate() {
        let col = f + block_column[k];
        let entry = column_sign[k] * y[ia]; // first free entry of each column is +1
        system[(a, col)] = entry;
        system[(col, a)] = entry;
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    for (a, &(ia, _)) in free.iter().enumerate() {
        rhs[a] = 1.0 - eta * y[ia] * state.s[ia];
    }

    let svd = system.svd(true, true);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |acc, &v| acc.max(v));
    if sigma_max <= 0.0 {
        return None;
    }
    let Ok(solution) = svd.solve(&rhs, REFINE_SVD_CUTOFF * sigma_max) else {
        return None;
    };
    if solution.iter().any(|v| !v.is_finite()) {
        return None;
    }

    // Truncate at the first box face along the segment.
    let mut t = 1.0f64;
    for (a, &(ia, k)) in free.iter().enumerate() {
        let z = solution[a];
        let alpha = state.alpha[k * n + ia];
        let bound = if y[ia] > 0.0 { upper[k].0 } else { upper[k].1 };
        if z > 0.0 {
            t = t.min((bound - alpha) / z);
        } else if z < 0.0 {
            t = t.min(alpha / (-z));
        }
    }
    if std::env::var_os("SDR_SOLVER_TRACE").is_some() {
        let z_norm = solution.rows(0, f).norm();
        eprintln!("refine: f={f} u={u} t={t:.3e} |z|={z_norm:.3e}");
    }
    if !(t > 0.0) {
        return None;
    }

    let mut delta_bar = vec![0.0f64; n];
    let mut moved = false;
    for (a, &(ia, k)) in free.iter().enumerate() {
        let step = t * solution[a];
        if step == 0.0 {
            continue;
        }
        let old = state.alpha[k * n + ia];
        let bound = if y[ia] > 0.0 { upper[k].0 } else { upper[k].1 };
        let new = (old + step).clamp(0.0, bound);
        state.alpha[k * n + ia] = new;
        delta_bar[ia] += new - old;
        moved = true;
    }
    if !moved {
        return None;
    }
    for (i, &delta) in delta_bar.iter().enumerate() {
        if delta == 0.0 {
            continue;
        }
        state.alpha_bar[i] += delta;
        let coeff = y[i] * delta;
        let row = gram.row(i);
        for l in 0..n {
            state.s[l] += coeff * row[l];
        }
    }
    state.pair_updates += 1;
    Some(t)
}

/// One transfer direction applied across all blocks at once.
///
/// The pair is the maximally violating one over the union of the blocks'
/// movable sets; the exact 1-d step for the aggregate move is allocated to
/// the blocks in index order, each clipped to its own box. The phase ends
/// when the union violation reaches the tolerance (which implies every
/// per-block violation has too) or when the selected pair has no jointly
/// movable block left.
#[allow(clippy::too_many_arguments)]
fn compound_phase(
    n: usize,
    m: usize,
    eta: f64,
    upper: &[(f64, f64)],
    y: &[f64],
    diag: &[f64],
    gram: &mut Gram<'_>,
    state: &mut SolveState,
    tol: f64,
    cap: u64,
) {
    let room_up = |alpha: &[f64], i: usize, k: usize| -> f64 {
        if y[i] > 0.0 {
            upper[k].0 - alpha[k * n + i]
        } else {
            alpha[k * n + i]
        }
    };
    let room_down = |alpha: &[f64], j: usize, k: usize| -> f64 {
        if y[j] > 0.0 {
            alpha[k * n + j]
        } else {
            upper[k].1 - alpha[k * n + j]
        }
    };
    for _ in 0..cap {
        let mut best_up: Option<(f64, usize)> = None;
        let mut best_down: Option<(f64, usize)> = None;
        for i in 0..n {
            let g = y[i] - eta * state.s[i];
            let movable_up = (0..m).any(|k| room_up(&state.alpha, i, k) > BOUND_EPS);
            let movable_down = (0..m).any(|k| room_down(&state.alpha, i, k) > BOUND_EPS);
            if movable_up && best_up.is_none_or(|(bg, _)| g > bg) {
                best_up = Some((g, i));
            }
            if movable_down && best_down.is_none_or(|(bg, _)| g < bg) {
                best_down = Some((g, i));
            }
        }
        let (Some((g_up, i)), Some((g_down, j))) = (best_up, best_down) else {
            return;
        };
        let violation = g_up - g_down;
        if violation <= tol || i == j {
            return;
        }
        let (row_i, row_j) = gram.rows(i, j);
        let curvature = diag[i] + diag[j] - 2.0 * row_i[j];
        let step_wanted = if curvature > ZERO_CURVATURE {
            violation / (eta * curvature)
        } else {
            f64::INFINITY
        };
        // Allocate the aggregate step block by block.
        let mut remaining = step_wanted;
        let mut delta_i_total = 0.0;
        let mut delta_j_total = 0.0;
        for k in 0..m {
            if remaining <= 0.0 {
                break;
            }
            let r_i = room_up(&state.alpha, i, k);
            let r_j = room_down(&state.alpha, j, k);
            let room = r_i.min(r_j);
            if room <= BOUND_EPS {
                continue;
            }
            let step = remaining.min(room);
            let base = k * n;
            let old_i = state.alpha[base + i];
            let old_j = state.alpha[base + j];
            let new_i = if step >= r_i {
                if y[i] > 0.0 {
                    upper[k].0
                } else {
                    0.0
                }
            } else {
                old_i + y[i] * step
            };
            let new_j = if step >= r_j {
                if y[j] > 0.0 {
                    0.0
                } else {
                    upper[k].1
                }
            } else {
                old_j - y[j] * step
            };
            state.alpha[base + i] = new_i;
            state.alpha[base + j] = new_j;
            delta_i_total += new_i - old_i;
            delta_j_total += new_j - old_j;
            remaining -= step;
        }
        if delta_i_total == 0.0 && delta_j_total == 0.0 {
            // The violating pair shares no jointly movable block; leave the
            // rest to the per-block sweep.
            return;
        }
        state.alpha_bar[i] += delta_i_total;
        state.alpha_bar[j] += delta_j_total;
        let ci = y[i] * delta_i_total;
        let cj = y[j] * delta_j_total;
        for l in 0..n {
            state.s[l] += ci * row_i[l] + cj * row_j[l];
        }
        state.pair_updates += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn optimize_block(
    k: usize,
    n: usize,
    eta: f64,
    upper: &[(f64, f64)],
    y: &[f64],
    diag: &[f64],
    gram: &mut Gram<'_>,
    state: &mut SolveState,
    tol: f64,
    cap: u64,
) {
    for _ in 0..cap {
        let view = BlockView {
            alpha: &state.alpha[k * n..(k + 1) * n],
            y,
            s: &state.s,
            eta,
            upper_pos: upper[k].0,
            upper_neg: upper[k].1,
        };
        let Some((i_up, j_down, violation)) = view.select() else {
            return;
        };
        if violation <= tol {
            return;
        }
        // Gain-based partner choice from both anchors. Either candidate
        // defaults to the violating pair itself, so one always exists.
        let (row_up, row_down) = gram.rows(i_up, j_down);
        let gain = |gi: f64, gj: f64, kappa: f64| {
            let diff = gi - gj;
            diff * diff / (2.0 * eta * kappa.max(ZERO_CURVATURE))
        };
        let g_up = view.gradient(i_up);
        let g_down = view.gradient(j_down);
        let mut best_a: Option<(f64, usize)> = None; // partner j for anchor i_up
        let mut best_b: Option<(f64, usize)> = None; // partner i for anchor j_down
        for l in 0..n {
            let g_l = view.gradient(l);
            if l != i_up && view.room_down(l) > BOUND_EPS && g_l < g_up {
                let kappa = diag[i_up] + diag[l] - 2.0 * row_up[l];
                let value = gain(g_up, g_l, kappa);
                if best_a.is_none_or(|(bv, _)| value > bv) {
                    best_a = Some((value, l));
                }
            }
            if l != j_down && view.room_up(l) > BOUND_EPS && g_l > g_down {
                let kappa = diag[l] + diag[j_down] - 2.0 * row_down[l];
                let value = gain(g_l, g_down, kappa);
                if best_b.is_none_or(|(bv, _)| value > bv) {
                    best_b = Some((value, l));
                }
            }
        }
        let pair_a = best_a.map(|(v, j)| (v, i_up, j));
        let pair_b = best_b.map(|(v, i)| (v, i, j_down));
        let (i, j) = match (pair_a, pair_b) {
            (Some((va, ia, ja)), Some((vb, ib, jb))) => {
                if va > vb {
                    (ia, ja)
                } else if vb > va {
                    (ib, jb)
                } else {
                    // Equal gains: lexicographically smaller unordered pair,
                    // which is invariant under the label-flip mirror.
                    let key_a = (ia.min(ja), ia.max(ja));
                    let key_b = (ib.min(jb), ib.max(jb));
                    if key_a <= key_b {
                        (ia, ja)
                    } else {
                        (ib, jb)
                    }
                }
            }
            (Some((_, ia, ja)), None) => (ia, ja),
            (None, Some((_, ib, jb))) => (ib, jb),
            (None, None) => (i_up, j_down),
        };

        let room_i = view.room_up(i);
        let room_j = view.room_down(j);
        let upper_i = view.upper(i);
        let upper_j = view.upper(j);
        let pair_violation = view.gradient(i) - view.gradient(j);

        let (row_i, row_j) = gram.rows(i, j);
        let curvature = diag[i] + diag[j] - 2.0 * row_i[j];
        let max_step = room_i.min(room_j);
        let step = if curvature > ZERO_CURVATURE {
            (pair_violation / (eta * curvature)).min(max_step)
        } else {
            max_step
        };

        let base = k * n;
        let old_i = state.alpha[base + i];
        let old_j = state.alpha[base + j];
        // Snap to the exact box face when the step is clipped there.
        let new_i = if step >= room_i {
            if y[i] > 0.0 {
                upper_i
            } else {
                0.0
            }
        } else {
            old_i + y[i] * step
        };
        let new_j = if step >= room_j {
            if y[j] > 0.0 {
                0.0
            } else {
                upper_j
            }
        } else {
            old_j - y[j] * step
        };
        let delta_i = new_i - old_i;
        let delta_j = new_j - old_j;
        state.alpha[base + i] = new_i;
        state.alpha[base + j] = new_j;
        state.alpha_bar[i] += delta_i;
        state.alpha_bar[j] += delta_j;
        let ci = y[i] * delta_i;
        let cj = y[j] * delta_j;
        for l in 0..n {
            state.s[l] += ci * row_i[l] + cj * row_j[l];
        }
        state.pair_updates += 1;
    }
}

/// `1ᵀᾱ − (η/2)·ᾱᵀDKDᾱ` evaluated from the maintained `s = KDᾱ`.
pub(crate) fn dual_objective_from_state(eta: f64, y: &[f64], alpha_bar: &[f64], s: &[f64]) -> f64 {
    let linear: f64 = alpha_bar.iter().sum();
    let quad: f64 = alpha_bar
        .iter()
        .zip(y)
        .zip(s)
        .map(|((&a, &yi), &si)| a * yi * si)
        .sum();
    linear - 0.5 * eta * quad
}
