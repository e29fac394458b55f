//! Soft-margin SVM on a precomputed kernel.
//!
//! The binary solver is SMO on the dual
//!
//! ```text
//! max  Σ α_i − ½ Σ_ij α_i α_j y_i y_j K_ij
//! s.t. 0 ≤ α_i ≤ C,  Σ α_i y_i = 0
//! ```
//!
//! with maximal-violating-pair selection using second-order information for
//! the second index. It stops once the largest KKT gap `m(α) − M(α)` is below
//! `kkt_tolerance`. Multiclass problems are split one-vs-one.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::scalar::Scalar;
use crate::seed;

pub const C_GRID: [f64; 7] = [1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4];
pub const GAMMA_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2];

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmHyperparams<T: Scalar> {
    pub c: T,
    pub kkt_tolerance: T,
    /// Iteration budget in sweeps of `n` pair updates; `None` means `10·n`.
    pub max_passes: Option<usize>,
}

impl<T: Scalar> SvmHyperparams<T> {
    pub fn with_c(c: T) -> Self {
        Self {
            c,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if !(self.kkt_tolerance > T::zero() && self.kkt_tolerance <= T::of(0.1)) {
            return Err(Error::InvalidArgument(format!(
                "kkt_tolerance {} outside (0, 0.1]",
                self.kkt_tolerance
            )));
        }
        Ok(())
    }

    fn max_iterations(&self, n: usize) -> usize {
        let passes = self.max_passes.unwrap_or(10 * n);
        passes.saturating_mul(n).max(1)
    }
}

impl<T: Scalar> Default for SvmHyperparams<T> {
    fn default() -> Self {
        Self {
            c: T::one(),
            kkt_tolerance: T::of(1e-3),
            max_passes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BinarySvmModel<T: Scalar> {
    /// `α_i · y_i` for every training position.
    pub dual_coefs: Vec<T>,
    pub bias: T,
    /// Positions with `α_i > 0`.
    pub support_indices: Vec<usize>,
    /// `(class for y = +1, class for y = −1)`.
    pub label_pair: (usize, usize),
    pub c: T,
    /// Dual objective at the returned `α`.
    pub objective: T,
    pub iterations: usize,
    /// `false` when the iteration budget ran out before the KKT gap closed;
    /// the model is then the best iterate reached.
    pub converged: bool,
}

impl<T: Scalar> BinarySvmModel<T> {
    pub fn alpha(&self, i: usize) -> T {
        self.dual_coefs[i].abs()
    }

    /// Predicted class for a decision value: positive picks `label_pair.0`.
    pub fn class_for(&self, decision: T) -> usize {
        if decision > T::zero() {
            self.label_pair.0
        } else {
            self.label_pair.1
        }
    }
}

struct Smo<'a, T: Scalar> {
    k: &'a KernelMatrix<T>,
    y: Vec<T>,
    c: T,
    alpha: Vec<T>,
    grad: Vec<T>,
}

impl<T: Scalar> Smo<'_, T> {
    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > T::zero() {
            self.alpha[t] < self.c
        } else {
            self.alpha[t] > T::zero()
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > T::zero() {
            self.alpha[t] > T::zero()
        } else {
            self.alpha[t] < self.c
        }
    }

    fn quad(&self, i: usize, j: usize) -> T {
        let a = self.k.get(i, i) + self.k.get(j, j) - T::of(2.0) * self.k.get(i, j);
        if a > T::zero() {
            a
        } else {
            T::of(TAU)
        }
    }

    /// Returns the working pair, or `None` with the current KKT gap when
    /// it is below `eps`.
    fn select(&self, eps: T) -> (Option<(usize, usize)>, T) {
        let n = self.y.len();
        let mut gmax = T::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmax2 = T::neg_infinity();
        let mut best = T::infinity();
        let mut j_sel = None;
        for t in 0..n {
            if !self.in_low(t) {
                continue;
            }
            let v = self.y[t] * self.grad[t];
            if v > gmax2 {
                gmax2 = v;
            }
            if let Some(i) = i_sel {
                let diff = gmax + v;
                if diff > T::zero() {
                    let obj = -(diff * diff) / self.quad(i, t);
                    if obj < best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let gap = gmax + gmax2;
        if gap < eps {
            return (None, gap);
        }
        match (i_sel, j_sel) {
            (Some(i), Some(j)) => (Some((i, j)), gap),
            _ => (None, gap),
        }
    }

    /// Analytic two-variable update; returns whether any α moved.
    fn update(&mut self, i: usize, j: usize) -> bool {
        let (yi, yj) = (self.y[i], self.y[j]);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let c = self.c;
        let zero = T::zero();
        let quad = self.quad(i, j);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai = ai + delta;
            aj = aj + delta;
            if diff > zero {
                if aj < zero {
                    aj = zero;
                    ai = diff;
                }
            } else if ai < zero {
                ai = zero;
                aj = -diff;
            }
            if diff > zero {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai = ai - delta;
            aj = aj + delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < zero {
                aj = zero;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < zero {
                ai = zero;
                aj = sum;
            }
        }
        let (di, dj) = (ai - old_i, aj - old_j);
        if di == zero && dj == zero {
            return false;
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        for t in 0..self.y.len() {
            let yt = self.y[t];
            self.grad[t] =
                self.grad[t] + yt * (yi * self.k.get(t, i) * di + yj * self.k.get(t, j) * dj);
        }
        true
    }

    /// Exhaustive fallback: tries every violating `(i, j)` pair in a seeded
    /// order until one moves.
    fn sweep(&mut self, rng: &mut seed::Rng) -> bool {
        let n = self.y.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for &i in &order {
            if !self.in_up(i) {
                continue;
            }
            let fi = -self.y[i] * self.grad[i];
            for &j in &order {
                if j != i && self.in_low(j) && fi + self.y[j] * self.grad[j] > T::zero() && self.update(i, j) {
                    return true;
                }
            }
        }
        false
    }

    fn bias(&self) -> T {
        let mut ub = T::infinity();
        let mut lb = T::neg_infinity();
        let mut sum = T::zero();
        let mut n_free = 0usize;
        for t in 0..self.y.len() {
            let yg = self.y[t] * self.grad[t];
            let at_upper = self.alpha[t] >= self.c;
            let at_lower = self.alpha[t] <= T::zero();
            if at_upper {
                if self.y[t] > T::zero() {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if at_lower {
                if self.y[t] > T::zero() {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum = sum + yg;
            }
        }
        let r = if n_free > 0 {
            sum / T::of_usize(n_free)
        } else {
            (ub + lb) * T::of(0.5)
        };
        -r
    }
}

/// Dual objective `Σ α − ½ αᵀ Q α` for signed coefficients `α_i y_i`.
pub fn dual_objective<T: Scalar>(kernel: &KernelMatrix<T>, dual_coefs: &[T]) -> T {
    let n = dual_coefs.len();
    let mut quad = T::zero();
    for i in 0..n {
        if dual_coefs[i] == T::zero() {
            continue;
        }
        let row = kernel.row(i);
        let s: T = (0..n).map(|j| row[j] * dual_coefs[j]).sum();
        quad = quad + dual_coefs[i] * s;
    }
    let linear: T = dual_coefs.iter().map(|a| a.abs()).sum();
    linear - T::of(0.5) * quad
}

/// Trains a binary SVM on a square kernel with `±1` labels. The returned
/// model labels `+1` as class 0 and `−1` as class 1.
pub fn solve_binary_smo<T: Scalar>(
    kernel: &KernelMatrix<T>,
    labels: &[i8],
    hp: &SvmHyperparams<T>,
    seed: u64,
) -> Result<BinarySvmModel<T>> {
    if !kernel.is_square() {
        return Err(Error::NotSquare {
            rows: kernel.n_rows(),
            cols: kernel.n_cols(),
        });
    }
    let n = kernel.n_rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::InvalidArgument(format!("labels must be ±1, found {bad}")));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    hp.validate()?;

    let mut smo = Smo {
        k: kernel,
        y: labels.iter().map(|&l| T::of(l as f64)).collect(),
        c: hp.c,
        alpha: vec![T::zero(); n],
        grad: vec![-T::one(); n],
    };
    let mut rng = seed::rng(seed);
    let budget = hp.max_iterations(n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        let (pair, _gap) = smo.select(hp.kkt_tolerance);
        let Some((i, j)) = pair else {
            converged = true;
            break;
        };
        iterations += 1;
        if !smo.update(i, j) && !smo.sweep(&mut rng) {
            log::warn!("smo stalled after {iterations} iterations");
            break;
        }
    }
    if !converged {
        converged = smo.select(hp.kkt_tolerance).1 < hp.kkt_tolerance;
    }

    let bias = smo.bias();
    let dual_coefs: Vec<T> = smo.alpha.iter().zip(&smo.y).map(|(&a, &y)| a * y).collect();
    let support_indices = (0..n).filter(|&i| smo.alpha[i] > T::zero()).collect();
    let objective = dual_objective(kernel, &dual_coefs);
    Ok(BinarySvmModel {
        dual_coefs,
        bias,
        support_indices,
        label_pair: (0, 1),
        c: hp.c,
        objective,
        iterations,
        converged,
    })
}

/// `Σ (α_i y_i) K(x_i, x) + b`.
pub fn decision_value<T: Scalar>(model: &BinarySvmModel<T>, kernel_row: &[T]) -> Result<T> {
    if kernel_row.len() != model.dual_coefs.len() {
        return Err(Error::DimensionMismatch {
            expected: model.dual_coefs.len(),
            got: kernel_row.len(),
        });
    }
    Ok(model
        .support_indices
        .iter()
        .map(|&i| model.dual_coefs[i] * kernel_row[i])
        .sum::<T>()
        + model.bias)
}

/// Binary model for one class pair, with the training positions it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PairModel<T: Scalar> {
    pub model: BinarySvmModel<T>,
    /// Positions into the full training kernel, aligned with `dual_coefs`.
    pub positions: Vec<usize>,
}

impl<T: Scalar> PairModel<T> {
    fn decision(&self, full_row: &[T]) -> T {
        let m = &self.model;
        m.support_indices
            .iter()
            .map(|&i| m.dual_coefs[i] * full_row[self.positions[i]])
            .sum::<T>()
            + m.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmModel<T: Scalar> {
    pub pairs: Vec<PairModel<T>>,
    /// Class ids present in training, ascending.
    pub classes: Vec<usize>,
    pub n_train: usize,
}

impl<T: Scalar> SvmModel<T> {
    pub fn converged(&self) -> bool {
        self.pairs.iter().all(|p| p.model.converged)
    }

    /// Per-pair decision values for one kernel row (ordered like `pairs`).
    pub fn decision_values(&self, kernel_row: &[T]) -> Result<Vec<T>> {
        if kernel_row.len() != self.n_train {
            return Err(Error::DimensionMismatch {
                expected: self.n_train,
                got: kernel_row.len(),
            });
        }
        Ok(self.pairs.iter().map(|p| p.decision(kernel_row)).collect())
    }

    /// One-vs-one vote. Tied vote counts are broken by the summed absolute
    /// decision values of the pairs each class won, then by smaller id.
    pub fn predict_row(&self, kernel_row: &[T]) -> Result<usize> {
        let decisions = self.decision_values(kernel_row)?;
        Ok(vote(&self.classes, &self.pairs, &decisions))
    }
}

fn vote<T: Scalar>(classes: &[usize], pairs: &[PairModel<T>], decisions: &[T]) -> usize {
    let mut votes = vec![0usize; classes.len()];
    let mut strength = vec![T::zero(); classes.len()];
    let slot = |c: usize| classes.binary_search(&c).expect("pair classes are trained classes");
    for (p, &d) in pairs.iter().zip(decisions) {
        let s = slot(p.model.class_for(d));
        votes[s] += 1;
        strength[s] = strength[s] + d.abs();
    }
    let mut best = 0;
    for s in 1..classes.len() {
        if votes[s] > votes[best] || (votes[s] == votes[best] && strength[s] > strength[best]) {
            best = s;
        }
    }
    classes[best]
}

/// One-vs-one training: one binary SMO per unordered pair of classes present
/// in `labels`, each on the kernel restricted to that pair's instances.
pub fn fit_multiclass<T: Scalar>(
    kernel: &KernelMatrix<T>,
    labels: &[usize],
    hp: &SvmHyperparams<T>,
    seed: u64,
) -> Result<SvmModel<T>> {
    if !kernel.is_square() {
        return Err(Error::NotSquare {
            rows: kernel.n_rows(),
            cols: kernel.n_cols(),
        });
    }
    if labels.len() != kernel.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: kernel.n_rows(),
            got: labels.len(),
        });
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let mut jobs = Vec::new();
    for (a, &ca) in classes.iter().enumerate() {
        for &cb in &classes[a + 1..] {
            jobs.push((ca, cb));
        }
    }
    let pairs = jobs
        .par_iter()
        .enumerate()
        .map(|(k, &(ca, cb))| {
            let positions: Vec<usize> = (0..labels.len())
                .filter(|&i| labels[i] == ca || labels[i] == cb)
                .collect();
            let sub = kernel.select(&positions, &positions);
            let y: Vec<i8> = positions
                .iter()
                .map(|&i| if labels[i] == ca { 1 } else { -1 })
                .collect();
            let mut model = solve_binary_smo(&sub, &y, hp, seed::derive(seed, k as u64))?;
            model.label_pair = (ca, cb);
            Ok(PairModel { model, positions })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel {
        pairs,
        classes,
        n_train: labels.len(),
    })
}

/// Predicts every row of a test×train kernel.
pub fn predict<T: Scalar>(model: &SvmModel<T>, kernel_rows: &KernelMatrix<T>) -> Result<Vec<usize>> {
    if kernel_rows.n_cols() != model.n_train {
        return Err(Error::DimensionMismatch {
            expected: model.n_train,
            got: kernel_rows.n_cols(),
        });
    }
    (0..kernel_rows.n_rows())
        .map(|i| model.predict_row(kernel_rows.row(i)))
        .collect()
}
