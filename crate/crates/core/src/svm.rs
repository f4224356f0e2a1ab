//! Multiclass SVM on precomputed kernels: one-vs-one voting over binary
//! machines trained by sequential minimal optimisation with second-order
//! working-set selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{gaussian_kernel, DistanceMatrix};

pub const SMO_TOLERANCE: f64 = 1e-3;
pub const SMO_MAX_ITER: usize = 100_000;
pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_GAMMA_GRID: [f64; 6] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
pub const DEFAULT_FOLDS: usize = 5;
const TAU: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("kernel has {got} entries, expected {expected}")]
    KernelShape { expected: usize, got: usize },
    #[error("C must be positive (got {0})")]
    BadC(f64),
    #[error("need at least 2 folds and as many items (folds {folds}, items {items})")]
    BadFolds { folds: usize, items: usize },
    #[error("labels are degenerate: {0}")]
    DegenerateLabels(String),
    #[error("grids must not be empty")]
    EmptyGrid,
}

/// Binary machine separating `positive` (y = +1) from `negative` (y = -1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: u8,
    pub negative: u8,
    /// Training-set indices with non-zero dual coefficient.
    pub support: Vec<usize>,
    /// `alpha_i * y_i` for each support index.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinaryMachine {
    /// Decision value for one test item given its kernel row against the training set.
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&s, &c)| c * kernel_row[s])
            .sum::<f64>()
            - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<u8>,
    pub machines: Vec<BinaryMachine>,
    pub c: f64,
    pub gamma: Option<f64>,
    pub n_train: usize,
}

impl SvmModel {
    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }
}

/// Solution of one binary dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DualSolution {
    /// `1/2 a^T Q a - sum(a)` with `Q_ij = y_i y_j K_ij`.
    pub fn objective(&self, kernel: &[f64], y: &[f64]) -> f64 {
        dual_objective(&self.alpha, kernel, y)
    }
}

pub fn dual_objective(alpha: &[f64], kernel: &[f64], y: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i * n + j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// SMO on `min 1/2 a^T Q a - e^T a` s.t. `0 <= a <= c`, `y^T a = 0`.
/// `kernel` is the dense `n x n` matrix of the sub-problem.
pub fn solve_dual(kernel: &[f64], y: &[f64], c: f64, eps: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let mut a = kernel[i_sel * n + i_sel] + kernel[t * n + t] - 2.0 * kernel[i_sel * n + t];
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j_sel = t;
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < eps {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kernel[i * n + i] + kernel[j * n + j] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kernel[i * n + i] + kernel[j * n + j] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // offset: mean over free variables, midpoint of the feasible interval otherwise
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

fn check_kernel(kernel: &[f64], rows: usize, cols: usize) -> Result<(), SvmError> {
    if kernel.len() != rows * cols {
        return Err(SvmError::KernelShape {
            expected: rows * cols,
            got: kernel.len(),
        });
    }
    Ok(())
}

fn distinct_classes(labels: &[u8]) -> Vec<u8> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// Trains one machine per unordered pair of classes present in `labels`.
/// `kernel` is the `n x n` training kernel, row-major.
pub fn train(kernel: &[f64], labels: &[u8], c: f64) -> Result<SvmModel, SvmError> {
    let n = labels.len();
    check_kernel(kernel, n, n)?;
    if !(c > 0.0) {
        return Err(SvmError::BadC(c));
    }
    let classes = distinct_classes(labels);
    if classes.len() < 2 {
        return Err(SvmError::SingleClass);
    }
    let mut pairs = Vec::new();
    for (a_pos, &a) in classes.iter().enumerate() {
        for &b in &classes[a_pos + 1..] {
            pairs.push((a, b));
        }
    }
    let machines = pairs
        .into_iter()
        .map(|(a, b)| {
            let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let m = idx.len();
            let mut sub = vec![0.0; m * m];
            for (r, &i) in idx.iter().enumerate() {
                for (s, &j) in idx.iter().enumerate() {
                    sub[r * m + s] = kernel[i * n + j];
                }
            }
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if labels[i] == a { 1.0 } else { -1.0 })
                .collect();
            let sol = solve_dual(&sub, &y, c, SMO_TOLERANCE, SMO_MAX_ITER);
            if !sol.converged {
                log::warn!("machine {a} vs {b} hit the iteration cap");
            }
            let (mut support, mut coef) = (Vec::new(), Vec::new());
            for (r, &i) in idx.iter().enumerate() {
                if sol.alpha[r] > 0.0 {
                    support.push(i);
                    coef.push(sol.alpha[r] * y[r]);
                }
            }
            BinaryMachine {
                positive: a,
                negative: b,
                support,
                coef,
                rho: sol.rho,
                iterations: sol.iterations,
                converged: sol.converged,
            }
        })
        .collect();
    Ok(SvmModel {
        classes,
        machines,
        c,
        gamma: None,
        n_train: n,
    })
}

/// Class of each test item; `cross` is the `m x n_train` kernel, row-major.
/// Most votes wins; ties go to the smallest class id.
pub fn predict(model: &SvmModel, cross: &[f64]) -> Result<Vec<u8>, SvmError> {
    let n = model.n_train;
    if n == 0 || cross.len() % n != 0 {
        return Err(SvmError::KernelShape {
            expected: n,
            got: cross.len(),
        });
    }
    let slot = |c: u8| model.classes.binary_search(&c).expect("machine classes come from the model");
    Ok(cross
        .chunks(n)
        .map(|row| {
            let mut votes = vec![0usize; model.classes.len()];
            for m in &model.machines {
                let winner = if m.decision(row) > 0.0 { m.positive } else { m.negative };
                votes[slot(winner)] += 1;
            }
            let mut best = 0;
            for (k, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = k;
                }
            }
            model.classes[best]
        })
        .collect())
}

/// `exp(-gamma d^2)` applied entrywise.
pub fn kernel_from_distances(dist: &[f64], gamma: f64) -> Vec<f64> {
    dist.iter().map(|&d| gaussian_kernel(d, gamma)).collect()
}

pub fn accuracy(predicted: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Fold assignment: each class is shuffled with the seed and dealt round-robin,
/// continuing the deal across classes so fold sizes stay balanced.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<(Vec<usize>, bool), SvmError> {
    if folds < 2 || labels.len() < folds {
        return Err(SvmError::BadFolds {
            folds,
            items: labels.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut relaxed = false;
    let mut next = 0usize;
    for class in distinct_classes(labels) {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        relaxed |= members.len() < folds;
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    Ok((fold_of, relaxed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: f64,
    pub gamma: f64,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<GridCell>,
    pub best_c: f64,
    pub best_gamma: f64,
    pub best_accuracy: f64,
    pub folds: usize,
    pub stratification_relaxed: bool,
}

fn fit_and_score(
    dist: &DistanceMatrix,
    labels: &[u8],
    train_idx: &[usize],
    test_idx: &[usize],
    c: f64,
    gamma: f64,
) -> Result<f64, SvmError> {
    let train_labels: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
    let truth: Vec<u8> = test_idx.iter().map(|&i| labels[i]).collect();
    let classes = distinct_classes(&train_labels);
    if classes.len() < 2 {
        let constant = vec![classes[0]; truth.len()];
        return Ok(accuracy(&constant, &truth));
    }
    let mut k = Vec::with_capacity(train_idx.len() * train_idx.len());
    for &i in train_idx {
        for &j in train_idx {
            k.push(gaussian_kernel(dist.get(i, j), gamma));
        }
    }
    let model = train(&k, &train_labels, c)?;
    let mut cross = Vec::with_capacity(test_idx.len() * train_idx.len());
    for &i in test_idx {
        for &j in train_idx {
            cross.push(gaussian_kernel(dist.get(i, j), gamma));
        }
    }
    Ok(accuracy(&predict(&model, &cross)?, &truth))
}

/// Stratified k-fold search over `(C, gamma)`; best is the highest mean
/// accuracy, ties going to the smaller C and then the smaller gamma.
pub fn grid_search(
    dist: &DistanceMatrix,
    labels: &[u8],
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    fold_seed: u64,
) -> Result<CvReport, SvmError> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(SvmError::EmptyGrid);
    }
    if dist.n != labels.len() {
        return Err(SvmError::KernelShape {
            expected: labels.len() * labels.len(),
            got: dist.entries.len(),
        });
    }
    if distinct_classes(labels).len() < 2 {
        return Err(SvmError::DegenerateLabels("fewer than two classes".into()));
    }
    let (fold_of, relaxed) = stratified_folds(labels, folds, fold_seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            (train, test)
        })
        .collect();
    let mut combos = Vec::new();
    for &c in c_grid {
        for &g in gamma_grid {
            combos.push((c, g));
        }
    }
    let grid = combos
        .par_iter()
        .map(|&(c, gamma)| {
            let fold_accuracies = splits
                .iter()
                .map(|(tr, te)| fit_and_score(dist, labels, tr, te, c, gamma))
                .collect::<Result<Vec<f64>, _>>()?;
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
            Ok(GridCell {
                c,
                gamma,
                mean_accuracy,
                fold_accuracies,
            })
        })
        .collect::<Result<Vec<_>, SvmError>>()?;
    let best = grid
        .iter()
        .min_by(|a, b| {
            b.mean_accuracy
                .total_cmp(&a.mean_accuracy)
                .then(a.c.total_cmp(&b.c))
                .then(a.gamma.total_cmp(&b.gamma))
        })
        .expect("grid is non-empty");
    Ok(CvReport {
        best_c: best.c,
        best_gamma: best.gamma,
        best_accuracy: best.mean_accuracy,
        grid,
        folds,
        stratification_relaxed: relaxed,
    })
}
