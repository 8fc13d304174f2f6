//! One-vs-one support vector machine trained by sequential minimal
//! optimization.
//!
//! Each class pair (a, b) with a < b gets a binary subproblem with
//! y = +1 for class a. The dual min 0.5 a'Qa - e'a with 0 <= a_i <= C_i
//! and y'a = 0 is solved by maximal-violating-pair SMO: stop when
//! m - M <= tol with m = max over I_up of -y G and M = min over I_low.
//! The bias is the mean of -y_i G_i over free support vectors, falling
//! back to (m + M) / 2 when none are free. Per-row caps C_i implement
//! balanced class weights C * n / (k * n_c) computed on the full
//! training labels. Kernel rows are cached with LRU eviction so large
//! problems never materialize the full matrix.
//!
//! Prediction takes majority votes over pairs; vote ties fall to the
//! summed signed decision values, then to the lowest class index.

use super::{check_training_input, LearnError, N_CLASSES};
use crate::dataset::BinMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Poly { degree: u32, coef0: f64 },
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase", content = "value")]
pub enum GammaRule {
    /// 1 / (n_cols * variance of all matrix entries).
    Scale,
    /// 1 / n_cols.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub gamma: GammaRule,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Kernel rows kept in the LRU cache while solving.
    pub cache_rows: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: Kernel::Linear,
            gamma: GammaRule::Scale,
            c: 1.0,
            tol: 1e-3,
            max_iter: 100_000,
            cache_rows: 1024,
        }
    }
}

/// Solution of one binary subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryDual {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

fn kernel_value(kernel: &Kernel, gamma: f64, dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    match kernel {
        Kernel::Linear => dot,
        Kernel::Poly { degree, coef0 } => (gamma * dot + coef0).powi(*degree as i32),
        Kernel::Rbf => (-gamma * (sq_a + sq_b - 2.0 * dot)).exp(),
    }
}

fn row_dot(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).map(|(&p, &q)| p as u32 * q as u32).sum::<u32>() as f64
}

fn row_sq(a: &[u8]) -> f64 {
    a.iter().map(|&p| p as u32 * p as u32).sum::<u32>() as f64
}

/// Source of kernel matrix rows for the solver.
trait KernelSource {
    fn n(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    /// Kernel rows for i and j, valid until the next call.
    fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]);
}

struct DenseKernel<'a> {
    m: &'a [Vec<f64>],
}

impl KernelSource for DenseKernel<'_> {
    fn n(&self) -> usize {
        self.m.len()
    }

    fn diag(&self, i: usize) -> f64 {
        self.m[i][i]
    }

    fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        (&self.m[i], &self.m[j])
    }
}

struct CachedKernel<'a> {
    x: &'a BinMatrix,
    sq: Vec<f64>,
    kernel: Kernel,
    gamma: f64,
    capacity: usize,
    stamp: u64,
    cache: HashMap<usize, (u64, Vec<f64>)>,
}

impl<'a> CachedKernel<'a> {
    fn new(x: &'a BinMatrix, kernel: Kernel, gamma: f64, capacity: usize) -> Self {
        let sq = (0..x.n_rows()).map(|i| row_sq(x.row(i))).collect();
        CachedKernel { x, sq, kernel, gamma, capacity, stamp: 0, cache: HashMap::new() }
    }

    fn ensure(&mut self, i: usize, pinned: usize) {
        self.stamp += 1;
        if let Some(entry) = self.cache.get_mut(&i) {
            entry.0 = self.stamp;
            return;
        }
        if self.cache.len() >= self.capacity {
            let evict = self
                .cache
                .iter()
                .filter(|(&k, _)| k != pinned)
                .min_by_key(|(_, (stamp, _))| *stamp)
                .map(|(&k, _)| k);
            if let Some(k) = evict {
                self.cache.remove(&k);
            }
        }
        let a = self.x.row(i);
        let row: Vec<f64> = (0..self.x.n_rows())
            .map(|j| {
                kernel_value(&self.kernel, self.gamma, row_dot(a, self.x.row(j)), self.sq[i], self.sq[j])
            })
            .collect();
        self.cache.insert(i, (self.stamp, row));
    }
}

impl KernelSource for CachedKernel<'_> {
    fn n(&self) -> usize {
        self.x.n_rows()
    }

    fn diag(&self, i: usize) -> f64 {
        kernel_value(&self.kernel, self.gamma, self.sq[i], self.sq[i], self.sq[i])
    }

    fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(i, j);
        self.ensure(j, i);
        (&self.cache[&i].1, &self.cache[&j].1)
    }
}

struct Selection {
    i: usize,
    j: usize,
    m: f64,
    big_m: f64,
}

fn select_pair(y: &[f64], c: &[f64], alphas: &[f64], grad: &[f64]) -> Option<Selection> {
    let mut m = f64::NEG_INFINITY;
    let mut i = None;
    let mut big_m = f64::INFINITY;
    let mut j = None;
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        let in_up = (y[t] > 0.0 && alphas[t] < c[t]) || (y[t] < 0.0 && alphas[t] > 0.0);
        let in_low = (y[t] > 0.0 && alphas[t] > 0.0) || (y[t] < 0.0 && alphas[t] < c[t]);
        if in_up && v > m {
            m = v;
            i = Some(t);
        }
        if in_low && v < big_m {
            big_m = v;
            j = Some(t);
        }
    }
    match (i, j) {
        (Some(i), Some(j)) => Some(Selection { i, j, m, big_m }),
        _ => None,
    }
}

fn compute_bias(y: &[f64], c: &[f64], alphas: &[f64], grad: &[f64], m: f64, big_m: f64) -> f64 {
    let mut sum = 0.0;
    let mut free = 0;
    for t in 0..y.len() {
        if alphas[t] > 0.0 && alphas[t] < c[t] {
            sum += -y[t] * grad[t];
            free += 1;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (m + big_m) / 2.0
    }
}

fn smo<K: KernelSource>(
    src: &mut K,
    y: &[f64],
    c: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<BinaryDual, LearnError> {
    let n = src.n();
    let mut alphas = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    loop {
        let Some(sel) = select_pair(y, c, &alphas, &grad) else {
            // One side of the box is fully saturated in every direction.
            let bias = compute_bias(y, c, &alphas, &grad, 0.0, 0.0);
            return Ok(BinaryDual { alphas, bias, iterations });
        };
        if sel.m - sel.big_m <= tol {
            let bias = compute_bias(y, c, &alphas, &grad, sel.m, sel.big_m);
            return Ok(BinaryDual { alphas, bias, iterations });
        }
        if iterations >= max_iter {
            let bias = compute_bias(y, c, &alphas, &grad, sel.m, sel.big_m);
            return Err(LearnError::NoConvergence {
                iterations,
                violation: sel.m - sel.big_m,
                best: Box::new(BinaryDual { alphas, bias, iterations }),
            });
        }
        let (i, j) = (sel.i, sel.j);
        let (qd_i, qd_j) = (src.diag(i), src.diag(j));
        let (k_i, k_j) = src.rows(i, j);
        let q_ij = y[i] * y[j] * k_i[j];
        let old_i = alphas[i];
        let old_j = alphas[j];

        if y[i] != y[j] {
            let quad = (qd_i + qd_j + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alphas[i] - alphas[j];
            alphas[i] += delta;
            alphas[j] += delta;
            if diff > 0.0 {
                if alphas[j] < 0.0 {
                    alphas[j] = 0.0;
                    alphas[i] = diff;
                }
            } else if alphas[i] < 0.0 {
                alphas[i] = 0.0;
                alphas[j] = -diff;
            }
            if diff > c[i] - c[j] {
                if alphas[i] > c[i] {
                    alphas[i] = c[i];
                    alphas[j] = c[i] - diff;
                }
            } else if alphas[j] > c[j] {
                alphas[j] = c[j];
                alphas[i] = c[j] + diff;
            }
        } else {
            let quad = (qd_i + qd_j - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alphas[i] + alphas[j];
            alphas[i] -= delta;
            alphas[j] += delta;
            if sum > c[i] {
                if alphas[i] > c[i] {
                    alphas[i] = c[i];
                    alphas[j] = sum - c[i];
                }
            } else if alphas[j] < 0.0 {
                alphas[j] = 0.0;
                alphas[i] = sum;
            }
            if sum > c[j] {
                if alphas[j] > c[j] {
                    alphas[j] = c[j];
                    alphas[i] = sum - c[j];
                }
            } else if alphas[i] < 0.0 {
                alphas[i] = 0.0;
                alphas[j] = sum;
            }
        }

        let d_i = alphas[i] - old_i;
        let d_j = alphas[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * y[i] * k_i[t] * d_i + y[t] * y[j] * k_j[t] * d_j;
        }
        iterations += 1;
    }
}

fn validate_binary_inputs(n: usize, y: &[i8], c: &[f64]) -> Result<(), LearnError> {
    if n == 0 {
        return Err(LearnError::Empty);
    }
    if y.len() != n || c.len() != n {
        return Err(LearnError::LengthMismatch { rows: n, labels: y.len() });
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(LearnError::BadParam("labels must be +1 or -1".into()));
    }
    if !y.contains(&1) || !y.contains(&-1) {
        return Err(LearnError::BadParam("both label signs must be present".into()));
    }
    if c.iter().any(|&v| !(v > 0.0)) {
        return Err(LearnError::BadParam("per-row caps must be positive".into()));
    }
    Ok(())
}

/// Solves one binary subproblem given a precomputed kernel matrix.
pub fn solve_binary(
    kernel: &[Vec<f64>],
    y: &[i8],
    c: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<BinaryDual, LearnError> {
    validate_binary_inputs(kernel.len(), y, c)?;
    if kernel.iter().any(|row| row.len() != kernel.len()) {
        return Err(LearnError::BadParam("kernel matrix must be square".into()));
    }
    if !(tol > 0.0) {
        return Err(LearnError::BadParam("tol must be positive".into()));
    }
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let mut src = DenseKernel { m: kernel };
    smo(&mut src, &yf, c, tol, max_iter)
}

/// Largest KKT violation m - M of a candidate dual solution; at or below
/// the solver tolerance for a converged solution.
pub fn kkt_max_violation(kernel: &[Vec<f64>], y: &[i8], c: &[f64], alphas: &[f64]) -> f64 {
    let n = y.len();
    let mut m = f64::NEG_INFINITY;
    let mut big_m = f64::INFINITY;
    for t in 0..n {
        let yt = y[t] as f64;
        let mut grad = -1.0;
        for s in 0..n {
            grad += yt * y[s] as f64 * kernel[t][s] * alphas[s];
        }
        let v = -yt * grad;
        let in_up = (yt > 0.0 && alphas[t] < c[t]) || (yt < 0.0 && alphas[t] > 0.0);
        let in_low = (yt > 0.0 && alphas[t] > 0.0) || (yt < 0.0 && alphas[t] < c[t]);
        if in_up && v > m {
            m = v;
        }
        if in_low && v < big_m {
            big_m = v;
        }
    }
    m - big_m
}

/// One binary classifier of the one-vs-one decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassifier {
    pub class_pos: u8,
    pub class_neg: u8,
    sv: BinMatrix,
    sv_sq: Vec<f64>,
    /// alpha_i * y_i per support vector.
    coef: Vec<f64>,
    bias: f64,
}

impl PairClassifier {
    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    fn decision(&self, row: &[u8], row_sq: f64, kernel: &Kernel, gamma: f64) -> f64 {
        let mut f = self.bias;
        for s in 0..self.sv.n_rows() {
            let k = kernel_value(kernel, gamma, row_dot(self.sv.row(s), row), self.sv_sq[s], row_sq);
            f += self.coef[s] * k;
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    kernel: Kernel,
    gamma: f64,
    classes: Vec<u8>,
    pairs: Vec<PairClassifier>,
    n_cols: usize,
}

impl SvmModel {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pairs(&self) -> &[PairClassifier] {
        &self.pairs
    }

    pub fn predict(&self, x: &BinMatrix) -> Vec<u8> {
        assert_eq!(x.n_cols(), self.n_cols, "column width mismatch");
        (0..x.n_rows())
            .map(|i| {
                let row = x.row(i);
                if self.pairs.is_empty() {
                    return self.classes[0];
                }
                let row_sq = row_sq(row);
                let mut votes = [0usize; N_CLASSES];
                let mut conf = [0.0f64; N_CLASSES];
                for pair in &self.pairs {
                    let f = pair.decision(row, row_sq, &self.kernel, self.gamma);
                    if f > 0.0 {
                        votes[pair.class_pos as usize] += 1;
                    } else {
                        votes[pair.class_neg as usize] += 1;
                    }
                    conf[pair.class_pos as usize] += f;
                    conf[pair.class_neg as usize] -= f;
                }
                let top = *votes.iter().max().unwrap();
                let mut winner = None;
                for cls in 0..N_CLASSES {
                    if votes[cls] == top
                        && winner.is_none_or(|w: usize| conf[cls] > conf[w])
                    {
                        winner = Some(cls);
                    }
                }
                winner.unwrap() as u8
            })
            .collect()
    }
}

fn resolve_gamma(rule: &GammaRule, x: &BinMatrix) -> Result<f64, LearnError> {
    let d = x.n_cols() as f64;
    match rule {
        GammaRule::Auto => Ok(1.0 / d),
        GammaRule::Value(g) => {
            if *g > 0.0 {
                Ok(*g)
            } else {
                Err(LearnError::BadParam("gamma must be positive".into()))
            }
        }
        GammaRule::Scale => {
            let total = (x.n_rows() * x.n_cols()) as f64;
            let mut mean = 0.0;
            let mut mean_sq = 0.0;
            for i in 0..x.n_rows() {
                for &v in x.row(i) {
                    mean += v as f64;
                    mean_sq += (v as f64) * (v as f64);
                }
            }
            mean /= total;
            mean_sq /= total;
            let var = mean_sq - mean * mean;
            if var > 0.0 {
                Ok(1.0 / (d * var))
            } else {
                Ok(1.0 / d)
            }
        }
    }
}

pub fn fit_svm(x: &BinMatrix, y: &[u8], params: &SvmParams) -> Result<SvmModel, LearnError> {
    check_training_input(x, y)?;
    if !(params.c > 0.0) {
        return Err(LearnError::BadParam("c must be positive".into()));
    }
    if !(params.tol > 0.0) {
        return Err(LearnError::BadParam("tol must be positive".into()));
    }
    if params.cache_rows < 2 {
        return Err(LearnError::BadParam("cache_rows must be at least 2".into()));
    }
    if let Kernel::Poly { degree, .. } = params.kernel {
        if degree == 0 {
            return Err(LearnError::BadParam("poly degree must be at least 1".into()));
        }
    }
    let gamma = resolve_gamma(&params.gamma, x)?;

    let n = y.len();
    let mut counts = [0usize; N_CLASSES];
    for &l in y {
        counts[l as usize] += 1;
    }
    let classes: Vec<u8> = (0..N_CLASSES as u8).filter(|&c| counts[c as usize] > 0).collect();
    let k = classes.len() as f64;
    // Balanced per-class caps over the full training labels.
    let mut cap = [0.0f64; N_CLASSES];
    for &cls in &classes {
        cap[cls as usize] = params.c * n as f64 / (k * counts[cls as usize] as f64);
    }

    let mut pairs = Vec::new();
    for ai in 0..classes.len() {
        for bi in ai + 1..classes.len() {
            let (a, b) = (classes[ai], classes[bi]);
            let rows: Vec<usize> = (0..n).filter(|&i| y[i] == a || y[i] == b).collect();
            let sub_rows: Vec<Vec<u8>> = rows.iter().map(|&i| x.row(i).to_vec()).collect();
            let sub = BinMatrix::from_rows(&sub_rows);
            let suby: Vec<f64> = rows.iter().map(|&i| if y[i] == a { 1.0 } else { -1.0 }).collect();
            let subc: Vec<f64> = rows.iter().map(|&i| cap[y[i] as usize]).collect();
            let mut src = CachedKernel::new(&sub, params.kernel, gamma, params.cache_rows);
            let dual = smo(&mut src, &suby, &subc, params.tol, params.max_iter)?;

            let kept: Vec<usize> = (0..rows.len()).filter(|&i| dual.alphas[i] > 0.0).collect();
            let sv_rows: Vec<Vec<u8>> = kept.iter().map(|&i| x.row(rows[i]).to_vec()).collect();
            let sv = BinMatrix::from_rows(&sv_rows);
            let sv_sq = (0..sv.n_rows()).map(|s| row_sq(sv.row(s))).collect();
            let coef = kept.iter().map(|&i| dual.alphas[i] * suby[i]).collect();
            pairs.push(PairClassifier {
                class_pos: a,
                class_neg: b,
                sv,
                sv_sq,
                coef,
                bias: dual.bias,
            });
        }
    }
    Ok(SvmModel { kernel: params.kernel, gamma, classes, pairs, n_cols: x.n_cols() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn two_point_problem_has_known_solution() {
        // Points (1,0) labeled +1 and (0,0) labeled -1 under the linear
        // kernel: the equality constraint forces equal alphas, and the
        // unconstrained optimum alpha = 2 lies inside the box at C = 10.
        // Both points stay free, so b = -1 exactly.
        let kernel = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let dual = solve_binary(&kernel, &[1, -1], &[10.0, 10.0], 1e-6, 10_000).unwrap();
        assert_relative_eq!(dual.alphas[0], 2.0, epsilon = 1e-4);
        assert_relative_eq!(dual.alphas[1], 2.0, epsilon = 1e-4);
        assert_relative_eq!(dual.bias, -1.0, epsilon = 1e-4);
    }

    #[test]
    fn box_constraint_clips_the_step() {
        // Same geometry with C = 1: both alphas saturate at the cap, no
        // free vectors remain, and the bias falls back to the midpoint.
        let kernel = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let dual = solve_binary(&kernel, &[1, -1], &[1.0, 1.0], 1e-6, 10_000).unwrap();
        assert_relative_eq!(dual.alphas[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(dual.alphas[1], 1.0, epsilon = 1e-9);
    }

    fn random_kernel(n: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
        // Gram matrix of random +-1 vectors in dimension 6, guaranteed PSD.
        let dim = 6;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| if rng.random_range(0..2) == 0 { -1.0 } else { 1.0 }).collect())
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| pts[i].iter().zip(&pts[j]).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn solutions_are_feasible_and_kkt_optimal() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for round in 0..20 {
            let n = 4 + (round % 5);
            let kernel = random_kernel(n, &mut rng);
            let mut y: Vec<i8> = (0..n).map(|_| if rng.random_range(0..2) == 0 { -1 } else { 1 }).collect();
            y[0] = 1;
            y[1] = -1;
            let c: Vec<f64> = (0..n).map(|_| 0.5 + rng.random_range(0.0..4.0)).collect();
            let dual = solve_binary(&kernel, &y, &c, 1e-6, 100_000).unwrap();
            let mut balance = 0.0;
            for t in 0..n {
                assert!(dual.alphas[t] >= -1e-12 && dual.alphas[t] <= c[t] + 1e-12);
                balance += y[t] as f64 * dual.alphas[t];
            }
            assert!(balance.abs() <= 1e-8, "equality constraint drift {balance}");
            let violation = kkt_max_violation(&kernel, &y, &c, &dual.alphas);
            assert!(violation <= 1e-6 + 1e-9, "violation {violation}");
        }
    }

    #[test]
    fn exhausted_iteration_budget_reports_best_duals() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kernel = random_kernel(8, &mut rng);
        let y = [1, -1, 1, -1, 1, -1, 1, -1];
        let c = [1.0; 8];
        match solve_binary(&kernel, &y, &c, 1e-9, 1) {
            Err(LearnError::NoConvergence { iterations, best, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(best.alphas.len(), 8);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn binary_input_validation() {
        let k = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            solve_binary(&k, &[1, 1], &[1.0, 1.0], 1e-3, 10),
            Err(LearnError::BadParam(_))
        ));
        assert!(matches!(
            solve_binary(&k, &[1, 0], &[1.0, 1.0], 1e-3, 10),
            Err(LearnError::BadParam(_))
        ));
        assert!(matches!(
            solve_binary(&k, &[1, -1], &[1.0, 0.0], 1e-3, 10),
            Err(LearnError::BadParam(_))
        ));
    }

    fn xor_data() -> (BinMatrix, Vec<u8>) {
        let x = BinMatrix::from_rows(&[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        (x, vec![0, 1, 1, 0])
    }

    #[test]
    fn rbf_kernel_solves_xor() {
        let (x, y) = xor_data();
        let params = SvmParams {
            kernel: Kernel::Rbf,
            gamma: GammaRule::Value(1.0),
            c: 10.0,
            ..SvmParams::default()
        };
        let model = fit_svm(&x, &y, &params).unwrap();
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn poly_kernel_solves_xor() {
        let (x, y) = xor_data();
        let params = SvmParams {
            kernel: Kernel::Poly { degree: 2, coef0: 1.0 },
            gamma: GammaRule::Value(1.0),
            c: 10.0,
            ..SvmParams::default()
        };
        let model = fit_svm(&x, &y, &params).unwrap();
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn linear_kernel_cannot_solve_xor() {
        let (x, y) = xor_data();
        let params = SvmParams { c: 10.0, ..SvmParams::default() };
        let model = fit_svm(&x, &y, &params).unwrap();
        assert_ne!(model.predict(&x), y);
    }

    fn block_data(n_per_class: usize, seed: u64) -> (BinMatrix, Vec<u8>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for c in 0..3u8 {
            for _ in 0..n_per_class {
                let mut row = vec![0u8; 10];
                row[c as usize * 3] = 1;
                row[c as usize * 3 + 1] = 1;
                row[9] = rng.random_range(0..2);
                rows.push(row);
                y.push(c);
            }
        }
        (BinMatrix::from_rows(&rows), y)
    }

    #[test]
    fn separates_three_block_coded_classes() {
        let (x, y) = block_data(15, 31);
        let params = SvmParams { c: 10.0, ..SvmParams::default() };
        let model = fit_svm(&x, &y, &params).unwrap();
        assert_eq!(model.pairs().len(), 3);
        let pred = model.predict(&x);
        let hits = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(hits as f64 / y.len() as f64 >= 0.95, "{hits}/{}", y.len());
    }

    #[test]
    fn two_class_training_only_votes_between_those_classes() {
        let x = BinMatrix::from_rows(&[vec![1, 0], vec![1, 0], vec![0, 1], vec![0, 1]]);
        let y = [0, 0, 2, 2];
        let model = fit_svm(&x, &y, &SvmParams::default()).unwrap();
        assert_eq!(model.pairs().len(), 1);
        for p in model.predict(&x) {
            assert!(p == 0 || p == 2);
        }
    }

    #[test]
    fn single_class_training_predicts_that_class() {
        let x = BinMatrix::from_rows(&[vec![1, 0], vec![0, 1]]);
        let model = fit_svm(&x, &[1, 1], &SvmParams::default()).unwrap();
        assert_eq!(model.pairs().len(), 0);
        assert_eq!(model.predict(&x), vec![1, 1]);
    }

    #[test]
    fn scale_gamma_uses_entry_variance() {
        // Entries are half ones: mean 0.5, variance 0.25, d = 4, so
        // gamma = 1 / (4 * 0.25) = 1.
        let x = BinMatrix::from_rows(&[vec![1, 1, 0, 0], vec![0, 0, 1, 1]]);
        let model = fit_svm(&x, &[0, 1], &SvmParams::default()).unwrap();
        assert_relative_eq!(model.gamma(), 1.0, epsilon = 1e-12);
        let params = SvmParams { gamma: GammaRule::Auto, ..SvmParams::default() };
        let model = fit_svm(&x, &[0, 1], &params).unwrap();
        assert_relative_eq!(model.gamma(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn tiny_cache_matches_full_cache() {
        let (x, y) = block_data(10, 77);
        let small = SvmParams { cache_rows: 2, c: 5.0, ..SvmParams::default() };
        let large = SvmParams { cache_rows: 4096, c: 5.0, ..SvmParams::default() };
        let a = fit_svm(&x, &y, &small).unwrap();
        let b = fit_svm(&x, &y, &large).unwrap();
        assert_eq!(a.predict(&x), b.predict(&x));
        for (pa, pb) in a.pairs().iter().zip(b.pairs()) {
            assert_eq!(pa.bias, pb.bias);
            assert_eq!(pa.coef, pb.coef);
        }
    }

    #[test]
    fn serialization_preserves_predictions() {
        let (x, y) = block_data(8, 13);
        let params = SvmParams { kernel: Kernel::Rbf, c: 5.0, ..SvmParams::default() };
        let model = fit_svm(&x, &y, &params).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: SvmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.predict(&x), model.predict(&x));
    }
}
