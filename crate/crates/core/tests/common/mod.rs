//! Independent reference implementations used as test oracles. None of this
//! goes through the library's solvers.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller, kept local so oracles do not share the library's sampler.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Least squares with an unpenalized intercept and `ridge * |w|^2`, via the
/// normal equations of the intercept-augmented design. Returns `(w, b)`.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64], ridge: f64) -> (Vec<f64>, f64) {
    let p = rows[0].len();
    let m = p + 1;
    let mut a = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for (x, &t) in rows.iter().zip(y) {
        let mut aug = x.clone();
        aug.push(1.0);
        for i in 0..m {
            for j in 0..m {
                a[i][j] += aug[i] * aug[j];
            }
            rhs[i] += aug[i] * t;
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(p) {
        row[i] += ridge;
    }
    let mut sol = solve_dense(a, rhs);
    let b = sol.pop().unwrap();
    (sol, b)
}

/// Columns standardized with population statistics, centered target.
pub struct Standardized {
    pub columns: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub target_mean: f64,
}

pub fn standardize(rows: &[Vec<f64>], y: &[f64]) -> Standardized {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mut columns = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for j in 0..p {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        columns.push(rows.iter().map(|r| (r[j] - mean) / sd).collect());
        means.push(mean);
        scales.push(sd);
    }
    let target_mean = y.iter().sum::<f64>() / n;
    Standardized {
        columns,
        target: y.iter().map(|t| t - target_mean).collect(),
        means,
        scales,
        target_mean,
    }
}

pub fn elastic_net_objective(s: &Standardized, w: &[f64], lambda: f64, alpha: f64) -> f64 {
    let n = s.target.len();
    let mut sse = 0.0;
    for i in 0..n {
        let pred: f64 = s.columns.iter().zip(w).map(|(c, wj)| c[i] * wj).sum();
        sse += (s.target[i] - pred).powi(2);
    }
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let l2: f64 = w.iter().map(|v| v * v).sum();
    sse / n as f64 + lambda * (alpha * l1 + (1.0 - alpha) * l2)
}

/// Proximal gradient (ISTA) on the standardized elastic-net problem with a
/// fixed step `1/L`. Returns standardized-space weights.
pub fn ista(s: &Standardized, lambda: f64, alpha: f64, max_iters: usize) -> Vec<f64> {
    let n = s.target.len() as f64;
    let p = s.columns.len();
    // Largest eigenvalue of Z^T Z by power iteration.
    let mut v = vec![1.0; p];
    let mut eig = 0.0;
    for _ in 0..500 {
        let zv: Vec<f64> = (0..s.target.len())
            .map(|i| s.columns.iter().zip(&v).map(|(c, x)| c[i] * x).sum())
            .collect();
        let ztzv: Vec<f64> = s.columns.iter().map(|c| dot(c, &zv)).collect();
        eig = dot(&ztzv, &ztzv).sqrt();
        v = ztzv.iter().map(|x| x / eig).collect();
    }
    let lipschitz = 2.0 * eig * 1.0001 / n + 2.0 * lambda * (1.0 - alpha);
    let step = 1.0 / lipschitz;
    let mut w = vec![0.0; p];
    for _ in 0..max_iters {
        let resid: Vec<f64> = (0..s.target.len())
            .map(|i| s.target[i] - s.columns.iter().zip(&w).map(|(c, x)| c[i] * x).sum::<f64>())
            .collect();
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let grad = -2.0 / n * dot(&s.columns[j], &resid) + 2.0 * lambda * (1.0 - alpha) * w[j];
            let z = w[j] - step * grad;
            let t = step * lambda * alpha;
            let new = z.signum() * (z.abs() - t).max(0.0);
            max_change = max_change.max((new - w[j]).abs());
            w[j] = new;
        }
        if max_change < 1e-15 {
            break;
        }
    }
    w
}

/// Primal objective of the bias-augmented soft-margin SVM.
pub fn svm_objective(w: &[f64], b: f64, rows: &[Vec<f64>], labels: &[f64], c: f64) -> f64 {
    let loss: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum();
    0.5 * (dot(w, w) + b * b) + c * loss
}

/// Projected-free subgradient descent with step `1/t` on the (1-strongly
/// convex) primal; returns the best iterate seen.
pub fn svm_subgradient(rows: &[Vec<f64>], labels: &[f64], c: f64, iters: usize) -> (Vec<f64>, f64) {
    let d = rows[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (w.clone(), b, svm_objective(&w, b, rows, labels, c));
    for t in 1..=iters {
        let mut gw = w.clone();
        let mut gb = b;
        for (x, &y) in rows.iter().zip(labels) {
            if y * (dot(&w, x) + b) < 1.0 {
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g -= c * y * xi;
                }
                gb -= c * y;
            }
        }
        let eta = 1.0 / t as f64;
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= eta * g;
        }
        b -= eta * gb;
        let obj = svm_objective(&w, b, rows, labels, c);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
    }
    (best.0, best.1)
}

/// Random linearly separable two-class problem: `n` points in `d`
/// dimensions with geometric margin at least `margin` from a random
/// hyperplane. Returns `(rows, labels)`, labels `+1/-1`.
pub fn separable_instance(seed: u64, n: usize, d: usize, margin: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let normal: Vec<f64> = (0..d).map(|_| gaussian(&mut r)).collect();
    let norm = dot(&normal, &normal).sqrt();
    let normal: Vec<f64> = normal.iter().map(|x| x / norm).collect();
    let offset = 0.3 * gaussian(&mut r);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let x: Vec<f64> = (0..d).map(|_| 2.0 * gaussian(&mut r)).collect();
        let s = dot(&normal, &x) + offset;
        if s.abs() < margin {
            continue;
        }
        // Alternate classes so both are well represented.
        let want = if rows.len() % 2 == 0 { 1.0 } else { -1.0 };
        if s.signum() != want {
            continue;
        }
        rows.push(x);
        labels.push(want);
    }
    (rows, labels)
}

/// Rank of each value: 1 + (#smaller) + (#equal - 1) / 2.
pub fn brute_force_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let smaller = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation from the textbook sum formula.
pub fn pearson_direct(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn spearman_direct(x: &[f64], y: &[f64]) -> f64 {
    pearson_direct(&brute_force_ranks(x), &brute_force_ranks(y))
}
