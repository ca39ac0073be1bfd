//! Sparse linear scorer over concept projections.
//!
//! The model predicts `w . f + b`. Weights are fitted by cyclic coordinate
//! descent on
//!
//! ```text
//! (1/n) sum_k (w . z_k + b - y_k)^2 + lambda * (alpha |w|_1 + (1 - alpha) |w|_2^2)
//! ```
//!
//! where `z_k` are the projections standardized with training statistics.
//! Weights and bias are mapped back to the original feature scale before
//! being stored, so prediction needs no bookkeeping.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::seeded_rng;
use crate::error::{Error, Result};
use crate::subspace::ConceptProjection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Stop when no weight moves by more than this in a full sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Scale features to unit variance before fitting. Features are always
    /// centered.
    pub standardize: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_sweeps: 10_000,
            standardize: true,
        }
    }
}

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub sweeps: usize,
    /// Objective in the standardized feature space.
    pub objective: f64,
    pub max_kkt_violation: f64,
    /// Concepts whose training projections had zero variance; their weights
    /// are pinned to zero.
    pub zero_variance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretableModel {
    pub concept_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub standardization: Standardization,
    pub diagnostics: FitDiagnostics,
}

/// Output of the raw coordinate-descent solver on a centered problem.
#[derive(Debug, Clone)]
pub struct CdSolution {
    pub weights: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Elastic-net objective for centered columns and centered target (the
/// optimal intercept is then zero).
pub fn centered_objective(
    columns: &[Vec<f64>],
    target: &[f64],
    weights: &[f64],
    lambda: f64,
    alpha: f64,
) -> f64 {
    let n = target.len() as f64;
    let mut residual = target.to_vec();
    for (col, &w) in columns.iter().zip(weights) {
        for (r, z) in residual.iter_mut().zip(col) {
            *r -= z * w;
        }
    }
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    let l2: f64 = weights.iter().map(|w| w * w).sum();
    dot(&residual, &residual) / n + lambda * (alpha * l1 + (1.0 - alpha) * l2)
}

/// Cyclic coordinate descent with soft-thresholding. `columns` and `target`
/// must be centered. Columns with zero squared norm keep a zero weight.
pub fn elastic_net_cd(
    columns: &[Vec<f64>],
    target: &[f64],
    lambda: f64,
    alpha: f64,
    config: &FitConfig,
) -> CdSolution {
    let n = target.len() as f64;
    let p = columns.len();
    let sq_norms: Vec<f64> = columns.iter().map(|c| dot(c, c)).collect();
    let l1 = lambda * alpha;
    let l2 = 2.0 * lambda * (1.0 - alpha);

    let mut weights = vec![0.0; p];
    let mut residual = target.to_vec();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if sq_norms[j] == 0.0 {
                continue;
            }
            let col = &columns[j];
            let old = weights[j];
            let rho = 2.0 / n * (dot(col, &residual) + sq_norms[j] * old);
            let new = soft_threshold(rho, l1) / (2.0 / n * sq_norms[j] + l2);
            if new != old {
                let delta = new - old;
                for (r, z) in residual.iter_mut().zip(col) {
                    *r -= z * delta;
                }
                weights[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let l1n: f64 = weights.iter().map(|w| w.abs()).sum();
        let l2n: f64 = weights.iter().map(|w| w * w).sum();
        trace.push(dot(&residual, &residual) / n + lambda * (alpha * l1n + (1.0 - alpha) * l2n));
        if max_change < config.tolerance {
            converged = true;
            break;
        }
    }

    CdSolution {
        weights,
        sweeps,
        converged,
        objective_trace: trace,
    }
}

/// Largest violation of the elastic-net optimality conditions over the
/// non-degenerate coordinates of a centered problem.
pub fn kkt_violation(
    columns: &[Vec<f64>],
    target: &[f64],
    weights: &[f64],
    lambda: f64,
    alpha: f64,
) -> f64 {
    let n = target.len() as f64;
    let mut residual = target.to_vec();
    for (col, &w) in columns.iter().zip(weights) {
        for (r, z) in residual.iter_mut().zip(col) {
            *r -= z * w;
        }
    }
    columns
        .iter()
        .zip(weights)
        .filter(|(col, _)| dot(col, col) > 0.0)
        .map(|(col, &w)| {
            let grad = -2.0 / n * dot(col, &residual) + 2.0 * lambda * (1.0 - alpha) * w;
            if w != 0.0 {
                (grad + lambda * alpha * w.signum()).abs()
            } else {
                (grad.abs() - lambda * alpha).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Standardized (or only centered) feature columns plus their statistics.
struct Design {
    columns: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    degenerate: Vec<bool>,
    target_mean: f64,
    centered_target: Vec<f64>,
}

fn build_design(rows: &[&[f64]], scores: &[f64], standardize: bool) -> Design {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    let nf = n as f64;
    let mut columns = Vec::with_capacity(p);
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    let mut degenerate = Vec::with_capacity(p);
    for j in 0..p {
        let raw: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mean = raw.iter().sum::<f64>() / nf;
        let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let flat = !(var > 0.0) || raw.iter().all(|&v| v == raw[0]);
        let scale = if flat || !standardize {
            1.0
        } else {
            var.sqrt()
        };
        let col = if flat {
            vec![0.0; n]
        } else {
            raw.iter().map(|v| (v - mean) / scale).collect()
        };
        columns.push(col);
        means.push(mean);
        scales.push(scale);
        degenerate.push(flat);
    }
    let target_mean = scores.iter().sum::<f64>() / nf;
    let centered_target = scores.iter().map(|y| y - target_mean).collect();
    Design {
        columns,
        means,
        scales,
        degenerate,
        target_mean,
        centered_target,
    }
}

fn check_inputs(
    projections: &[ConceptProjection],
    scores: &[f64],
    lambda: f64,
    alpha: f64,
) -> Result<Vec<String>> {
    if projections.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} projections but {} scores",
            projections.len(),
            scores.len()
        )));
    }
    if projections.len() < 2 {
        return Err(Error::invalid("at least two samples are needed to fit"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda must be a finite non-negative number",
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha must lie in [0, 1]"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let names = projections[0].concept_names.clone();
    if names.is_empty() {
        return Err(Error::invalid("projections have no concepts"));
    }
    for p in projections {
        if p.concept_names != names || p.values.len() != names.len() {
            return Err(Error::ConceptMismatch {
                expected: names,
                found: p.concept_names.clone(),
            });
        }
    }
    Ok(names)
}

/// Fits the interpretable model.
pub fn fit_sparse_linear(
    projections: &[ConceptProjection],
    scores: &[f64],
    lambda: f64,
    alpha: f64,
    config: &FitConfig,
) -> Result<InterpretableModel> {
    let names = check_inputs(projections, scores, lambda, alpha)?;
    let rows: Vec<&[f64]> = projections.iter().map(|p| p.values.as_slice()).collect();
    let design = build_design(&rows, scores, config.standardize);

    let zero_variance: Vec<String> = names
        .iter()
        .zip(&design.degenerate)
        .filter(|(_, &d)| d)
        .map(|(n, _)| n.clone())
        .collect();
    for name in &zero_variance {
        log::warn!(
            "concept `{name}` has zero variance in training projections; weight pinned to 0"
        );
    }

    let solution = elastic_net_cd(
        &design.columns,
        &design.centered_target,
        lambda,
        alpha,
        config,
    );
    if !solution.converged {
        log::warn!(
            "elastic net did not converge within {} sweeps",
            solution.sweeps
        );
    }
    let objective = *solution.objective_trace.last().unwrap_or(&f64::NAN);
    let kkt = kkt_violation(
        &design.columns,
        &design.centered_target,
        &solution.weights,
        lambda,
        alpha,
    );

    let weights: Vec<f64> = solution
        .weights
        .iter()
        .zip(&design.scales)
        .map(|(w, s)| w / s)
        .collect();
    let bias = design.target_mean - dot(&weights, &design.means);

    Ok(InterpretableModel {
        concept_names: names,
        weights,
        bias,
        lambda,
        alpha,
        standardization: Standardization {
            means: design.means,
            scales: design.scales,
        },
        diagnostics: FitDiagnostics {
            converged: solution.converged,
            sweeps: solution.sweeps,
            objective,
            max_kkt_violation: kkt,
            zero_variance,
        },
    })
}

/// Smallest `lambda` at which every weight is zero for the given `alpha`
/// (infinite for `alpha == 0`).
pub fn lambda_max(
    projections: &[ConceptProjection],
    scores: &[f64],
    alpha: f64,
    standardize: bool,
) -> Result<f64> {
    check_inputs(projections, scores, 0.0, alpha)?;
    let rows: Vec<&[f64]> = projections.iter().map(|p| p.values.as_slice()).collect();
    let design = build_design(&rows, scores, standardize);
    let n = scores.len() as f64;
    let max_corr = design
        .columns
        .iter()
        .map(|c| dot(c, &design.centered_target).abs())
        .fold(0.0, f64::max);
    Ok(2.0 * max_corr / (n * alpha))
}

fn check_names(model: &InterpretableModel, projection: &ConceptProjection) -> Result<()> {
    if projection.concept_names != model.concept_names
        || projection.values.len() != model.weights.len()
    {
        return Err(Error::ConceptMismatch {
            expected: model.concept_names.clone(),
            found: projection.concept_names.clone(),
        });
    }
    Ok(())
}

pub fn predict_interpretable(
    model: &InterpretableModel,
    projection: &ConceptProjection,
) -> Result<f64> {
    check_names(model, projection)?;
    Ok(dot(&model.weights, &projection.values) + model.bias)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub name: String,
    pub projection: f64,
    pub weight: f64,
    pub contribution: f64,
}

/// Per-concept addends of the prediction, largest magnitude first (ties by
/// name).
pub fn explain(
    model: &InterpretableModel,
    projection: &ConceptProjection,
) -> Result<Vec<Contribution>> {
    check_names(model, projection)?;
    let mut rows: Vec<Contribution> = model
        .concept_names
        .iter()
        .zip(&model.weights)
        .zip(&projection.values)
        .map(|((name, &weight), &value)| Contribution {
            name: name.clone(),
            projection: value,
            weight,
            contribution: weight * value,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.contribution
            .abs()
            .total_cmp(&a.contribution.abs())
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(rows)
}

impl InterpretableModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.concept_names.len();
        if self.weights.len() != p
            || self.standardization.means.len() != p
            || self.standardization.scales.len() != p
        {
            return Err(Error::invalid("model vectors disagree with concept count"));
        }
        if self.standardization.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("standardization scales must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub alpha: f64,
    pub mean_squared_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub alpha: f64,
    pub folds: usize,
    pub seed: u64,
    pub grid: Vec<CvPoint>,
}

/// k-fold grid search over `(lambda, alpha)`, minimizing held-out mean
/// squared error. Folds come from a seeded shuffle; ties keep the earliest
/// grid point (lambdas outer, alphas inner).
pub fn cross_validate(
    projections: &[ConceptProjection],
    scores: &[f64],
    lambdas: &[f64],
    alphas: &[f64],
    folds: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<CvResult> {
    check_inputs(projections, scores, 0.0, 0.0)?;
    if lambdas.is_empty() || alphas.is_empty() {
        return Err(Error::invalid("cross-validation grid is empty"));
    }
    let n = scores.len();
    if folds < 2 || folds > n / 2 {
        return Err(Error::invalid(format!(
            "cannot split {n} samples into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut fold_of = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        fold_of[i] = rank % folds;
    }

    let grid: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| alphas.iter().map(move |&a| (l, a)))
        .collect();
    let points = grid
        .par_iter()
        .map(|&(lambda, alpha)| {
            let mut sse = 0.0;
            for fold in 0..folds {
                let (train, test): (Vec<usize>, Vec<usize>) =
                    (0..n).partition(|&i| fold_of[i] != fold);
                let tp: Vec<ConceptProjection> =
                    train.iter().map(|&i| projections[i].clone()).collect();
                let ts: Vec<f64> = train.iter().map(|&i| scores[i]).collect();
                let model = fit_sparse_linear(&tp, &ts, lambda, alpha, config)?;
                for &i in &test {
                    let e = predict_interpretable(&model, &projections[i])? - scores[i];
                    sse += e * e;
                }
            }
            Ok(CvPoint {
                lambda,
                alpha,
                mean_squared_error: sse / n as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = points
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.mean_squared_error
                .total_cmp(&b.mean_squared_error)
                .then(ia.cmp(ib))
        })
        .map(|(_, p)| p.clone())
        .expect("grid is non-empty");
    Ok(CvResult {
        lambda: best.lambda,
        alpha: best.alpha,
        folds,
        seed,
        grid: points,
    })
}
