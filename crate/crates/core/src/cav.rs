//! Concept activation vectors.
//!
//! A CAV is the weight vector of a linear soft-margin classifier trained to
//! separate embeddings of a concept's positive examples from its negatives.
//! The classifier is an L2-regularized hinge-loss SVM solved in the dual by
//! coordinate descent. The intercept is handled by appending a constant `1`
//! feature, so the primal objective is
//!
//! ```text
//! 0.5 * (|w|^2 + b^2) + C * sum_i max(0, 1 - y_i (w.x_i + b))
//! ```
//!
//! with `y_i = +1` for positives and `-1` for negatives.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{seeded_rng, ConceptSetPair, EmbeddingSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavConfig {
    /// Soft-margin constant `C`.
    pub regularization: f64,
    /// Stop once the spread of projected dual gradients in one epoch is at
    /// most this value.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// L2-normalize every training embedding before fitting.
    pub normalize: bool,
}

impl Default for CavConfig {
    fn default() -> Self {
        Self {
            regularization: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            normalize: false,
        }
    }
}

impl CavConfig {
    fn validate(&self) -> Result<()> {
        if !(self.regularization > 0.0 && self.regularization.is_finite()) {
            return Err(Error::invalid("cav regularization must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("cav max_epochs must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("cav tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// Result of the dual coordinate-descent solve.
#[derive(Debug, Clone)]
pub struct HingeSolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub converged: bool,
    /// Dual objective `0.5 |w~|^2 - sum(alpha)` after each epoch. Coordinate
    /// descent never increases it.
    pub dual_trace: Vec<f64>,
    /// Primal objective at the iterate reached after each epoch.
    pub primal_trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Primal objective of the bias-augmented soft-margin problem.
pub fn hinge_objective(
    weights: &[f64],
    bias: f64,
    rows: &[Vec<f64>],
    labels: &[f64],
    regularization: f64,
) -> f64 {
    let reg = 0.5 * (dot(weights, weights) + bias * bias);
    let loss: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, y)| (1.0 - y * (dot(weights, x) + bias)).max(0.0))
        .sum();
    reg + regularization * loss
}

/// Dual coordinate descent for the L2-regularized hinge loss with a
/// regularized intercept. `labels` must be `+1.0` or `-1.0`. Coordinates are
/// visited in a fresh seeded permutation each epoch.
pub fn solve_hinge_dual(
    rows: &[Vec<f64>],
    labels: &[f64],
    config: &CavConfig,
    seed: u64,
) -> Result<HingeSolution> {
    config.validate()?;
    let n = rows.len();
    if n == 0 || labels.len() != n {
        return Err(Error::invalid("hinge solver needs one label per row"));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let c = config.regularization;

    // Diagonal of Q including the constant bias feature.
    let q_diag: Vec<f64> = rows.iter().map(|x| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed);

    let mut dual_trace = Vec::new();
    let mut primal_trace = Vec::new();
    let mut converged = false;
    let mut epochs = 0;

    while epochs < config.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;

        for &i in &order {
            let y = labels[i];
            let x = &rows[i];
            let grad = y * (dot(&w, x) + b) - 1.0;
            let projected = if alpha[i] == 0.0 {
                grad.min(0.0)
            } else if alpha[i] == c {
                grad.max(0.0)
            } else {
                grad
            };
            pg_max = pg_max.max(projected);
            pg_min = pg_min.min(projected);
            if projected.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - grad / q_diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y;
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += step * xj;
                }
                b += step;
            }
        }

        let half_norm = 0.5 * (dot(&w, &w) + b * b);
        dual_trace.push(half_norm - alpha.iter().sum::<f64>());
        primal_trace.push(hinge_objective(&w, b, rows, labels, c));

        if pg_max - pg_min <= config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(HingeSolution {
        weights: w,
        bias: b,
        epochs,
        converged,
        dual_trace,
        primal_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CavDiagnostics {
    pub converged: bool,
    pub epochs: usize,
}

/// One learned concept direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptVector {
    pub name: String,
    pub direction: Vec<f64>,
    pub offset: f64,
    pub train_accuracy: f64,
    pub config: CavConfig,
    pub seed: u64,
    pub diagnostics: CavDiagnostics,
}

impl ConceptVector {
    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn decision(&self, embedding: &[f64]) -> f64 {
        dot(&self.direction, embedding) + self.offset
    }
}

fn widen(v: &[f32], normalize: bool) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
    if normalize {
        let norm = dot(&out, &out).sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|x| *x /= norm);
        }
    }
    out
}

/// Trains the CAV for one concept. Non-convergence is not an error: the
/// returned vector carries the flag in its diagnostics.
pub fn train_cav(
    pair: &ConceptSetPair,
    embeddings: &EmbeddingSet,
    config: &CavConfig,
    seed: u64,
) -> Result<ConceptVector> {
    config.validate()?;
    if pair.positive_ids.is_empty() {
        return Err(Error::EmptyClass("positive set"));
    }
    if pair.negative_ids.is_empty() {
        return Err(Error::EmptyClass("negative set"));
    }
    let mut rows = Vec::with_capacity(pair.positive_ids.len() + pair.negative_ids.len());
    let mut labels = Vec::with_capacity(rows.capacity());
    for (ids, label) in [(&pair.positive_ids, 1.0), (&pair.negative_ids, -1.0)] {
        for id in ids {
            let v = embeddings
                .get(id)
                .ok_or_else(|| Error::UnknownId(id.clone()))?;
            rows.push(widen(v, config.normalize));
            labels.push(label);
        }
    }

    let solution = solve_hinge_dual(&rows, &labels, config, seed)?;
    if !solution.converged {
        log::warn!(
            "cav `{}` did not converge within {} epochs",
            pair.concept_name,
            solution.epochs
        );
    }
    if solution.weights.iter().all(|&w| w == 0.0) {
        return Err(Error::ZeroDirection(pair.concept_name.clone()));
    }

    let correct = rows
        .iter()
        .zip(&labels)
        .filter(|(x, &y)| {
            let d = dot(&solution.weights, x) + solution.bias;
            (d > 0.0) == (y > 0.0)
        })
        .count();

    Ok(ConceptVector {
        name: pair.concept_name.clone(),
        direction: solution.weights,
        offset: solution.bias,
        train_accuracy: correct as f64 / rows.len() as f64,
        config: *config,
        seed,
        diagnostics: CavDiagnostics {
            converged: solution.converged,
            epochs: solution.epochs,
        },
    })
}

/// Ordered set of concept directions sharing one embedding dimension. The
/// position of a concept is its axis index everywhere downstream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConceptSubspace {
    dim: usize,
    concepts: Vec<ConceptVector>,
}

pub fn build_subspace(cavs: Vec<ConceptVector>) -> Result<ConceptSubspace> {
    let first = cavs
        .first()
        .ok_or_else(|| Error::invalid("concept subspace needs at least one concept"))?;
    let dim = first.dim();
    let mut seen = BTreeSet::new();
    for cav in &cavs {
        if cav.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: cav.dim(),
            });
        }
        if !seen.insert(cav.name.as_str()) {
            return Err(Error::DuplicateConcept(cav.name.clone()));
        }
    }
    Ok(ConceptSubspace {
        dim,
        concepts: cavs,
    })
}

impl ConceptSubspace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[ConceptVector] {
        &self.concepts
    }

    pub fn names(&self) -> Vec<String> {
        self.concepts.iter().map(|c| c.name.clone()).collect()
    }

    /// Keeps the named concepts, in the order given.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let picked = names
            .iter()
            .map(|n| {
                self.concepts
                    .iter()
                    .find(|c| c.name == n.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("unknown concept `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        build_subspace(picked)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            concepts: Vec<ConceptVector>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let subspace = build_subspace(raw.concepts)?;
        if subspace.dim != raw.dim {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: subspace.dim,
            });
        }
        Ok(subspace)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
