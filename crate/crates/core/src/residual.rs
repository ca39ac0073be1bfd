//! Linear residual corrector on raw embeddings, fitted after the
//! interpretable model is frozen. The hybrid prediction is
//! `h(project(e)) + w_r . e + b_r`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cav::ConceptSubspace;
use crate::dataset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::interp_model::{predict_interpretable, InterpretableModel};
use crate::subspace::{project, project_batch};

pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    /// Numerical rank of the centered design.
    pub rank: usize,
    /// Set when `ridge == 0` and the design was rank deficient; the stored
    /// weights are then the minimum-norm solution.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub interpretable: InterpretableModel,
    pub residual_weights: Vec<f64>,
    pub residual_bias: f64,
    pub ridge: f64,
    pub diagnostics: ResidualDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridPrediction {
    pub hybrid: f64,
    pub interpretable: f64,
    pub residual_term: f64,
}

fn widen(v: &[f32]) -> impl Iterator<Item = f64> + '_ {
    v.iter().map(|&x| f64::from(x))
}

/// Interpretable predictions for every item, in set order.
pub fn interpretable_predictions(
    embeddings: &EmbeddingSet,
    subspace: &ConceptSubspace,
    model: &InterpretableModel,
) -> Result<Vec<f64>> {
    project_batch(embeddings, subspace)?
        .iter()
        .map(|(_, p)| predict_interpretable(model, p))
        .collect()
}

/// Least-squares fit of `w_r, b_r` to `y - h(project(e))` with penalty
/// `ridge * |w_r|^2`. `model` is cloned into the result untouched.
pub fn fit_residual(
    embeddings: &EmbeddingSet,
    subspace: &ConceptSubspace,
    model: &InterpretableModel,
    ridge: f64,
) -> Result<HybridModel> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid("ridge must be a finite non-negative number"));
    }
    if embeddings.dim() != subspace.dim() {
        return Err(Error::DimensionMismatch {
            expected: subspace.dim(),
            found: embeddings.dim(),
        });
    }
    let scores = embeddings.scores_in_order()?;
    if scores.is_empty() {
        return Err(Error::invalid("cannot fit a residual on an empty set"));
    }
    let interp = interpretable_predictions(embeddings, subspace, model)?;
    let targets: Vec<f64> = scores.iter().zip(&interp).map(|(y, h)| y - h).collect();

    let (weights, bias, diagnostics) = solve_ridge(embeddings, &targets, ridge);
    Ok(HybridModel {
        interpretable: model.clone(),
        residual_weights: weights,
        residual_bias: bias,
        ridge,
        diagnostics,
    })
}

/// Solves `min |t - X w - b|^2 + ridge |w|^2` with an unpenalized intercept.
pub fn solve_ridge(
    embeddings: &EmbeddingSet,
    targets: &[f64],
    ridge: f64,
) -> (Vec<f64>, f64, ResidualDiagnostics) {
    let n = embeddings.len();
    let d = embeddings.dim();
    let nf = n as f64;

    let mut x_mean = vec![0.0; d];
    for (_, v) in embeddings.iter() {
        for (m, x) in x_mean.iter_mut().zip(widen(v)) {
            *m += x;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= nf);
    let t_mean = targets.iter().sum::<f64>() / nf;

    let xc = DMatrix::from_fn(n, d, |i, j| f64::from(embeddings.vector(i)[j]) - x_mean[j]);
    let tc = DVector::from_iterator(n, targets.iter().map(|t| t - t_mean));

    let svd_rank = |m: &DMatrix<f64>| {
        let sv = m.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let eps = max * (n.max(d) as f64) * f64::EPSILON;
        sv.iter().filter(|&&s| s > eps).count()
    };

    let (w, rank) = if ridge > 0.0 {
        let mut gram = xc.tr_mul(&xc);
        for i in 0..d {
            gram[(i, i)] += ridge;
        }
        let rhs = xc.tr_mul(&tc);
        let rank = svd_rank(&xc);
        let w = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .svd(true, true)
                .solve(&rhs, 0.0)
                .expect("svd computed with both factors"),
        };
        (w, rank)
    } else {
        let svd = xc.svd(true, true);
        let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let eps = max * (n.max(d) as f64) * f64::EPSILON;
        let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
        let w = svd.solve(&tc, eps).expect("svd computed with both factors");
        (w, rank)
    };

    let rank_deficient = ridge == 0.0 && rank < d;
    if rank_deficient {
        log::warn!("residual design has rank {rank} < {d}; using the minimum-norm solution");
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    let bias = t_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    (
        weights,
        bias,
        ResidualDiagnostics {
            rank,
            rank_deficient,
        },
    )
}

pub fn predict_hybrid<T: Copy + Into<f64>>(
    model: &HybridModel,
    embedding: &[T],
    subspace: &ConceptSubspace,
) -> Result<HybridPrediction> {
    if embedding.len() != model.residual_weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.residual_weights.len(),
            found: embedding.len(),
        });
    }
    let interpretable =
        predict_interpretable(&model.interpretable, &project(embedding, subspace)?)?;
    let residual_term = embedding
        .iter()
        .zip(&model.residual_weights)
        .map(|(&e, w)| e.into() * w)
        .sum::<f64>()
        + model.residual_bias;
    Ok(HybridPrediction {
        hybrid: interpretable + residual_term,
        interpretable,
        residual_term,
    })
}

impl HybridModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.interpretable.validate()?;
        Ok(model)
    }
}
