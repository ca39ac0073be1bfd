//! Plot-ready interpretability outputs: dataset-level weight rankings and
//! per-item explanation records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp_model::{Contribution, InterpretableModel};
use crate::subspace::ConceptProjection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub bias: f64,
    /// Sorted by weight, largest first; equal weights by name.
    pub rows: Vec<WeightRow>,
}

pub fn weight_report(model: &InterpretableModel) -> WeightReport {
    let mut rows: Vec<WeightRow> = model
        .concept_names
        .iter()
        .zip(&model.weights)
        .map(|(name, &weight)| WeightRow {
            name: name.clone(),
            weight,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| a.name.cmp(&b.name))
    });
    WeightReport {
        bias: model.bias,
        rows,
    }
}

impl WeightReport {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "weight"])?;
        for row in &self.rows {
            w.write_record([row.name.clone(), row.weight.to_string()])?;
        }
        w.write_record(["(bias)".to_string(), self.bias.to_string()])?;
        w.flush().map_err(|e| Error::io("<weights>", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopConcept {
    pub name: String,
    pub projection: f64,
}

/// The `k` concepts with the largest projection values, descending; ties by
/// name.
pub fn top_concepts(
    model: &InterpretableModel,
    projection: &ConceptProjection,
    k: usize,
) -> Result<Vec<TopConcept>> {
    if projection.concept_names != model.concept_names {
        return Err(Error::ConceptMismatch {
            expected: model.concept_names.clone(),
            found: projection.concept_names.clone(),
        });
    }
    if k > projection.values.len() {
        return Err(Error::invalid(format!(
            "top {k} requested but only {} concepts exist",
            projection.values.len()
        )));
    }
    let mut rows: Vec<TopConcept> = projection
        .concept_names
        .iter()
        .zip(&projection.values)
        .map(|(name, &projection)| TopConcept {
            name: name.clone(),
            projection,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.projection
            .total_cmp(&a.projection)
            .then_with(|| a.name.cmp(&b.name))
    });
    rows.truncate(k);
    Ok(rows)
}

/// One explained item, in the layout consumed by plotting scripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<f64>,
    pub interpretable_pred: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid_pred: Option<f64>,
    pub bias: f64,
    pub contributions: Vec<Contribution>,
    pub top_concepts: Vec<TopConcept>,
}

/// Flattens explanations into `id,name,projection,weight,contribution` rows.
pub fn write_explanations_csv<W: std::io::Write>(
    writer: W,
    explanations: &[Explanation],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "name", "projection", "weight", "contribution"])?;
    for e in explanations {
        for c in &e.contributions {
            w.write_record([
                e.id.clone(),
                c.name.clone(),
                c.projection.to_string(),
                c.weight.to_string(),
                c.contribution.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<explanations>", e))
}
