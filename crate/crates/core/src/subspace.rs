//! Concept-space projection: `value_i = <e, c_i> / |c_i|^2` for each
//! concept direction `c_i`. Axes are treated independently; classifier
//! offsets play no part.

use serde::{Deserialize, Serialize};

use crate::cav::ConceptSubspace;
use crate::dataset::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptProjection {
    pub values: Vec<f64>,
    pub concept_names: Vec<String>,
}

impl ConceptProjection {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Squared norms of every axis, rejecting zero directions.
fn axis_norms(subspace: &ConceptSubspace) -> Result<Vec<f64>> {
    subspace
        .concepts()
        .iter()
        .map(|c| {
            let sq: f64 = c.direction.iter().map(|x| x * x).sum();
            if sq > 0.0 && sq.is_finite() {
                Ok(sq)
            } else {
                Err(Error::ZeroDirection(c.name.clone()))
            }
        })
        .collect()
}

fn project_with<T: Copy + Into<f64>>(
    embedding: &[T],
    subspace: &ConceptSubspace,
    norms: &[f64],
) -> Result<Vec<f64>> {
    if embedding.len() != subspace.dim() {
        return Err(Error::DimensionMismatch {
            expected: subspace.dim(),
            found: embedding.len(),
        });
    }
    let values = subspace
        .concepts()
        .iter()
        .zip(norms)
        .map(|(c, sq)| {
            let dot: f64 = embedding
                .iter()
                .zip(&c.direction)
                .map(|(&e, d)| e.into() * d)
                .sum();
            dot / sq
        })
        .collect::<Vec<_>>();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("projection produced a non-finite value"));
    }
    Ok(values)
}

/// Projects one embedding onto every concept axis.
pub fn project<T: Copy + Into<f64>>(
    embedding: &[T],
    subspace: &ConceptSubspace,
) -> Result<ConceptProjection> {
    let norms = axis_norms(subspace)?;
    Ok(ConceptProjection {
        values: project_with(embedding, subspace, &norms)?,
        concept_names: subspace.names(),
    })
}

/// Projects every item of `set`, preserving item order.
pub fn project_batch(
    set: &EmbeddingSet,
    subspace: &ConceptSubspace,
) -> Result<Vec<(String, ConceptProjection)>> {
    if set.dim() != subspace.dim() {
        return Err(Error::DimensionMismatch {
            expected: subspace.dim(),
            found: set.dim(),
        });
    }
    let norms = axis_norms(subspace)?;
    let names = subspace.names();
    set.iter()
        .map(|(id, v)| {
            Ok((
                id.to_string(),
                ConceptProjection {
                    values: project_with(v, subspace, &norms)?,
                    concept_names: names.clone(),
                },
            ))
        })
        .collect()
}

/// Writes `id,<concept_1>,...,<concept_Nc>` CSV.
pub fn write_projections_csv<W: std::io::Write>(
    writer: W,
    names: &[String],
    rows: &[(String, ConceptProjection)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (id, p) in rows {
        let mut record = vec![id.clone()];
        record.extend(p.values.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<projections>", e))?;
    Ok(())
}
