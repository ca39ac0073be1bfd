//! Synthetic embedding tasks with planted concept directions, used by the
//! end-to-end tests and the `gen-synthetic` subcommand.
//!
//! Each embedding is `sum_i z_i u_i + background * g` where the `u_i` are
//! random orthonormal directions, `z_i ~ N(0, 1)` and `g ~ N(0, I)`. The
//! attribute annotation for concept `i` is the planted projection
//! `<x, u_i>`, and the score is `sum_i w_i <x, u_i> + bias + noise`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{seeded_rng, EmbeddingSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub train: usize,
    pub test: usize,
    /// Standard deviation of the score noise.
    pub noise: f64,
    /// Standard deviation of the isotropic background in embedding space.
    pub background: f64,
    /// One weight per planted concept.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            train: 2000,
            test: 500,
            noise: 0.05,
            background: 0.5,
            weights: vec![1.2, 0.9, 0.6, 0.3, -0.2, -0.5, -0.8, -1.1],
            bias: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConcept {
    pub name: String,
    pub direction: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    pub concepts: Vec<PlantedConcept>,
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub train: EmbeddingSet,
    pub test: EmbeddingSet,
    pub truth: SyntheticTruth,
}

pub fn concept_name(i: usize) -> String {
    format!("concept_{i}")
}

fn orthonormal(rng: &mut impl Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        // Two Gram-Schmidt passes keep the basis orthogonal to rounding.
        for _ in 0..2 {
            for u in &basis {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    basis
}

fn sample_split(
    rng: &mut impl Rng,
    prefix: &str,
    count: usize,
    spec: &SyntheticSpec,
    directions: &[Vec<f64>],
) -> Result<EmbeddingSet> {
    let ids: Vec<String> = (0..count).map(|i| format!("{prefix}_{i:05}")).collect();
    let mut data = Vec::with_capacity(count * spec.dim);
    let mut scores = BTreeMap::new();
    let mut attributes: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); directions.len()];

    for id in &ids {
        let mut x: Vec<f64> = (0..spec.dim)
            .map(|_| spec.background * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for u in directions {
            let z: f64 = rng.sample(StandardNormal);
            x.iter_mut().zip(u).for_each(|(a, b)| *a += z * b);
        }
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        // Annotations and scores use the stored (rounded) embedding.
        let mut y = spec.bias + spec.noise * rng.sample::<f64, _>(StandardNormal);
        for ((u, w), attr) in directions
            .iter()
            .zip(&spec.weights)
            .zip(attributes.iter_mut())
        {
            let proj: f64 = x32.iter().zip(u).map(|(&a, b)| f64::from(a) * b).sum();
            attr.insert(id.clone(), proj);
            y += w * proj;
        }
        scores.insert(id.clone(), y);
        data.extend(x32);
    }

    let mut set = EmbeddingSet::new(spec.dim, ids, data)?.with_scores(scores)?;
    for (i, attr) in attributes.into_iter().enumerate() {
        set = set.with_attribute(concept_name(i), attr)?;
    }
    Ok(set)
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticTask> {
    if spec.weights.is_empty() || spec.weights.len() > spec.dim {
        return Err(Error::invalid("need between 1 and dim planted concepts"));
    }
    if spec.train < 2 || spec.test < 2 {
        return Err(Error::invalid(
            "train and test splits need at least two items",
        ));
    }
    let mut rng = seeded_rng(spec.seed);
    let directions = orthonormal(&mut rng, spec.weights.len(), spec.dim);
    let train = sample_split(&mut rng, "train", spec.train, spec, &directions)?;
    let test = sample_split(&mut rng, "test", spec.test, spec, &directions)?;
    let concepts = directions
        .into_iter()
        .zip(&spec.weights)
        .enumerate()
        .map(|(i, (direction, &weight))| PlantedConcept {
            name: concept_name(i),
            direction,
            weight,
        })
        .collect();
    Ok(SyntheticTask {
        train,
        test,
        truth: SyntheticTruth {
            spec: spec.clone(),
            concepts,
        },
    })
}
