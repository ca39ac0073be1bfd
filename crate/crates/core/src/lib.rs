//! Concept-based interpretable aesthetic scoring.
//!
//! The pipeline has three stages:
//!
//! 1. [`cav`]: learn one concept activation vector per human-nameable
//!    concept from positive/negative example embeddings (built by
//!    [`dataset`]), and stack them into a [`cav::ConceptSubspace`].
//! 2. [`subspace`] + [`interp_model`]: project embeddings onto the concept
//!    axes and fit a sparse linear scorer over the projections.
//! 3. [`residual`]: with the scorer frozen, fit a linear corrector on the raw
//!    embeddings to its residuals.
//!
//! [`metrics`] evaluates predictions (SRCC/PLCC), [`report`] emits weight
//! rankings and per-item explanations, and [`cli`] wires everything into the
//! `concept-lens` executable.

pub mod cav;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod interp_model;
pub mod metrics;
pub mod report;
pub mod residual;
pub mod subspace;
pub mod synthetic;

pub use cav::{build_subspace, train_cav, CavConfig, ConceptSubspace, ConceptVector};
pub use dataset::{
    load_embedding_set, sample_binary_concept_sets, select_ranked_concept_sets,
    write_embedding_set, ConceptSetPair, EmbeddingSet,
};
pub use error::{Error, Result};
pub use interp_model::{
    explain, fit_sparse_linear, predict_interpretable, FitConfig, InterpretableModel,
};
pub use metrics::{plcc, srcc, PairedScores};
pub use report::{top_concepts, weight_report, WeightReport};
pub use residual::{fit_residual, predict_hybrid, HybridModel, HybridPrediction};
pub use subspace::{project, project_batch, ConceptProjection};
