//! Pipeline configuration file.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "paths": { "embeddings": "train", "cavs": "cavs.json" },
//!   "attribute_groups": { "genre": ["abstract", "portrait", "landscape"] },
//!   "concepts": [
//!     { "name": "RuleOfThirds", "ranked": { "k": 100 } },
//!     { "name": "portrait", "sampled": { "group": "genre", "pos_count": 150, "per_other_count": 25 } }
//!   ],
//!   "lambda": 0.01,
//!   "alpha": 0.5,
//!   "ridge": 0.001
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config
//! file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cav::CavConfig;
use crate::dataset::{
    sample_binary_concept_sets, select_ranked_concept_sets, ConceptSetPair, EmbeddingSet,
};
use crate::error::{Error, Result};
use crate::interp_model::{FitConfig, DEFAULT_ALPHA, DEFAULT_LAMBDA};
use crate::residual::DEFAULT_RIDGE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptSource {
    /// Top/bottom-k by a real-valued attribute (defaults to the concept name).
    Ranked {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        attribute: Option<String>,
        k: usize,
    },
    /// Random draws over binary class labels; negatives come from the other
    /// members of `group`.
    Sampled {
        group: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        pos_count: usize,
        per_other_count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDef {
    pub name: String,
    #[serde(flatten)]
    pub source: ConceptSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Scored embeddings used for fitting and prediction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Annotated embeddings for concept example selection; defaults to
    /// `embeddings`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concept_embeddings: Option<PathBuf>,
    /// Optional newline-separated id list restricting concept example
    /// selection (e.g. to the training split).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concept_ids: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavs: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub concepts: Vec<ConceptDef>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub attribute_groups: BTreeMap<String, Vec<String>>,
    pub cav: CavConfig,
    pub fit: FitConfig,
    pub lambda: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvConfig>,
    pub ridge: f64,
    pub top: usize,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            concepts: Vec::new(),
            attribute_groups: BTreeMap::new(),
            cav: CavConfig::default(),
            fit: FitConfig::default(),
            lambda: DEFAULT_LAMBDA,
            alpha: DEFAULT_ALPHA,
            cv: None,
            ridge: DEFAULT_RIDGE,
            top: 4,
            paths: Paths::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

/// 64-bit FNV-1a, used to derive stable per-concept seeds from names.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn concept_seed(seed: u64, name: &str) -> u64 {
    seed ^ fnv1a(name)
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.embeddings,
            &mut p.concept_embeddings,
            &mut p.concept_ids,
            &mut p.cavs,
            &mut p.model,
            &mut p.out,
        ] {
            resolve(base, slot);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for c in &self.concepts {
            if !names.insert(c.name.as_str()) {
                return Err(Error::DuplicateConcept(c.name.clone()));
            }
            if let ConceptSource::Sampled { group, .. } = &c.source {
                if self.seed.is_none() {
                    return Err(Error::invalid(format!(
                        "concept `{}` is sampled, so a seed is required",
                        c.name
                    )));
                }
                if !self.attribute_groups.contains_key(group) {
                    return Err(Error::invalid(format!(
                        "concept `{}` refers to unknown attribute group `{group}`",
                        c.name
                    )));
                }
            }
        }
        if !(self.lambda >= 0.0) || !(0.0..=1.0).contains(&self.alpha) || !(self.ridge >= 0.0) {
            return Err(Error::invalid("lambda, alpha or ridge out of range"));
        }
        Ok(())
    }

    /// Builds the positive/negative example sets for one concept.
    pub fn concept_pair(&self, def: &ConceptDef, set: &EmbeddingSet) -> Result<ConceptSetPair> {
        let mut pair = match &def.source {
            ConceptSource::Ranked { attribute, k } => {
                select_ranked_concept_sets(set, attribute.as_deref().unwrap_or(&def.name), *k)?
            }
            ConceptSource::Sampled {
                group,
                target,
                pos_count,
                per_other_count,
            } => {
                let siblings = self
                    .attribute_groups
                    .get(group)
                    .ok_or_else(|| Error::invalid(format!("unknown attribute group `{group}`")))?;
                let seed = self
                    .seed
                    .ok_or_else(|| Error::invalid("sampled concepts need a seed"))?;
                sample_binary_concept_sets(
                    set,
                    target.as_deref().unwrap_or(&def.name),
                    siblings,
                    *pos_count,
                    *per_other_count,
                    concept_seed(seed, &def.name),
                )?
            }
        };
        pair.concept_name = def.name.clone();
        Ok(pair)
    }
}
