//! Embedding sets on disk and construction of positive/negative concept
//! example sets.
//!
//! The canonical on-disk layout is a pair of files sharing a base name:
//! `<name>.manifest.json` (ids, dimension, optional scores and attribute
//! annotations) and `<name>.f32` (row-major little-endian `f32` payload, no
//! header). A CSV fallback (`id,v0,..,v{d-1}[,score]`) is accepted for small
//! hand-written fixtures.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Name of the generator used for every seeded draw in the toolkit.
pub const RNG_NAME: &str = "chacha8";

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A table of `dim`-dimensional vectors keyed by unique ids, with optional
/// per-item scores and named attribute annotations.
///
/// Vectors are stored as `f32` exactly as they appear in the canonical file,
/// so a write/load round trip is bit-exact. All arithmetic downstream widens
/// to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
    scores: Option<BTreeMap<String, f64>>,
    attributes: BTreeMap<String, BTreeMap<String, f64>>,
}

impl EmbeddingSet {
    /// Builds a set from ids and a row-major payload of `ids.len() * dim`
    /// values.
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let expected = ids.len() * dim;
        if data.len() != expected {
            return Err(Error::PayloadSize {
                expected: expected * 4,
                found: data.len() * 4,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        for (i, row) in data.chunks_exact(dim).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(ids[i].clone()));
            }
        }
        Ok(Self {
            dim,
            ids,
            data,
            index,
            scores: None,
            attributes: BTreeMap::new(),
        })
    }

    /// Builds a set from `(id, vector)` rows.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (id, v) in rows {
            let id = id.into();
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            ids.push(id);
            data.extend_from_slice(&v);
        }
        Self::new(dim, ids, data)
    }

    pub fn with_scores(mut self, scores: BTreeMap<String, f64>) -> Result<Self> {
        self.check_known(scores.keys())?;
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn with_attribute(
        mut self,
        name: impl Into<String>,
        values: BTreeMap<String, f64>,
    ) -> Result<Self> {
        self.check_known(values.keys())?;
        self.attributes.insert(name.into(), values);
        Ok(self)
    }

    fn check_known<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Result<()> {
        for id in ids {
            if !self.index.contains_key(id) {
                return Err(Error::UnknownId(id.clone()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row-major payload, `len() * dim()` values.
    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index_of(id).map(|i| self.vector(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.ids
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(id, v)| (id.as_str(), v))
    }

    pub fn scores(&self) -> Option<&BTreeMap<String, f64>> {
        self.scores.as_ref()
    }

    pub fn score(&self, id: &str) -> Option<f64> {
        self.scores.as_ref().and_then(|s| s.get(id).copied())
    }

    /// Scores in item order; fails if any item lacks one.
    pub fn scores_in_order(&self) -> Result<Vec<f64>> {
        let missing = self
            .ids
            .iter()
            .filter(|id| self.score(id).is_none())
            .count();
        if missing > 0 {
            return Err(Error::MissingScores(missing));
        }
        Ok(self.ids.iter().map(|id| self.score(id).unwrap()).collect())
    }

    pub fn attributes(&self) -> &BTreeMap<String, BTreeMap<String, f64>> {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&BTreeMap<String, f64>> {
        self.attributes.get(name)
    }

    /// Keeps only the listed ids (in this set's order), together with their
    /// scores and annotations. Used to restrict concept selection or fitting
    /// to one split.
    pub fn restrict_to<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let mut wanted = BTreeSet::new();
        for id in keep {
            let id = id.as_ref();
            if !self.index.contains_key(id) {
                return Err(Error::UnknownId(id.to_string()));
            }
            wanted.insert(id);
        }
        let mut ids = Vec::with_capacity(wanted.len());
        let mut data = Vec::with_capacity(wanted.len() * self.dim);
        for (id, v) in self.iter() {
            if wanted.contains(id) {
                ids.push(id.to_string());
                data.extend_from_slice(v);
            }
        }
        let mut out = Self::new(self.dim, ids, data)?;
        let filter = |m: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
            m.iter()
                .filter(|(k, _)| wanted.contains(k.as_str()))
                .map(|(k, v)| (k.clone(), *v))
                .collect()
        };
        out.scores = self.scores.as_ref().map(filter);
        out.attributes = self
            .attributes
            .iter()
            .map(|(k, m)| (k.clone(), filter(m)))
            .collect();
        Ok(out)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dim: usize,
    count: usize,
    ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<BTreeMap<String, BTreeMap<String, f64>>>,
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Resolves `<name>`, `<name>.manifest.json` or `<name>.f32` to the base name.
fn base_name(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    for ext in [".manifest.json", ".f32"] {
        if let Some(stripped) = s.strip_suffix(ext) {
            return PathBuf::from(stripped);
        }
    }
    path.to_path_buf()
}

pub fn manifest_path(base: &Path) -> PathBuf {
    with_suffix(&base_name(base), ".manifest.json")
}

pub fn payload_path(base: &Path) -> PathBuf {
    with_suffix(&base_name(base), ".f32")
}

/// Loads an embedding set from the canonical manifest + payload pair, or
/// from CSV when the path ends in `.csv`.
pub fn load_embedding_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        return load_csv(path);
    }
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: mpath.clone(),
        reason: e.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Manifest {
            path: mpath,
            reason: format!("unsupported format_version {}", manifest.format_version),
        });
    }
    if manifest.dim == 0 {
        return Err(Error::Manifest {
            path: mpath,
            reason: "dim must be positive".into(),
        });
    }
    if manifest.ids.len() != manifest.count {
        return Err(Error::Manifest {
            path: mpath,
            reason: format!(
                "count is {} but {} ids are listed",
                manifest.count,
                manifest.ids.len()
            ),
        });
    }

    let ppath = payload_path(path);
    let bytes = fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
    let expected = manifest.count * manifest.dim * 4;
    if bytes.len() != expected {
        return Err(Error::PayloadSize {
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();

    let mut set = EmbeddingSet::new(manifest.dim, manifest.ids, data)?;
    if let Some(scores) = manifest.scores {
        set = set.with_scores(scores)?;
    }
    for (name, values) in manifest.attributes.unwrap_or_default() {
        set = set.with_attribute(name, values)?;
    }
    Ok(set)
}

/// Writes `<base>.manifest.json` and `<base>.f32`.
pub fn write_embedding_set(set: &EmbeddingSet, base: impl AsRef<Path>) -> Result<()> {
    let base = base_name(base.as_ref());
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dim: set.dim,
        count: set.len(),
        ids: set.ids.clone(),
        scores: set.scores.clone(),
        attributes: if set.attributes.is_empty() {
            None
        } else {
            Some(set.attributes.clone())
        },
    };
    let mpath = manifest_path(&base);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;

    let mut bytes = Vec::with_capacity(set.data.len() * 4);
    for v in &set.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let ppath = payload_path(&base);
    fs::write(&ppath, bytes).map_err(|e| Error::io(&ppath, e))
}

fn load_csv(path: &Path) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Manifest {
                path: path.to_path_buf(),
                reason: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers()?.clone();
    let bad = |reason: String| Error::Manifest {
        path: path.to_path_buf(),
        reason,
    };
    if headers.get(0) != Some("id") {
        return Err(bad("first csv column must be `id`".into()));
    }
    let has_score = headers.iter().next_back() == Some("score");
    let dim = headers.len() - 1 - usize::from(has_score);
    if dim == 0 {
        return Err(bad("csv has no vector columns".into()));
    }

    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut scores = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record[0].to_string();
        for field in record.iter().skip(1).take(dim) {
            let v: f32 = field
                .parse()
                .map_err(|_| bad(format!("bad number `{field}` for id `{id}`")))?;
            data.push(v);
        }
        if has_score {
            let field = &record[dim + 1];
            let s: f64 = field
                .parse()
                .map_err(|_| bad(format!("bad score `{field}` for id `{id}`")))?;
            scores.insert(id.clone(), s);
        }
        ids.push(id);
    }
    let set = EmbeddingSet::new(dim, ids, data)?;
    if has_score {
        set.with_scores(scores)
    } else {
        Ok(set)
    }
}

/// Positive and negative example ids for one concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSetPair {
    pub concept_name: String,
    pub positive_ids: Vec<String>,
    pub negative_ids: Vec<String>,
    /// Generator name and seed for sampled pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingInfo {
    pub rng: String,
    pub seed: u64,
}

impl ConceptSetPair {
    pub fn new(
        concept_name: impl Into<String>,
        positive_ids: Vec<String>,
        negative_ids: Vec<String>,
    ) -> Result<Self> {
        if positive_ids.is_empty() {
            return Err(Error::EmptyClass("positive set"));
        }
        if negative_ids.is_empty() {
            return Err(Error::EmptyClass("negative set"));
        }
        let pos: BTreeSet<&String> = positive_ids.iter().collect();
        if let Some(id) = negative_ids.iter().find(|id| pos.contains(id)) {
            return Err(Error::invalid(format!(
                "id `{id}` is in both positive and negative sets"
            )));
        }
        Ok(Self {
            concept_name: concept_name.into(),
            positive_ids,
            negative_ids,
            sampling: None,
        })
    }
}

/// Takes the `k` items with the highest attribute value as positives and
/// the `k` lowest as negatives. Ties are broken by ascending id. Items with
/// no (or a non-finite) value for the attribute are not eligible.
pub fn select_ranked_concept_sets(
    set: &EmbeddingSet,
    attribute: &str,
    k: usize,
) -> Result<ConceptSetPair> {
    let values = set
        .attribute(attribute)
        .ok_or_else(|| Error::MissingAttribute(attribute.to_string()))?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut annotated: Vec<(&str, f64)> = values
        .iter()
        .filter(|(_, v)| v.is_finite())
        .map(|(id, v)| (id.as_str(), *v))
        .collect();
    if 2 * k > annotated.len() {
        return Err(Error::Insufficient {
            what: attribute.to_string(),
            needed: 2 * k,
            available: annotated.len(),
        });
    }

    annotated.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let positive_ids: Vec<String> = annotated[..k]
        .iter()
        .map(|(id, _)| id.to_string())
        .collect();
    let chosen: BTreeSet<&str> = annotated[..k].iter().map(|(id, _)| *id).collect();

    let mut rest: Vec<(&str, f64)> = annotated
        .into_iter()
        .filter(|(id, _)| !chosen.contains(id))
        .collect();
    rest.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let negative_ids = rest[..k].iter().map(|(id, _)| id.to_string()).collect();

    ConceptSetPair::new(attribute, positive_ids, negative_ids)
}

fn binary_members<'a>(set: &'a EmbeddingSet, attribute: &str) -> Result<BTreeSet<&'a str>> {
    let values = set
        .attribute(attribute)
        .ok_or_else(|| Error::MissingAttribute(attribute.to_string()))?;
    let mut members = BTreeSet::new();
    for (id, v) in values {
        if *v == 1.0 {
            members.insert(id.as_str());
        } else if *v != 0.0 {
            return Err(Error::invalid(format!(
                "attribute `{attribute}` is not binary (id `{id}` has {v})"
            )));
        }
    }
    Ok(members)
}

fn draw<'a>(
    rng: &mut ChaCha8Rng,
    pool: &[&'a str],
    amount: usize,
    what: &str,
) -> Result<Vec<&'a str>> {
    if amount > pool.len() {
        return Err(Error::Insufficient {
            what: what.to_string(),
            needed: amount,
            available: pool.len(),
        });
    }
    let mut picked: Vec<&str> = index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Random construction for binary (class-membership) annotations: draws
/// `pos_count` members of `target` as positives, and `per_other_count`
/// members of each sibling class as negatives.
///
/// Items labelled with the target are never negatives, and an item belonging
/// to several siblings is drawn at most once. Draws run over ids in
/// ascending order with a [`RNG_NAME`] generator seeded by `seed`, so the
/// result does not depend on item order in `set`. Siblings are visited in
/// name order; `target` is skipped if it appears among them.
pub fn sample_binary_concept_sets<S: AsRef<str>>(
    set: &EmbeddingSet,
    target: &str,
    siblings: &[S],
    pos_count: usize,
    per_other_count: usize,
    seed: u64,
) -> Result<ConceptSetPair> {
    let target_members = binary_members(set, target)?;
    let mut sibling_names: Vec<&str> = siblings
        .iter()
        .map(AsRef::as_ref)
        .filter(|s| *s != target)
        .collect();
    sibling_names.sort_unstable();
    sibling_names.dedup();
    if sibling_names.is_empty() {
        return Err(Error::invalid(format!("no sibling classes for `{target}`")));
    }

    let mut rng = seeded_rng(seed);
    let pool: Vec<&str> = target_members.iter().copied().collect();
    let positives = draw(&mut rng, &pool, pos_count, target)?;

    let mut taken: BTreeSet<&str> = BTreeSet::new();
    let mut negatives = Vec::with_capacity(per_other_count * sibling_names.len());
    for sibling in sibling_names {
        let members = binary_members(set, sibling)?;
        let pool: Vec<&str> = members
            .into_iter()
            .filter(|id| !target_members.contains(id) && !taken.contains(id))
            .collect();
        let picked = draw(&mut rng, &pool, per_other_count, sibling)?;
        taken.extend(picked.iter().copied());
        negatives.extend(picked);
    }

    let mut pair = ConceptSetPair::new(
        target,
        positives.into_iter().map(String::from).collect(),
        negatives.into_iter().map(String::from).collect(),
    )?;
    pair.sampling = Some(SamplingInfo {
        rng: RNG_NAME.to_string(),
        seed,
    });
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(values: &[(&str, f64)]) -> EmbeddingSet {
        let set = EmbeddingSet::from_rows(
            1,
            values.iter().map(|(id, _)| (id.to_string(), vec![0.0f32])),
        )
        .unwrap();
        let attr = values.iter().map(|(id, v)| (id.to_string(), *v)).collect();
        set.with_attribute("a", attr).unwrap()
    }

    #[test]
    fn ranked_selection_orders_by_value() {
        let set = set_with(&[("a", 0.9), ("b", 0.1), ("c", -0.8), ("d", 0.5)]);
        let pair = select_ranked_concept_sets(&set, "a", 1).unwrap();
        assert_eq!(pair.positive_ids, ["a"]);
        assert_eq!(pair.negative_ids, ["c"]);
    }

    #[test]
    fn ranked_selection_breaks_ties_by_id() {
        let set = set_with(&[("d", -0.5), ("c", -0.5), ("b", 0.5), ("a", 0.5)]);
        let pair = select_ranked_concept_sets(&set, "a", 1).unwrap();
        assert_eq!(pair.positive_ids, ["a"]);
        assert_eq!(pair.negative_ids, ["c"]);
    }

    #[test]
    fn ranked_selection_all_tied_stays_disjoint() {
        let set = set_with(&[("a", 1.0), ("b", 1.0)]);
        let pair = select_ranked_concept_sets(&set, "a", 1).unwrap();
        assert_eq!(pair.positive_ids, ["a"]);
        assert_eq!(pair.negative_ids, ["b"]);
    }

    #[test]
    fn ranked_selection_errors() {
        let set = set_with(&[("a", 1.0), ("b", 0.0), ("c", 2.0)]);
        assert!(matches!(
            select_ranked_concept_sets(&set, "a", 2),
            Err(Error::Insufficient {
                needed: 4,
                available: 3,
                ..
            })
        ));
        assert!(matches!(
            select_ranked_concept_sets(&set, "nope", 1),
            Err(Error::MissingAttribute(_))
        ));
    }

    #[test]
    fn ranked_selection_skips_missing_values() {
        let set = EmbeddingSet::from_rows(
            1,
            ["a", "b", "c"]
                .iter()
                .map(|id| (id.to_string(), vec![0.0f32])),
        )
        .unwrap();
        let attr = [("a".to_string(), 1.0), ("c".to_string(), f64::NAN)]
            .into_iter()
            .collect();
        let set = set.with_attribute("x", attr).unwrap();
        assert!(matches!(
            select_ranked_concept_sets(&set, "x", 1),
            Err(Error::Insufficient { available: 1, .. })
        ));
    }

    #[test]
    fn rejects_duplicate_ids_and_non_finite() {
        let dup = EmbeddingSet::from_rows(1, [("a", vec![1.0f32]), ("a", vec![2.0])]);
        assert!(matches!(dup, Err(Error::DuplicateId(_))));
        let nan = EmbeddingSet::from_rows(1, [("a", vec![f32::NAN])]);
        assert!(matches!(nan, Err(Error::NonFinite(_))));
        let inf = EmbeddingSet::from_rows(1, [("a", vec![f32::INFINITY])]);
        assert!(matches!(inf, Err(Error::NonFinite(_))));
    }

    #[test]
    fn annotations_must_reference_known_ids() {
        let set = EmbeddingSet::from_rows(1, [("a", vec![1.0f32])]).unwrap();
        let scores = [("zz".to_string(), 1.0)].into_iter().collect();
        assert!(matches!(set.with_scores(scores), Err(Error::UnknownId(_))));
    }

    #[test]
    fn concept_pair_invariants() {
        assert!(ConceptSetPair::new("x", vec![], vec!["a".into()]).is_err());
        assert!(ConceptSetPair::new("x", vec!["a".into()], vec![]).is_err());
        assert!(ConceptSetPair::new("x", vec!["a".into()], vec!["a".into()]).is_err());
    }

    #[test]
    fn restrict_keeps_annotations() {
        let set = set_with(&[("a", 0.9), ("b", 0.1), ("c", -0.8)]);
        let sub = set.restrict_to(&["c", "a"]).unwrap();
        assert_eq!(sub.ids(), ["a", "c"]);
        assert_eq!(sub.attribute("a").unwrap().len(), 2);
        assert!(set.restrict_to(&["zz"]).is_err());
    }
}
