//! The `concept-lens` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cav::{build_subspace, train_cav, ConceptSubspace};
use crate::config::{concept_seed, ConceptDef, ConceptSource, PipelineConfig};
use crate::dataset::{load_embedding_set, write_embedding_set, EmbeddingSet, RNG_NAME};
use crate::error::{Error, Result};
use crate::interp_model::{
    cross_validate, explain, fit_sparse_linear, predict_interpretable, InterpretableModel,
};
use crate::metrics::{evaluate, PairedScores};
use crate::report::{top_concepts, weight_report, write_explanations_csv, Explanation};
use crate::residual::{fit_residual, predict_hybrid, HybridModel};
use crate::subspace::{project_batch, write_projections_csv};
use crate::synthetic::{concept_name, generate, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(
    name = "concept-lens",
    version,
    about = "Concept-based interpretable aesthetic scoring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cavs: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub top: Option<usize>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub ridge: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select concept example sets and train one CAV per concept.
    LearnCavs,
    /// Fit the interpretable model on concept projections.
    Fit,
    /// Fit the residual corrector with the interpretable model frozen.
    FitResidual,
    /// Write per-item predictions and concept projections as CSV.
    Predict,
    /// Write per-item contribution tables as JSON and CSV.
    Explain {
        /// Only explain this item.
        #[arg(long)]
        id: Option<String>,
    },
    /// Compare predictions with ground truth (SRCC/PLCC).
    Eval {
        /// Prediction CSV with an `id` column.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth CSV; defaults to the scores in --embeddings.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Prediction column (default: `score` if present, else the last).
        #[arg(long)]
        column: Option<String>,
    },
    /// Write a synthetic task with planted concepts.
    GenSynthetic {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 2000)]
        train: usize,
        #[arg(long, default_value_t = 500)]
        test: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::LearnCavs => "learn-cavs",
            Command::Fit => "fit",
            Command::FitResidual => "fit-residual",
            Command::Predict => "predict",
            Command::Explain { .. } => "explain",
            Command::Eval { .. } => "eval",
            Command::GenSynthetic { .. } => "gen-synthetic",
        }
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = cli.command.name();
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("concept-lens {name}: {e}");
            1
        }
    }
}

fn effective_config(common: &CommonArgs) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let p = &mut cfg.paths;
    if common.embeddings.is_some() {
        p.embeddings = common.embeddings.clone();
    }
    if common.cavs.is_some() {
        p.cavs = common.cavs.clone();
    }
    if common.model.is_some() {
        p.model = common.model.clone();
    }
    if common.out.is_some() {
        p.out = common.out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(top) = common.top {
        cfg.top = top;
    }
    if let Some(lambda) = common.lambda {
        cfg.lambda = lambda;
        cfg.cv = None;
    }
    if let Some(alpha) = common.alpha {
        cfg.alpha = alpha;
        cfg.cv = None;
    }
    if let Some(ridge) = common.ridge {
        cfg.ridge = ridge;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::invalid(format!("missing --{flag} (or the matching config path)")))
}

/// `dir/name.ext` -> `dir/name<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn provenance(command: &str, cfg: &PipelineConfig) -> Result<Value> {
    Ok(json!({
        "tool": "concept-lens",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "rng": RNG_NAME,
        "config": serde_json::to_value(cfg)?,
    }))
}

/// Serializes `value` (an object) with an extra `provenance` field.
fn with_provenance<T: Serialize>(value: &T, prov: Value) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(map) => {
            map.insert("provenance".into(), prov);
            Ok(v)
        }
        None => Err(Error::invalid("provenance can only be attached to objects")),
    }
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
}

enum LoadedModel {
    Interpretable(InterpretableModel),
    Hybrid(HybridModel),
}

impl LoadedModel {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text)?;
        if value.get("residual_weights").is_some() {
            Ok(Self::Hybrid(HybridModel::from_json(&text)?))
        } else {
            Ok(Self::Interpretable(InterpretableModel::from_json(&text)?))
        }
    }

    fn interpretable(&self) -> &InterpretableModel {
        match self {
            Self::Interpretable(m) => m,
            Self::Hybrid(h) => &h.interpretable,
        }
    }
}

/// Aligns the subspace with the model's concept order.
fn subspace_for(model: &InterpretableModel, subspace: &ConceptSubspace) -> Result<ConceptSubspace> {
    if subspace.names() == model.concept_names {
        Ok(subspace.clone())
    } else {
        subspace.select(&model.concept_names)
    }
}

fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = effective_config(&cli.common)?;
    let name = cli.command.name();
    match cli.command {
        Command::LearnCavs => learn_cavs(&cfg, name),
        Command::Fit => fit(&cfg, name),
        Command::FitResidual => fit_residual_cmd(&cfg, name),
        Command::Predict => predict(&cfg, name),
        Command::Explain { id } => explain_cmd(&cfg, name, id.as_deref()),
        Command::Eval {
            pred,
            truth,
            column,
        } => eval(&cfg, name, &pred, truth.as_deref(), column.as_deref(), out),
        Command::GenSynthetic { dim, train, test } => gen_synthetic(&cfg, dim, train, test, out),
    }
}

fn learn_cavs(cfg: &PipelineConfig, command: &str) -> Result<()> {
    if cfg.concepts.is_empty() {
        return Err(Error::invalid("config defines no concepts"));
    }
    let source = cfg
        .paths
        .concept_embeddings
        .as_ref()
        .or(cfg.paths.embeddings.as_ref());
    let source = required(&source.cloned(), "embeddings")?.to_path_buf();
    let out = required(&cfg.paths.out, "out")?;
    let mut set = load_embedding_set(&source)?;
    if let Some(ids) = &cfg.paths.concept_ids {
        set = set.restrict_to(&read_id_list(ids)?)?;
    }

    let pairs = cfg
        .concepts
        .iter()
        .map(|def| cfg.concept_pair(def, &set))
        .collect::<Result<Vec<_>>>()?;
    let base_seed = cfg.seed.unwrap_or(0);
    let cavs = pairs
        .par_iter()
        .map(|pair| {
            train_cav(
                pair,
                &set,
                &cfg.cav,
                concept_seed(base_seed, &pair.concept_name),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    for cav in &cavs {
        log::info!(
            "{}: train_accuracy={} converged={} epochs={}",
            cav.name,
            cav.train_accuracy,
            cav.diagnostics.converged,
            cav.diagnostics.epochs
        );
    }
    let subspace = build_subspace(cavs)?;

    #[derive(Serialize)]
    struct Store<'a> {
        #[serde(flatten)]
        subspace: &'a ConceptSubspace,
        concept_sets: &'a [crate::dataset::ConceptSetPair],
    }
    let store = Store {
        subspace: &subspace,
        concept_sets: &pairs,
    };
    write_json(out, &with_provenance(&store, provenance(command, cfg)?)?)
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(EmbeddingSet, ConceptSubspace)> {
    let set = load_embedding_set(required(&cfg.paths.embeddings, "embeddings")?)?;
    let subspace = ConceptSubspace::load(required(&cfg.paths.cavs, "cavs")?)?;
    Ok((set, subspace))
}

fn fit(cfg: &PipelineConfig, command: &str) -> Result<()> {
    let (set, subspace) = load_inputs(cfg)?;
    let out = required(&cfg.paths.out, "out")?;
    let scores = set.scores_in_order()?;
    let projections: Vec<_> = project_batch(&set, &subspace)?
        .into_iter()
        .map(|(_, p)| p)
        .collect();

    let (lambda, alpha, cv) = match &cfg.cv {
        Some(grid) => {
            let result = cross_validate(
                &projections,
                &scores,
                &grid.lambdas,
                &grid.alphas,
                grid.folds,
                cfg.seed.unwrap_or(0),
                &cfg.fit,
            )?;
            (result.lambda, result.alpha, Some(result))
        }
        None => (cfg.lambda, cfg.alpha, None),
    };
    let model = fit_sparse_linear(&projections, &scores, lambda, alpha, &cfg.fit)?;
    let prov = provenance(command, cfg)?;

    let mut doc = with_provenance(&model, prov.clone())?;
    if let Some(cv) = cv {
        doc["cross_validation"] = serde_json::to_value(cv)?;
    }
    write_json(out, &doc)?;

    let report = weight_report(&model);
    write_json(
        &sibling(out, ".weights.json"),
        &with_provenance(&report, prov)?,
    )?;
    write_text(
        &sibling(out, ".weights.csv"),
        &csv_string(|b| report.write_csv(b))?,
    )
}

fn fit_residual_cmd(cfg: &PipelineConfig, command: &str) -> Result<()> {
    let (set, subspace) = load_inputs(cfg)?;
    let out = required(&cfg.paths.out, "out")?;
    let model = match LoadedModel::load(required(&cfg.paths.model, "model")?)? {
        LoadedModel::Interpretable(m) => m,
        LoadedModel::Hybrid(h) => h.interpretable,
    };
    let subspace = subspace_for(&model, &subspace)?;
    let hybrid = fit_residual(&set, &subspace, &model, cfg.ridge)?;
    write_json(out, &with_provenance(&hybrid, provenance(command, cfg)?)?)
}

fn predict(cfg: &PipelineConfig, command: &str) -> Result<()> {
    let (set, subspace) = load_inputs(cfg)?;
    let out = required(&cfg.paths.out, "out")?;
    let model = LoadedModel::load(required(&cfg.paths.model, "model")?)?;
    let subspace = subspace_for(model.interpretable(), &subspace)?;
    let projections = project_batch(&set, &subspace)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    match &model {
        LoadedModel::Hybrid(h) => {
            w.write_record(["id", "interpretable", "residual_term", "hybrid"])?;
            for (id, v) in set.iter() {
                let p = predict_hybrid(h, v, &subspace)?;
                w.write_record([
                    id.to_string(),
                    p.interpretable.to_string(),
                    p.residual_term.to_string(),
                    p.hybrid.to_string(),
                ])?;
            }
        }
        LoadedModel::Interpretable(m) => {
            w.write_record(["id", "interpretable"])?;
            for (id, p) in &projections {
                w.write_record([id.clone(), predict_interpretable(m, p)?.to_string()])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_text(out, &String::from_utf8_lossy(&bytes))?;
    write_text(
        &sibling(out, ".projections.csv"),
        &csv_string(|b| write_projections_csv(b, &subspace.names(), &projections))?,
    )?;
    write_json(
        &sibling(out, ".provenance.json"),
        &provenance(command, cfg)?,
    )
}

fn explain_cmd(cfg: &PipelineConfig, command: &str, only: Option<&str>) -> Result<()> {
    let (set, subspace) = load_inputs(cfg)?;
    let out = required(&cfg.paths.out, "out")?;
    let model = LoadedModel::load(required(&cfg.paths.model, "model")?)?;
    let interp = model.interpretable();
    let subspace = subspace_for(interp, &subspace)?;
    if let Some(id) = only {
        if set.index_of(id).is_none() {
            return Err(Error::UnknownId(id.to_string()));
        }
    }
    let k = cfg.top.min(subspace.len());

    let mut records = Vec::new();
    for (id, projection) in project_batch(&set, &subspace)? {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let hybrid_pred = match &model {
            LoadedModel::Hybrid(h) => {
                Some(predict_hybrid(h, set.get(&id).unwrap(), &subspace)?.hybrid)
            }
            LoadedModel::Interpretable(_) => None,
        };
        records.push(Explanation {
            ground_truth: set.score(&id),
            interpretable_pred: predict_interpretable(interp, &projection)?,
            hybrid_pred,
            bias: interp.bias,
            contributions: explain(interp, &projection)?,
            top_concepts: top_concepts(interp, &projection, k)?,
            id,
        });
    }
    write_json(out, &records)?;
    write_text(
        &sibling(out, ".csv"),
        &csv_string(|b| write_explanations_csv(b, &records))?,
    )?;
    write_json(
        &sibling(out, ".provenance.json"),
        &provenance(command, cfg)?,
    )
}

fn read_score_csv(path: &Path, column: Option<&str>) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::invalid(format!("{}: no `id` column", path.display())))?;
    let col = match column {
        Some(c) => headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::invalid(format!("{}: no `{c}` column", path.display())))?,
        None => headers
            .iter()
            .position(|h| h == "score")
            .unwrap_or(headers.len() - 1),
    };
    if col == id_col {
        return Err(Error::invalid(format!(
            "{}: no score column",
            path.display()
        )));
    }
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record[id_col].to_string();
        let v: f64 = record[col]
            .parse()
            .map_err(|_| Error::invalid(format!("{}: bad score for `{id}`", path.display())))?;
        if map.insert(id.clone(), v).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(map)
}

fn eval(
    cfg: &PipelineConfig,
    command: &str,
    pred: &Path,
    truth: Option<&Path>,
    column: Option<&str>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let predictions = read_score_csv(pred, column)?;
    let truth = match truth {
        Some(path) => read_score_csv(path, None)?,
        None => {
            let set =
                load_embedding_set(required(&cfg.paths.embeddings, "truth or --embeddings")?)?;
            set.scores()
                .cloned()
                .ok_or(Error::MissingScores(set.len()))?
        }
    };
    let mut t = Vec::with_capacity(predictions.len());
    let mut p = Vec::with_capacity(predictions.len());
    for (id, v) in &predictions {
        let gt = truth.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        t.push(*gt);
        p.push(*v);
    }
    let result = evaluate(&PairedScores::new(t, p)?)?;
    let line = serde_json::to_string(&result)?;
    writeln!(stdout, "srcc={:?} plcc={:?}", result.srcc, result.plcc)
        .and_then(|_| writeln!(stdout, "{line}"))
        .map_err(|e| Error::io("<stdout>", e))?;
    if let Some(out) = &cfg.paths.out {
        write_json(out, &with_provenance(&result, provenance(command, cfg)?)?)?;
    }
    Ok(())
}

fn gen_synthetic(
    cfg: &PipelineConfig,
    dim: usize,
    train: usize,
    test: usize,
    stdout: &mut dyn Write,
) -> Result<()> {
    let out = required(&cfg.paths.out, "out")?;
    let spec = SyntheticSpec {
        dim,
        train,
        test,
        seed: cfg.seed.unwrap_or(0),
        ..SyntheticSpec::default()
    };
    let task = generate(&spec)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_embedding_set(&task.train, out.join("train"))?;
    write_embedding_set(&task.test, out.join("test"))?;
    write_json(&out.join("truth.json"), &task.truth)?;

    let all: Vec<usize> = (0..spec.weights.len()).collect();
    let kept: Vec<usize> = all.iter().copied().filter(|i| i % 2 == 0).collect();
    for (file, indices) in [("config.json", &all), ("config_withheld.json", &kept)] {
        let pipeline = PipelineConfig {
            seed: Some(spec.seed),
            concepts: indices
                .iter()
                .map(|&i| ConceptDef {
                    name: concept_name(i),
                    source: ConceptSource::Ranked {
                        attribute: None,
                        k: 100,
                    },
                })
                .collect(),
            ..PipelineConfig::default()
        };
        write_json(&out.join(file), &pipeline)?;
    }
    writeln!(
        stdout,
        "wrote synthetic task ({} train / {} test, dim {}) to {}",
        train,
        test,
        dim,
        out.display()
    )
    .map_err(|e| Error::io("<stdout>", e))
}
