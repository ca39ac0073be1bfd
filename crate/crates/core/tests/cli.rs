use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use concept_lens::dataset::{write_embedding_set, EmbeddingSet};

fn concept_lens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concept-lens"))
        .args(args)
        .output()
        .unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const AADB_ATTRIBUTES: [&str; 11] = [
    "BalacingElements",
    "ColorHarmony",
    "Content",
    "DoF",
    "Light",
    "MotionBlur",
    "Object",
    "Repetition",
    "RuleOfThirds",
    "Symmetry",
    "VividColor",
];

/// 400 items in 16 dimensions; attribute `k` is a noisy reading of
/// coordinate `k`.
fn annotated_set(dir: &Path) -> String {
    let rows: Vec<(String, Vec<f32>)> = (0..400)
        .map(|i| {
            let v = (0..16)
                .map(|j| {
                    (((i * 37 + j * 101) % 97) as f32 / 48.0 - 1.0) + ((i * j) % 5) as f32 * 0.01
                })
                .collect();
            (format!("img{i:04}"), v)
        })
        .collect();
    let mut set = EmbeddingSet::from_rows(16, rows.clone()).unwrap();
    for (k, name) in AADB_ATTRIBUTES.iter().enumerate() {
        let values: BTreeMap<String, f64> = rows
            .iter()
            .map(|(id, v)| (id.clone(), f64::from(v[k]) + 0.001 * (id.len() + k) as f64))
            .collect();
        set = set.with_attribute(*name, values).unwrap();
    }
    let scores = rows
        .iter()
        .map(|(id, v)| (id.clone(), f64::from(v[0] - v[3] + 0.5 * v[8])))
        .collect();
    let set = set.with_scores(scores).unwrap();
    let base = path(dir, "aadb_like");
    write_embedding_set(&set, &base).unwrap();
    base
}

#[test]
fn eval_on_identical_files_reports_perfect_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let file = path(dir.path(), "scores.csv");
    std::fs::write(&file, "id,score\na,1.0\nb,2.5\nc,2.0\nd,7.0\n").unwrap();
    let out = concept_lens(&["eval", "--pred", &file, "--truth", &file]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("srcc=1.0 plcc=1.0"), "{stdout}");
}

#[test]
fn learn_cavs_with_the_aadb_config_writes_eleven_concepts() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = annotated_set(dir.path());
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/aadb.json");
    let cavs = path(dir.path(), "cavs.json");
    let out = concept_lens(&[
        "learn-cavs",
        "--config",
        config.to_str().unwrap(),
        "--embeddings",
        &embeddings,
        "--out",
        &cavs,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let store: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cavs).unwrap()).unwrap();
    let names: Vec<&str> = store["concepts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, AADB_ATTRIBUTES);
    assert_eq!(store["concept_sets"].as_array().unwrap().len(), 11);
    assert_eq!(store["provenance"]["rng"], "chacha8");

    let model = path(dir.path(), "model.json");
    let fit = concept_lens(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--embeddings",
        &embeddings,
        "--cavs",
        &cavs,
        "--out",
        &model,
    ]);
    assert!(
        fit.status.success(),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );
    let weights = std::fs::read_to_string(dir.path().join("model.weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 1 + 11 + 1);
    assert!(weights.lines().last().unwrap().starts_with("(bias),"));
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "nope");
    let out = concept_lens(&[
        "fit",
        "--embeddings",
        &missing,
        "--cavs",
        &missing,
        "--out",
        &missing,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("concept-lens fit"));

    assert_eq!(
        concept_lens(&["fit", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(concept_lens(&[]).status.code(), Some(2));

    let config = path(dir.path(), "sampled.json");
    std::fs::write(
        &config,
        r#"{"attribute_groups":{"g":["a","b"]},"concepts":[{"name":"a","sampled":{"group":"g","pos_count":2,"per_other_count":1}}]}"#,
    )
    .unwrap();
    let out = concept_lens(&[
        "learn-cavs",
        "--config",
        &config,
        "--embeddings",
        &missing,
        "--out",
        &missing,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn eval_rejects_constant_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let truth = path(dir.path(), "truth.csv");
    let pred = path(dir.path(), "pred.csv");
    std::fs::write(&truth, "id,score\na,1\nb,2\nc,3\n").unwrap();
    std::fs::write(&pred, "id,score\na,4\nb,4\nc,4\n").unwrap();
    let out = concept_lens(&["eval", "--pred", &pred, "--truth", &truth]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("undefined correlation"));
}
