use std::collections::BTreeMap;
use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use concept_lens::cav::{build_subspace, CavConfig, CavDiagnostics, ConceptVector};
use concept_lens::{fit_residual, fit_sparse_linear, project_batch, EmbeddingSet, FitConfig};
use concept_lens_ffi::*;

fn axis(name: &str, direction: Vec<f64>) -> ConceptVector {
    ConceptVector {
        name: name.into(),
        direction,
        offset: 0.25,
        train_accuracy: 1.0,
        config: CavConfig::default(),
        seed: 0,
        diagnostics: CavDiagnostics {
            converged: true,
            epochs: 1,
        },
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    cavs: CString,
    model: CString,
    hybrid: CString,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let subspace = build_subspace(vec![
        axis("a", vec![2.0, 0.0, 0.0]),
        axis("b", vec![0.0, 1.0, 1.0]),
    ])
    .unwrap();
    let rows: Vec<(String, Vec<f32>)> = (0..12)
        .map(|i| {
            let x = i as f32;
            (
                format!("i{i:02}"),
                vec![x * 0.5 - 2.0, (x * 1.7).sin(), (x * 0.3).cos()],
            )
        })
        .collect();
    let scores: BTreeMap<String, f64> = rows
        .iter()
        .map(|(id, v)| {
            (
                id.clone(),
                1.0 + 0.8 * f64::from(v[0]) - 0.3 * f64::from(v[1]) + 0.2 * f64::from(v[2]),
            )
        })
        .collect();
    let set = EmbeddingSet::from_rows(3, rows)
        .unwrap()
        .with_scores(scores)
        .unwrap();
    let projections: Vec<_> = project_batch(&set, &subspace)
        .unwrap()
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let model = fit_sparse_linear(
        &projections,
        &set.scores_in_order().unwrap(),
        0.0,
        0.5,
        &FitConfig::default(),
    )
    .unwrap();
    let hybrid = fit_residual(&set, &subspace, &model, 1e-3).unwrap();

    let write = |name: &str, text: String| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        CString::new(p.to_str().unwrap()).unwrap()
    };
    Fixture {
        cavs: write("cavs.json", subspace.to_json().unwrap()),
        model: write("model.json", model.to_json().unwrap()),
        hybrid: write("hybrid.json", hybrid.to_json().unwrap()),
        _dir: dir,
    }
}

#[test]
fn subspace_handle_round_trip() {
    let f = fixture();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(cl_subspace_load(f.cavs.as_ptr(), &mut s), ClStatus::Ok);
        assert!(cl_last_error_message().is_null());
        assert_eq!(cl_subspace_dim(s), 3);
        assert_eq!(cl_subspace_len(s), 2);
        assert_eq!(
            CStr::from_ptr(cl_subspace_concept_name(s, 1))
                .to_str()
                .unwrap(),
            "b"
        );
        assert!(cl_subspace_concept_name(s, 2).is_null());

        let e = [1.0f32, 2.0, 4.0];
        let mut out = [0.0f64; 2];
        assert_eq!(
            cl_project(s, e.as_ptr(), 3, out.as_mut_ptr(), 2),
            ClStatus::Ok
        );
        assert_eq!(out, [0.5, 3.0]);

        assert_eq!(
            cl_project(s, e.as_ptr(), 2, out.as_mut_ptr(), 2),
            ClStatus::DimensionMismatch
        );
        let msg = CStr::from_ptr(cl_last_error_message()).to_str().unwrap();
        assert!(msg.contains("dimension mismatch"), "{msg}");
        assert_eq!(
            cl_project(s, e.as_ptr(), 3, out.as_mut_ptr(), 1),
            ClStatus::InvalidArgument
        );
        cl_subspace_free(s);
    }
}

#[test]
fn predictions_match_between_model_kinds() {
    let f = fixture();
    unsafe {
        let mut s = ptr::null_mut();
        let mut m = ptr::null_mut();
        let mut h = ptr::null_mut();
        assert_eq!(cl_subspace_load(f.cavs.as_ptr(), &mut s), ClStatus::Ok);
        assert_eq!(cl_model_load(f.model.as_ptr(), &mut m), ClStatus::Ok);
        assert_eq!(cl_model_load(f.hybrid.as_ptr(), &mut h), ClStatus::Ok);
        assert_eq!(cl_model_is_hybrid(m), 0);
        assert_eq!(cl_model_is_hybrid(h), 1);
        assert_eq!(cl_model_bias(m), cl_model_bias(h));

        let mut w = [0.0f64; 2];
        assert_eq!(cl_model_weights(m, w.as_mut_ptr(), 2), ClStatus::Ok);
        assert!(w.iter().all(|v| v.is_finite()));

        let e = [0.5f32, -0.2, 0.9];
        let mut pm = ClPrediction::default();
        let mut ph = ClPrediction::default();
        assert_eq!(cl_model_predict(m, s, e.as_ptr(), 3, &mut pm), ClStatus::Ok);
        assert_eq!(cl_model_predict(h, s, e.as_ptr(), 3, &mut ph), ClStatus::Ok);
        assert_eq!(pm.interpretable, ph.interpretable);
        assert_eq!(pm.hybrid, pm.interpretable);
        assert_eq!(ph.hybrid, ph.interpretable + ph.residual_term);

        cl_model_free(m);
        cl_model_free(h);
        cl_subspace_free(s);
    }
}

#[test]
fn correlations() {
    let t = [1.0, 2.0, 3.0, 4.0, 5.0];
    let p = [1.0, 3.0, 2.0, 5.0, 4.0];
    let mut r = 0.0;
    unsafe {
        assert_eq!(cl_srcc(t.as_ptr(), p.as_ptr(), 5, &mut r), ClStatus::Ok);
        assert!((r - 0.8).abs() < 1e-15);
        assert_eq!(cl_plcc(t.as_ptr(), t.as_ptr(), 5, &mut r), ClStatus::Ok);
        assert_eq!(r, 1.0);
        let flat = [2.0; 5];
        assert_eq!(
            cl_plcc(flat.as_ptr(), t.as_ptr(), 5, &mut r),
            ClStatus::UndefinedCorrelation
        );
    }
}

#[test]
fn null_and_bad_inputs() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(cl_subspace_load(ptr::null(), &mut s), ClStatus::NullPointer);
        let missing = CString::new("/nonexistent/cavs.json").unwrap();
        assert_eq!(cl_subspace_load(missing.as_ptr(), &mut s), ClStatus::Io);
        assert!(s.is_null());
        let mut m = ptr::null_mut();
        assert_eq!(cl_model_load(missing.as_ptr(), &mut m), ClStatus::Io);
        assert_eq!(cl_subspace_len(ptr::null()), 0);
        assert!(cl_model_bias(ptr::null()).is_nan());
        cl_subspace_free(ptr::null_mut());
        cl_model_free(ptr::null_mut());
        let mut p = ClPrediction::default();
        assert_eq!(
            cl_model_predict(ptr::null(), ptr::null(), ptr::null(), 0, &mut p),
            ClStatus::NullPointer
        );
        assert!(!CStr::from_ptr(cl_version()).to_str().unwrap().is_empty());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let program = r#"
#include "concept_lens.h"
int main(void) {
    ClSubspace *s = 0; ClModel *m = 0; ClPrediction p; double r;
    float e[3] = {0};
    if (cl_subspace_load("cavs.json", &s) != CL_STATUS_OK) return 1;
    cl_model_load("model.json", &m);
    cl_model_predict(m, s, e, 3, &p);
    cl_srcc(&r, &r, 1, &r);
    cl_model_free(m); cl_subspace_free(s);
    return 0;
}
"#;
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, program).unwrap();
    let status = match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&header)
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler on PATH; skipping header check");
            return;
        }
    };
    assert!(status.success());
}
