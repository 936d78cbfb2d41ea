use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use icu_adapt::data::ScalingStats;
use icu_adapt::model::{build_model, Checkpoint, CheckpointMeta, ModelConfig};
use icu_adapt::Tensor;
use icu_adapt_ffi::*;

fn small_config(f: usize) -> ModelConfig {
    let mut c = ModelConfig::with_features(f);
    c.conv_filters = 4;
    c.lstm_hidden = 3;
    c.dense_hidden = 3;
    c
}

fn saved_checkpoint(dir: &Path, f: usize) -> (CString, Checkpoint) {
    let config = small_config(f);
    let (params, _) = build_model(&config, 7).unwrap();
    let scaling = ScalingStats {
        min: vec![Some(0.0); f],
        max: vec![Some(10.0); f],
    };
    let ck = Checkpoint::new(config, params, Some(scaling), CheckpointMeta::default());
    let path = dir.join("ck.json");
    ck.save(&path).unwrap();
    (CString::new(path.to_str().unwrap()).unwrap(), ck)
}

fn last_error() -> String {
    let p = icu_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn predict_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, ck) = saved_checkpoint(dir.path(), 3);
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { icu_model_load(path.as_ptr(), &mut model) },
        IcuStatus::Ok
    );
    assert!(icu_last_error().is_null());
    assert_eq!(unsafe { icu_model_n_features(model) }, 3);

    let t = 6;
    let x: Vec<f64> = (0..t * 3).map(|i| (i as f64 * 0.37).sin().abs()).collect();
    let mut out = vec![0.0; t];
    assert_eq!(
        unsafe { icu_model_predict(model, x.as_ptr(), t, 3, out.as_mut_ptr()) },
        IcuStatus::Ok
    );
    let expected = ck
        .network()
        .unwrap()
        .risks(&ck.params, &Tensor::from_vec(&[t, 3], x.clone()).unwrap())
        .unwrap();
    assert_eq!(out, expected);

    // raw values on a 0..10 scale with every cell observed reduce to x
    let raw: Vec<f64> = x.iter().map(|v| v * 10.0).collect();
    let mut out_raw = vec![0.0; t];
    assert_eq!(
        unsafe { icu_model_predict_raw(model, raw.as_ptr(), t, 3, out_raw.as_mut_ptr()) },
        IcuStatus::Ok
    );
    for (a, b) in out_raw.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
    unsafe { icu_model_free(model) };
}

#[test]
fn raw_prediction_fills_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = saved_checkpoint(dir.path(), 2);
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { icu_model_load(path.as_ptr(), &mut model) },
        IcuStatus::Ok
    );
    let raw = [
        5.0,
        f64::NAN,
        f64::NAN,
        f64::NAN,
        f64::NAN,
        2.0,
        f64::NAN,
        f64::NAN,
    ];
    let filled = [5.0, 2.0, 5.0, 2.0, 5.0, 2.0, 5.0, 2.0];
    let mut a = [0.0; 4];
    let mut b = [0.0; 4];
    unsafe {
        assert_eq!(
            icu_model_predict_raw(model, raw.as_ptr(), 4, 2, a.as_mut_ptr()),
            IcuStatus::Ok
        );
        assert_eq!(
            icu_model_predict_raw(model, filled.as_ptr(), 4, 2, b.as_mut_ptr()),
            IcuStatus::Ok
        );
        icu_model_free(model);
    }
    assert_eq!(a, b);
}

#[test]
fn errors_set_status_and_message() {
    let mut model = ptr::null_mut();
    let missing = CString::new("/nonexistent/ck.json").unwrap();
    assert_eq!(
        unsafe { icu_model_load(missing.as_ptr(), &mut model) },
        IcuStatus::Usage
    );
    assert!(model.is_null());
    assert!(last_error().contains("/nonexistent/ck.json"));
    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("bad.json");
    std::fs::write(&garbage, "{not json").unwrap();
    let garbage = CString::new(garbage.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { icu_model_load(garbage.as_ptr(), &mut model) },
        IcuStatus::Data
    );

    assert_eq!(
        unsafe { icu_model_load(ptr::null(), &mut model) },
        IcuStatus::NullPointer
    );

    let (path, _) = saved_checkpoint(dir.path(), 3);
    assert_eq!(
        unsafe { icu_model_load(path.as_ptr(), &mut model) },
        IcuStatus::Ok
    );
    let x = [0.5; 8];
    let mut out = [0.0; 4];
    assert_eq!(
        unsafe { icu_model_predict(model, x.as_ptr(), 4, 2, out.as_mut_ptr()) },
        IcuStatus::Usage
    );
    assert!(last_error().contains("expects"));
    unsafe { icu_model_free(model) };
    unsafe { icu_model_free(ptr::null_mut()) };
    assert_eq!(unsafe { icu_model_n_features(ptr::null()) }, 0);
}

#[test]
fn auc_through_the_c_interface() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut out = 0.0;
    assert_eq!(
        unsafe { icu_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut out) },
        IcuStatus::Ok
    );
    assert!((out - 0.75).abs() < 1e-15);
    let one_class = [1u8; 4];
    assert_eq!(
        unsafe { icu_auc(scores.as_ptr(), one_class.as_ptr(), 4, &mut out) },
        IcuStatus::Data
    );
    assert!(last_error().contains("AUC undefined"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/icu_adapt.h");
    assert!(header.exists());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(status) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
        else {
            eprintln!("{compiler} not available, skipping");
            continue;
        };
        assert!(status.success(), "{compiler} rejected the header");
    }
}
