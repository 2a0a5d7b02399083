use std::ffi::{CStr, CString};
use std::ptr;

use qrnn_cti_ffi::*;

fn last_error() -> String {
    let p = qcti_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_model(kind: &str, f: usize, c: usize) -> *mut QctiModel {
    let kind = CString::new(kind).unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { qcti_model_new(kind.as_ptr(), f, c, 7, &mut m) };
    assert_eq!(s, QctiStatus::Ok, "{}", last_error());
    m
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(qcti_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn predict_proba_rows_sum_to_one() {
    let m = new_model("hybrid_qrnn", 8, 3);
    unsafe {
        assert_eq!(qcti_model_n_features(m), 8);
        assert_eq!(qcti_model_n_classes(m), 3);
        assert!(qcti_model_param_count(m) > 0);
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut probs = vec![0.0; 12];
        assert_eq!(qcti_model_predict_proba(m, x.as_ptr(), 4, probs.as_mut_ptr(), 12), QctiStatus::Ok);
        for row in probs.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut pred = vec![0usize; 4];
        assert_eq!(qcti_model_predict(m, x.as_ptr(), 4, pred.as_mut_ptr(), 4), QctiStatus::Ok);
        for (row, &p) in probs.chunks(3).zip(&pred) {
            let best = (0..3).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a))).unwrap();
            assert_eq!(p, best);
        }
        qcti_model_free(m);
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.qckp").to_str().unwrap()).unwrap();
    let m = new_model("lstm", 6, 2);
    let x: Vec<f64> = (0..12).map(|i| i as f64 / 5.0 - 1.0).collect();
    unsafe {
        let mut a = [0.0; 4];
        qcti_model_predict_proba(m, x.as_ptr(), 2, a.as_mut_ptr(), 4);
        assert_eq!(qcti_model_save(m, path.as_ptr()), QctiStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(qcti_model_load(path.as_ptr(), &mut loaded), QctiStatus::Ok);
        let mut b = [0.0; 4];
        qcti_model_predict_proba(loaded, x.as_ptr(), 2, b.as_mut_ptr(), 4);
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        qcti_model_free(m);
        qcti_model_free(loaded);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let kind = CString::new("transformer").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(qcti_model_new(kind.as_ptr(), 4, 2, 1, &mut m), QctiStatus::Config);
        assert!(last_error().contains("transformer"));
        assert!(m.is_null());

        assert_eq!(qcti_model_new(ptr::null(), 4, 2, 1, &mut m), QctiStatus::NullPointer);

        let missing = CString::new("/nonexistent/model.qckp").unwrap();
        assert_eq!(qcti_model_load(missing.as_ptr(), &mut m), QctiStatus::Io);
        assert!(last_error().contains("/nonexistent/model.qckp"));

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.qckp");
        std::fs::write(&junk, b"not a checkpoint").unwrap();
        let junk = CString::new(junk.to_str().unwrap()).unwrap();
        assert_eq!(qcti_model_load(junk.as_ptr(), &mut m), QctiStatus::Format);

        let model = new_model("mlp", 4, 2);
        let x = [0.0; 4];
        let mut out = [0.0; 1];
        assert_eq!(
            qcti_model_predict_proba(model, x.as_ptr(), 1, out.as_mut_ptr(), 1),
            QctiStatus::InvalidArgument
        );
        assert_eq!(
            qcti_model_predict_proba(ptr::null_mut(), x.as_ptr(), 1, out.as_mut_ptr(), 1),
            QctiStatus::NullPointer
        );
        qcti_model_free(model);
        qcti_model_free(ptr::null_mut());
    }
}

#[test]
fn trains_from_dataset_file() {
    use qrnn_cti::data::{generate_synthetic, SyntheticSpec};
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticSpec::separated(6, &[60, 60], 8.0, 3)).unwrap();
    let path = dir.path().join("train.qds");
    ds.save(&path).unwrap();
    let path = CString::new(path.to_str().unwrap()).unwrap();
    let m = new_model("mlp", 6, 2);
    unsafe {
        assert_eq!(qcti_model_train(m, path.as_ptr(), 20, 32, 1e-2, 1), QctiStatus::Ok);
        let mut pred = vec![0usize; ds.len()];
        let x = ds.features().data();
        qcti_model_predict(m, x.as_ptr(), ds.len(), pred.as_mut_ptr(), pred.len());
        let correct = pred.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
        assert!(correct as f64 / ds.len() as f64 > 0.95);
        assert_eq!(qcti_model_train(m, path.as_ptr(), 0, 32, 1e-2, 1), QctiStatus::Config);
        qcti_model_free(m);
    }
}
