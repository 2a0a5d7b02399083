use std::path::{Path, PathBuf};
use std::process::Command;

const EXPORTS: [&str; 11] = [
    "qcti_version",
    "qcti_last_error_message",
    "qcti_model_new",
    "qcti_model_load",
    "qcti_model_save",
    "qcti_model_free",
    "qcti_model_n_features",
    "qcti_model_n_classes",
    "qcti_model_param_count",
    "qcti_model_predict_proba",
    "qcti_model_predict",
];

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qrnn_cti.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in EXPORTS.iter().chain(&["qcti_model_train", "QCTI_STATUS_FORMAT = 13"]) {
        assert!(text.contains(name), "{name} missing from header");
    }
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libqrnn_cti_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        panic!("static library not found next to the test binary");
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "qrnn_cti.h"

int main(void) {
    QctiModel *m = NULL;
    if (qcti_model_new("hybrid_qrnn", 5, 3, 11, &m) != QCTI_STATUS_OK) return 1;
    double x[10] = {0.1, -0.2, 0.3, 0.4, -0.5, 1.0, 0.0, -1.0, 0.5, 0.25};
    double p[6];
    if (qcti_model_predict_proba(m, x, 2, p, 6) != QCTI_STATUS_OK) return 2;
    for (int r = 0; r < 2; r++) {
        double s = p[3 * r] + p[3 * r + 1] + p[3 * r + 2];
        if (fabs(s - 1.0) > 1e-12) return 3;
    }
    QctiModel *bad = NULL;
    if (qcti_model_new("nope", 5, 3, 1, &bad) != QCTI_STATUS_CONFIG) return 4;
    if (qcti_last_error_message() == NULL) return 5;
    qcti_model_free(m);
    printf("ok %s\n", qcti_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
