//! Compiles a small C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libstvae_ffi.a");
    if !lib.exists() {
        panic!("static library not found at {}", lib.display());
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "stvae.h"

int main(void) {
    double w[9] = {0, 1, 0, 1, 0, 1, 0, 1, 0};
    double q[9];
    if (stvae_leroux_precision(w, 3, 0.5, q) != STVAE_STATUS_OK) return 1;
    /* Q = 0.5 (D - W) + 0.5 I; D = diag(1, 2, 1) */
    if (q[0] != 1.0 || q[4] != 1.5 || q[1] != -0.5 || q[2] != 0.0) return 2;
    StvaeModel *m = NULL;
    if (stvae_model_load("/nonexistent/model.stvae", &m) != STVAE_STATUS_IO) return 3;
    char buf[256];
    size_t n = stvae_last_error_message(buf, sizeof buf);
    if (n == 0 || strlen(buf) == 0) return 4;
    if (STVAE_N_LOCATIONS != 52) return 5;
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("prog");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
