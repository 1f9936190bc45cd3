//! Compiles a small C program against the generated header and links the
//! static library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "insdiff.h"

int main(void) {
    double ln = 0.0;
    if (insdiff_count_alignments_ln("AB", "ABAB", &ln) != INSDIFF_STATUS_OK) return 10;
    if (fabs(ln - log(3.0)) > 1e-12) return 11;

    double p[4];
    if (insdiff_target_distribution("AB", "ABAB", p, 4) != INSDIFF_STATUS_OK) return 12;
    double s = p[0] + p[1] + p[2] + p[3];
    if (fabs(s - 1.0) > 1e-12) return 13;

    InsdiffModel *m = NULL;
    if (insdiff_model_load("/nonexistent.ckpt", &m) != INSDIFF_STATUS_IO) return 14;
    if (m != NULL || strlen(insdiff_last_error()) == 0) return 15;
    insdiff_model_free(NULL);

    printf("%s\n", insdiff_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libinsdiff_ffi.a");
    let compiler = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok());
    let (Some(compiler), true) = (compiler, lib.exists()) else {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    };
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let bin = work.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(compiler)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
