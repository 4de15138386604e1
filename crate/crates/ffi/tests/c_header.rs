use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "tebe.h"

int main(void) {
    TebeProfile *p = NULL;
    if (tebe_solve(1, 0.3, &p) != TEBE_STATUS_OK) { fprintf(stderr, "%s\n", tebe_last_error()); return 1; }
    TebeState s;
    if (tebe_profile_eval(p, 2.0, &s) != TEBE_STATUS_OK || !isfinite(s.u)) return 2;
    TebeVerdict v;
    if (tebe_profile_verify(p, &v) != TEBE_STATUS_OK || !v.passed) return 3;
    tebe_profile_free(p);
    if (tebe_solve(1, 0.9, &p) != TEBE_STATUS_INVALID_ARGUMENT) return 4;
    printf("%s %.6f\n", tebe_version(), s.v);
    return 0;
}
"#;

fn profile_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let lib = profile_dir().join("libtebe_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let exe = tmp.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")));
}
