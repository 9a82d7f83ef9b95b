//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is on the path.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "elastica.h"

int main(void) {
    double v[64];
    for (int i = 0; i < 64; i++) v[i] = 0.5;
    ElasticaParams p = {0.2, 1.0, 0.01, 1.0 / 64, 1.0 / 64000};
    ElasticaEnergy *e = NULL;
    ElasticaCurve *c = NULL;
    if (elastica_energy_new("peak", 64, &p, &e) != ELASTICA_STATUS_OK) return 1;
    if (elastica_curve_new(v, 64, &c) != ELASTICA_STATUS_OK) return 2;
    ElasticaBreakdown b;
    if (elastica_energy_breakdown(e, c, &b) != ELASTICA_STATUS_OK) return 3;
    if (elastica_curve_new(v, 2, &c) != ELASTICA_STATUS_INVALID_ARGUMENT) return 4;
    char msg[128];
    elastica_last_error_message(msg, sizeof msg);
    printf("%.12f %s\n", b.total, msg);
    elastica_curve_free(c);
    elastica_energy_free(e);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    // target/tmp sits next to target/<profile>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .and_then(|deps| deps.parent())
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libelastica_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let src = tmp.join("elastica_smoke.c");
    let exe = tmp.join("elastica_smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("1.000000000000 "), "{text}");
    assert!(text.contains("at least 3"));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
