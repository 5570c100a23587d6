//! The generated header declares every entry point and compiles against the
//! static library from a plain C program.

use std::path::{Path, PathBuf};
use std::process::Command;

const HEADER: &str = include_str!("../include/cellgraph.h");

const ENTRY_POINTS: &[&str] = &[
    "cg_last_error_message",
    "cg_status_name",
    "cg_string_free",
    "cg_graph_new",
    "cg_graph_from_json",
    "cg_graph_to_json",
    "cg_graph_free",
    "cg_graph_shape",
    "cg_graph_neighbors",
    "cg_node_statistics",
    "cg_features_csv",
    "cg_model_from_json",
    "cg_model_free",
    "cg_model_embed",
    "cg_model_predict",
    "cg_roc_auc",
    "cg_generate_dataset",
    "cg_apselect",
];

#[test]
fn header_declares_entry_points_and_opaque_handles() {
    for name in ENTRY_POINTS {
        assert!(HEADER.contains(&format!("{name}(")), "missing {name}");
    }
    assert!(HEADER.contains("typedef struct CgGraph CgGraph;"));
    assert!(HEADER.contains("typedef struct CgModel CgModel;"));
    assert!(HEADER.contains("CG_STATUS_BUFFER_TOO_SMALL = 11"));
    assert!(HEADER.contains("#ifndef CELLGRAPH_H"));
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "cellgraph.h"

int main(void) {
    size_t src[] = {0, 1};
    size_t dst[] = {1, 2};
    double x[] = {1.0, 2.0, 3.0};
    CgGraph *g = NULL;
    if (cg_graph_new(3, src, dst, 2, false, x, 1, &g) != CG_STATUS_OK) return 1;

    size_t len = 0;
    if (cg_graph_neighbors(g, 1, CG_DIRECTION_BOTH, NULL, 0, &len) != CG_STATUS_BUFFER_TOO_SMALL) return 2;
    size_t nb[2];
    if (cg_graph_neighbors(g, 1, CG_DIRECTION_BOTH, nb, 2, &len) != CG_STATUS_OK) return 3;
    if (len != 2 || nb[0] != 0 || nb[1] != 2) return 4;

    char *csv = NULL;
    if (cg_features_csv(g, CG_LEVEL_GRAPH, NULL, &csv) != CG_STATUS_OK) return 5;
    printf("%s", csv);
    cg_string_free(csv);

    CgGraph *bad = NULL;
    CgStatus st = cg_graph_from_json("{not json", &bad);
    if (st != CG_STATUS_JSON || cg_last_error_message() == NULL) return 6;
    printf("status=%s\n", cg_status_name(st));
    cg_graph_free(g);
    return 0;
}
"#;

/// `target/<profile>` holding the library artifacts next to `deps/`.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = artifact_dir().join("libcellgraph_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let Ok(cc) = which_cc() else {
        eprintln!("skipping: no C compiler on PATH");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let c_file = dir.path().join("main.c");
    std::fs::write(&c_file, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&c_file)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("id,"), "{stdout}");
    assert!(stdout.ends_with("status=json\n"), "{stdout}");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
