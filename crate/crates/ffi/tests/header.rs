use std::path::Path;
use std::process::Command;

const HEADER: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/include/hypdelay.h");

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(HEADER).unwrap();
    for name in [
        "hd_last_error",
        "hd_version",
        "hd_plant_new",
        "hd_plant_free",
        "hd_kernels_build",
        "hd_kernels_free",
        "hd_simulate",
        "hd_trajectory_series",
        "hd_robust_scan",
        "typedef struct HdPlant HdPlant",
        "HD_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"hypdelay.h\"\n\
         int main(void) {\n\
           HdPlant *p = 0;\n\
           HdStatus s = hd_plant_new(1, 1, 1, 1, 1, 3, 3, &p);\n\
           hd_plant_free(p);\n\
           return s == HD_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = Path::new(HEADER).parent().unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "clang", "gcc"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
