use std::process::Command;

fn fb_lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fb-lab"))
}

#[test]
fn verify_prints_a_passing_report() {
    let out = fb_lab().args(["verify", "--suite", "onephase-example"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["suite"], "onephase-example");
    assert_eq!(report["pass"], true);
}

#[test]
fn unknown_suite_is_an_error() {
    let out = fb_lab().args(["verify", "--suite", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("signorini-canonical"));
}

#[test]
fn oracle_then_fit_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = fb_lab()
        .args(["--quiet", "--out"])
        .arg(dir.path())
        .args(["oracle", "--what", "fb", "--grid", "R=0.5,h=0.00390625"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = walk(dir.path()).into_iter().find(|p| p.ends_with("csv/free_boundary.csv")).expect("polyline written");
    let out = fb_lab()
        .args(["--set", "grid.h=0.00390625", "fit-exponent", "--point", "0,0", "--fb"])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let g = fit["exponent"].as_f64().unwrap();
    assert!((1.4..=1.6).contains(&g), "{g}");
}

#[test]
fn bad_override_is_an_error() {
    let out = fb_lab().args(["--set", "grid.h", "onephase"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn walk(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                found.push(p);
            }
        }
    }
    found
}
