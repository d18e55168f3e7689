use std::process::{Command, Output};

const CUBE_ROOTS_OF_UNITY: &str = "-1,0,0,1";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_newton-atlas")).args(args).env_remove("NEWTON_ATLAS_CACHE").output().unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["analyze", "--poly", CUBE_ROOTS_OF_UNITY, "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn malformed_input_is_a_usage_error() {
    assert_eq!(run(&["analyze", "--poly", "1,x"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--poly", "1,1"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--poly", CUBE_ROOTS_OF_UNITY, "--eps", "nonsense=1"]).status.code(), Some(1));
    assert_eq!(run(&["render", "--poly", CUBE_ROOTS_OF_UNITY, "--resolution", "0", "--out", "/dev/null"]).status.code(), Some(1));
}

#[test]
fn analyze_cube_roots_of_unity() {
    let o = run(&["analyze", "--poly", CUBE_ROOTS_OF_UNITY]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o.stdout);
    assert_eq!(r["descriptor"]["degree"], 3);
    let roots = r["descriptor"]["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 3);
    assert!(roots.iter().all(|x| x["superattracting"] == true));
    assert_eq!(r["violations"].as_array().unwrap().len(), 0);
    // Timing goes to stderr only.
    assert!(String::from_utf8_lossy(&o.stderr).contains("analyze:"));
}

#[test]
fn cache_hit_matches_fresh_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = |name: &str| dir.path().join(name);
    let args = |o: &std::path::Path| {
        vec!["fsi".to_string(), "--poly".into(), CUBE_ROOTS_OF_UNITY.into(), "--cache-dir".into(), cache.display().to_string(), "--out".into(), o.display().to_string()]
    };
    for name in ["first.json", "second.json"] {
        let a = args(&out(name));
        let o = run(&a.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(o.status.code(), Some(0));
    }
    let fresh = run(&["fsi", "--poly", CUBE_ROOTS_OF_UNITY]);
    let first = std::fs::read(out("first.json")).unwrap();
    assert_eq!(first, std::fs::read(out("second.json")).unwrap());
    assert_eq!(first, fresh.stdout);
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
}

#[test]
fn graph_exports_both_formats() {
    let dot = run(&["graph", "--poly", CUBE_ROOTS_OF_UNITY, "--level", "0", "--format", "dot"]);
    let text = String::from_utf8(dot.stdout).unwrap();
    assert!(text.starts_with("graph delta {"));
    assert_eq!(text.matches(" -- ").count(), 3);
    let js = json(&run(&["graph", "--poly", CUBE_ROOTS_OF_UNITY, "--level", "0"]).stdout);
    assert_eq!(js["edges"].as_array().unwrap().len(), 3);
}

#[test]
fn render_writes_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("basins.ppm");
    let o = run(&["render", "--poly", CUBE_ROOTS_OF_UNITY, "--resolution", "64", "--level", "1", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let b = std::fs::read(&p).unwrap();
    assert!(b.starts_with(b"P6\n64 64\n255\n"));
    assert_eq!(b.len(), 13 + 3 * 64 * 64);
}

#[test]
fn perturb_parabolic_quadratic() {
    let o = run(&["perturb", "--poly", "0.25,0,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o.stdout);
    assert_eq!(r["perturbation"]["pass"], true);
    assert_eq!(r["count"]["nonrepelling"], 1);
}
