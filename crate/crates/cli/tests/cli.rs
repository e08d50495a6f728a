use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn wavelab(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wavelab"));
    cmd.args(args).env_remove("WAVELAB_OUT");
    if let Some(p) = out_env {
        cmd.env("WAVELAB_OUT", p);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn schema(kind: &str) -> String {
    let o = wavelab(&["list", "--schema", kind], None);
    assert!(o.status.success());
    stdout(&o)
}

fn run_dirs(root: &Path) -> Vec<std::path::PathBuf> {
    let mut dirs: Vec<_> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    dirs
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn list_names_kinds_and_statements() {
    let text = stdout(&wavelab(&["list"], None));
    for kind in ["ode-check", "soliton-check", "surface-build", "modulation-decay", "rigidity", "stability", "energy-trace"] {
        assert!(text.contains(&format!("## {kind} (default configuration)")), "{kind}");
    }
    assert!(text.contains("keeps that form there whatever happens outside"));
    assert!(text.contains("blow-up time depends continuously on the data"));
    assert!(text.contains("converge to it exponentially"));
    assert_eq!(wavelab(&["list", "--schema", "nope"], None).status.code(), Some(2));
}

#[test]
fn ode_check_passes_and_writes_a_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("ode.toml");
    fs::write(&cfg, schema("ode-check")).unwrap();
    let out = tmp.path().join("runs");
    let o = wavelab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let dirs = run_dirs(&out);
    assert_eq!(dirs.len(), 1);
    let m = manifest(&dirs[0]);
    assert_eq!(m["passed"], true);
    assert_eq!(m["kind"], "ode-check");
    let check = &m["checks"][0];
    assert_eq!(check["name"], "blowup_time");
    assert!(check["value"].as_f64().unwrap() <= 1e-3);
    for name in ["report.json", "report.md", "surface.csv", "trace.csv"] {
        assert!(dirs[0].join(name).exists(), "{name}");
    }
    let echoed = tmp.path().join("echo.toml");
    fs::write(&echoed, m["config"].as_str().unwrap()).unwrap();
    assert_eq!(wavelab(&["run", echoed.to_str().unwrap(), "--out", out.to_str().unwrap()], None).status.code(), Some(0));
    let dirs = run_dirs(&out);
    assert_eq!(manifest(&dirs[1])["config_sha256"], m["config_sha256"]);
    assert_eq!(manifest(&dirs[1])["artifacts"], m["artifacts"]);
}

#[test]
fn soliton_check_reproduces_the_plane() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("soliton.toml");
    fs::write(&cfg, schema("soliton-check")).unwrap();
    let o = wavelab(&["run", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let dir = run_dirs(tmp.path()).into_iter().find(|p| p.is_dir()).unwrap();
    let m = manifest(&dir);
    let planar = m["checks"].as_array().unwrap().iter().find(|c| c["name"] == "planar_surface").unwrap();
    assert!(planar["value"].as_f64().unwrap() <= 2e-3);
}

#[test]
fn config_errors_exit_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let bad_model = schema("ode-check").replace("n = 1", "n = 3");
    let typo = schema("ode-check").replace("cells = 100", "celss = 100");
    for (name, text) in [("model.toml", bad_model), ("typo.toml", typo)] {
        let path = tmp.path().join(name);
        fs::write(&path, text).unwrap();
        let o = wavelab(&["run", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!o.stderr.is_empty());
    }
    let o = wavelab(&["run", "/nonexistent/config.toml"], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_status_one() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("strict.toml");
    fs::write(&path, schema("ode-check").replace("tolerance = 0.001", "tolerance = 1e-12")).unwrap();
    let o = wavelab(&["run", path.to_str().unwrap(), "--seed", "7", "--threads", "1"], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL blowup_time"));
    let dir = run_dirs(tmp.path()).into_iter().find(|p| p.is_dir()).unwrap();
    let m = manifest(&dir);
    assert_eq!(m["passed"], false);
    assert_eq!(m["seed"], 7);
    assert_eq!(m["threads"], 1);
}
