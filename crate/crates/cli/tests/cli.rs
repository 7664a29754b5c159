use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semilab_cli::output::csv_body;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn semilab(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_semilab"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn code(args: &[&str], config: Option<&Path>) -> i32 {
    let out = tempfile::tempdir().unwrap();
    semilab(args, config, out.path()).status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn exit_codes_follow_the_outcome() {
    assert_eq!(code(&["check"], Some(&scenario("example31_law"))), 0);
    assert_eq!(code(&["check"], Some(&scenario("example31_straddle"))), 1);
    assert_eq!(code(&["generator"], Some(&scenario("example31_straddle"))), 4);
    assert_eq!(code(&["generator"], Some(&scenario("linear_neg_identity"))), 0);
    assert_eq!(code(&["example", "piecewise_corner"], None), 0);
}

#[test]
fn config_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty_grid = write_config(
        dir.path(),
        r#"
name = "empty"
[family]
name = "example31"
[subset]
shape = { kind = "box", lo = [0.1], hi = [0.2] }
mu = 0.05
[grid]
kind = "explicit"
times = []
[[check]]
kind = "t_lipschitz"
"#,
    );
    assert_eq!(code(&["check"], Some(&empty_grid)), 2);
    assert_eq!(code(&["check"], Some(&dir.path().join("missing.toml"))), 2);
    assert_eq!(code(&["check"], None), 2);
    assert_eq!(code(&["example", "no_such_example"], None), 2);
    let unknown_key = write_config(dir.path(), "name = \"x\"\nbogus = 1\n");
    assert_eq!(code(&["check"], Some(&unknown_key)), 2);
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // e^{t} x leaves (−1, 1) long before t = 2
    let escaping = write_config(
        dir.path(),
        r#"
name = "escape"
[family]
name = "linear"
matrix = [[1.0]]
[domain]
shape = { kind = "interval", lo = -1.0, hi = 1.0 }
[subset]
shape = { kind = "box", lo = [-0.5], hi = [0.5] }
mu = 0.1
[grid]
kind = "explicit"
times = [2.0]
[[check]]
kind = "t_continuity"
"#,
    );
    assert_eq!(code(&["check"], Some(&escaping)), 3);
    let blocker = dir.path().join("not_a_dir");
    std::fs::write(&blocker, "").unwrap();
    let status = semilab(&["check"], Some(&scenario("example31_law")), &blocker)
        .status
        .code()
        .unwrap();
    assert_eq!(status, 3);
}

#[test]
fn every_file_embeds_config_and_version() {
    let out = tempfile::tempdir().unwrap();
    let run = semilab(
        &["lemma", "corollary", "--format", "both", "--seed", "9"],
        Some(&scenario("linear_neg_identity")),
        out.path(),
    );
    assert!(run.status.success());
    let mut seen = (0, 0);
    for entry in std::fs::read_dir(out.path()).unwrap() {
        let p = entry.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                seen.0 += 1;
                let mut lines = text.lines();
                assert_eq!(lines.next().unwrap(), format!("# semilab {}", env!("CARGO_PKG_VERSION")));
                let config: serde_json::Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
                assert_eq!(config["seed"], 9);
                assert_eq!(config["name"], "linear_neg_identity");
            }
            Some("json") => {
                seen.1 += 1;
                let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert_eq!(doc["tool"], "semilab");
                assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
                assert_eq!(doc["config"]["seed"], 9);
            }
            _ => panic!("unexpected file {}", p.display()),
        }
    }
    assert!(seen.0 > 0 && seen.1 > 0);
}

#[test]
fn format_flag_selects_the_files() {
    for (format, ext) in [("csv", "csv"), ("json", "json")] {
        let out = tempfile::tempdir().unwrap();
        assert!(
            semilab(&["check", "--format", format], Some(&scenario("example31_law")), out.path())
                .status
                .success()
        );
        let exts: Vec<String> = std::fs::read_dir(out.path())
            .unwrap()
            .map(|e| e.unwrap().path().extension().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(!exts.is_empty() && exts.iter().all(|e| e == ext));
    }
}

#[test]
fn replay_gives_identical_csv_bodies_and_seeds_matter() {
    let bodies = |seed: &str| {
        let out = tempfile::tempdir().unwrap();
        let run = semilab(&["check", "--seed", seed], Some(&scenario("example31_straddle")), out.path());
        assert_eq!(run.status.code(), Some(1));
        let mut files: Vec<(String, String)> = std::fs::read_dir(out.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    csv_body(&std::fs::read_to_string(&p).unwrap()),
                )
            })
            .collect();
        files.sort();
        files
    };
    let first = bodies("3");
    assert!(!first.is_empty());
    assert_eq!(first, bodies("3"));
    assert_ne!(first, bodies("4"));
}
