use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn c2f(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_c2f")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_audit_and_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = c2f(&["run", s(&scenario("scenario1_unoccluded.toml")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    assert!(stdout.contains("verdict pass"), "{stdout}");
    for f in ["trajectory.txt", "report.txt", "scenario.toml", "visibility.svg", "distance.svg", "path_xy.svg", "path_yz.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let a = c2f(&["audit", s(&out.join("trajectory.txt")), s(&out.join("scenario.toml"))]);
    assert_eq!(a.status.code(), Some(0));
    assert!(String::from_utf8(a.stdout).unwrap().contains("violations 0"));

    let figs = dir.path().join("figs");
    let p = c2f(&["plot", s(&out.join("report.txt")), "--out", s(&figs)]);
    assert_eq!(p.status.code(), Some(0), "{}", String::from_utf8_lossy(&p.stderr));
    assert_eq!(std::fs::read(figs.join("path_xy.svg")).unwrap(), std::fs::read(out.join("path_xy.svg")).unwrap());
}

#[test]
fn audit_exit_code_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(c2f(&["run", s(&scenario("scenario1_unoccluded.toml")), "--out", s(&out)]).status.code(), Some(0));
    // a scene whose box sits on the start configuration
    let scene = dir.path().join("scene.toml");
    let mut corners = Vec::new();
    for x in [-0.1, 0.1] {
        for y in [0.35, 0.55] {
            for z in [-0.1, 0.1] {
                corners.push(format!("[{x:?}, {y:?}, {z:?}]"));
            }
        }
    }
    let toml = format!("format = \"c2f-scene\"\nversion = 1\n\n[[obstacles]]\nvertices = [{}]\n", corners.join(", "));
    std::fs::write(&scene, toml).unwrap();
    let a = c2f(&["audit", s(&out.join("trajectory.txt")), s(&scene)]);
    assert_eq!(a.status.code(), Some(1), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(String::from_utf8(a.stdout).unwrap().contains("collision"));
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(c2f(&["bogus"]).status.code(), Some(2));
    assert_eq!(c2f(&["run"]).status.code(), Some(2));
    let r = c2f(&["run", "/nonexistent/scenario.toml"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8(r.stderr).unwrap().starts_with("error:"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "format = \"c2f-scenario\"\nversion = 1\n").unwrap();
    assert_eq!(c2f(&["run", s(&bad), "--out", s(dir.path())]).status.code(), Some(2));
    assert_eq!(c2f(&["audit", s(&bad), s(&bad)]).status.code(), Some(2));
}
