use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use foldwright::project::{preset_project, Preset, Project};
use foldwright::stl::{check_soup, read_stl};
use foldwright_core::pattern::miura_sheet;
use foldwright_core::tg::EntryFlag;
use tempfile::TempDir;

fn foldwright(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foldwright"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn miura_project(dir: &Path) -> PathBuf {
    let project = Project {
        pattern: Some(miura_sheet(2, 2, 30.0, 30.0, 65f64.to_radians(), EntryFlag::Mountain).unwrap()),
        ..preset_project(Preset::Empty)
    };
    let path = dir.join("miura.json");
    project.save(&path).unwrap();
    path
}

#[test]
fn init_design_and_export() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = foldwright(d, &["init", "--preset", "five-unit"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(code(&foldwright(d, &["init"])), 1, "refuses to overwrite");
    let out = foldwright(d, &["design", "--report", "pattern.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("panels"));
    for name in ["a.svg", "b.svg"] {
        assert_eq!(code(&foldwright(d, &["export-svg", name])), 0);
    }
    let a = fs::read(d.join("a.svg")).unwrap();
    assert_eq!(a, fs::read(d.join("b.svg")).unwrap());
    assert!(String::from_utf8_lossy(&a).contains("stroke-dasharray"));
    assert_eq!(code(&foldwright(d, &["export-dxf", "strip.dxf"])), 0);
    let out = foldwright(d, &["--project", "imported.json", "import-dxf", "strip.dxf"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let original = Project::load(&d.join("project.json")).unwrap().pattern.unwrap();
    let imported = Project::load(&d.join("imported.json")).unwrap().pattern.unwrap();
    assert_eq!(original.creases.len(), imported.creases.len());
    assert_eq!(original.panels.len(), imported.panels.len());
}

#[test]
fn fabricate_writes_four_watertight_parts() {
    let dir = TempDir::new().unwrap();
    let project = miura_project(dir.path());
    let out = foldwright(
        dir.path(),
        &["-p", project.to_str().unwrap(), "fabricate", "-o", "parts", "--report", "fab.json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut files: Vec<String> = fs::read_dir(dir.path().join("parts"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["creases.stl", "infills.stl", "mid_layers.stl", "shells.stl"]);
    for f in &files {
        let check = check_soup(&read_stl(&dir.path().join("parts").join(f)).unwrap());
        assert!(check.watertight(), "{f}: {check:?}");
        assert!(check.volume > 0.0, "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("fab.json")).unwrap()).unwrap();
    assert_eq!(report["parts"].as_array().unwrap().len(), 4);
}

#[test]
fn seeded_optimization_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&foldwright(d, &["init", "--preset", "reaching"])), 0);
    for tag in ["1", "2"] {
        let report = format!("ranking{tag}.json");
        let trace = format!("trace{tag}.csv");
        let out = foldwright(
            d,
            &["optimize", "--runs", "4", "--seed", "7", "--max-generations", "15", "--report", &report, "--trace", &trace],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(fs::read(d.join("ranking1.json")).unwrap(), fs::read(d.join("ranking2.json")).unwrap());
    assert_eq!(fs::read(d.join("trace1.csv")).unwrap(), fs::read(d.join("trace2.csv")).unwrap());
    let out = foldwright(d, &["optimize", "--runs", "4", "--seed", "8", "--max-generations", "15", "--report", "other.json"]);
    assert_eq!(code(&out), 0);
    assert_ne!(fs::read(d.join("ranking1.json")).unwrap(), fs::read(d.join("other.json")).unwrap());
    let trace = fs::read_to_string(d.join("trace1.csv")).unwrap();
    assert!(trace.starts_with("run,seed,first_flag,generation,best_fitness"));
    assert_eq!(trace.lines().count(), 1 + 4 * 15);
}

#[test]
fn simulate_needs_routing() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&foldwright(d, &["init", "--preset", "five-unit"])), 0);
    let out = foldwright(d, &["simulate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`routing`"), "{}", stderr(&out));
}

#[test]
fn simulate_rig_trace() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&foldwright(d, &["init", "--preset", "miura-rig"])), 0);
    let out = foldwright(d, &["simulate", "--trace", "sim.csv", "--report", "sim.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("sim.json")).unwrap()).unwrap();
    let states = report["states"].as_array().unwrap().len();
    let csv = fs::read_to_string(d.join("sim.csv")).unwrap();
    assert_eq!(csv.lines().count(), states + 1);
    assert!(csv.lines().next().unwrap().ends_with("slack_3,length_3"));
    assert!(report["final_index"].is_u64());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = foldwright(d, &["-p", "missing.json", "design"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("missing.json"));
    fs::write(d.join("broken.json"), "{\"version\": 1, \"task\": {").unwrap();
    let out = foldwright(d, &["-p", "broken.json", "validate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("byte 24"), "{}", stderr(&out));
    assert_eq!(code(&foldwright(d, &["no-such-command"])), 1);
    assert_eq!(code(&foldwright(d, &["--help"])), 0);
    let out = foldwright(d, &["-p", "broken.json", "fabricate", "-o", "/proc/forbidden"]);
    assert_eq!(code(&out), 1, "validation comes before output");
}

#[test]
fn validate_reports_dangling_references() {
    let dir = TempDir::new().unwrap();
    let mut project = preset_project(Preset::MiuraRig);
    project.routing.as_mut().unwrap().plan.strings[1].waypoints[2].hole.panel = 77;
    project.save(&dir.path().join("project.json")).unwrap();
    let out = foldwright(dir.path(), &["validate", "--report", "issues.json"]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("routing.plan.strings[1].waypoints[2].hole: panel 77 does not exist"), "{stdout}");
    let out = foldwright(dir.path(), &["simulate"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn fold_report() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&foldwright(d, &["init", "--preset", "five-unit"])), 0);
    let out = foldwright(d, &["fold", "--degrees", "90", "--report", "fold.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let snap: serde_json::Value = serde_json::from_slice(&fs::read(d.join("fold.json")).unwrap()).unwrap();
    assert!((snap["theta"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert!(snap["closure_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(code(&foldwright(d, &["fold", "--degrees", "170"])), 1, "beyond the thickness limit");
    assert_eq!(code(&foldwright(d, &["fold"])), 1, "needs an angle");
}
