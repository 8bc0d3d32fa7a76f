use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = "\
[scenario]
kind = pinhole
a1 = 0.6
a2 = 0.8
b1 = 0.6 @ 45deg
b2 = 0.8
n = 6
m1 = 4
m2 = 4
P_t = 0.1
horizon = 40
seed = 11
N = 500
";

fn larc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_larc")).args(args).env_remove("LARC_SEED").output().unwrap()
}

fn write_scenario(dir: &Path) -> String {
    let path = dir.join("s.larc");
    fs::write(&path, SCENARIO).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_stats_trajectories_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path());
    let out = dir.path().join("out");
    let o = larc(&["run", &file, "--out", out.to_str().unwrap(), "--override", "n=8", "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["N"], 500);
    assert_eq!(stats["seed"], 11);
    assert!((stats["born_weight_x1"].as_f64().unwrap() - 0.36).abs() < 1e-12);

    let csv = fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("index,first_reduction_time,final_position,reductions\n"));
    assert_eq!(csv.lines().count(), 501);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["overrides"][0], "n=8");
    assert!(manifest["config"].as_str().unwrap().contains("n = 8"));
    assert_eq!(manifest["jobs"], 2);
    assert!(!out.join("stats.tmp").exists());
}

#[test]
fn seed_flag_and_environment_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path());
    let out = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_larc"))
        .args(["run", &file, "-N", "50", "--out", out.to_str().unwrap()])
        .env("LARC_SEED", "99")
        .output()
        .unwrap();
    assert!(o.status.success());
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["seed"], 99);
    assert_eq!(stats["N"], 50);
}

#[test]
fn usage_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(larc(&["run", "/no/such/file.larc"]).status.code(), Some(2));

    let bad = dir.path().join("bad.larc");
    fs::write(&bad, SCENARIO.replace("m1 = 4", "m1 = zero")).unwrap();
    let o = larc(&["run", bad.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 8"), "{}", String::from_utf8_lossy(&o.stderr));

    let file = write_scenario(dir.path());
    assert_eq!(larc(&["run", &file, "--override", "bogus=1"]).status.code(), Some(2));
    assert_eq!(larc(&["export", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sweep_writes_one_directory_per_point_and_export_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path());
    let out = dir.path().join("sweep");
    let o = larc(&["run", &file, "-N", "200", "--out", out.to_str().unwrap(), "--sweep", "m1=2,4,8", "--sweep", "m2=2,4,8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for point in ["point-000", "point-001", "point-002"] {
        assert!(out.join(point).join("stats.json").is_file());
    }

    let csv = dir.path().join("export.csv");
    let export = || {
        let o = larc(&["export", out.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(&csv).unwrap()
    };
    let first = export();
    assert_eq!(first, export());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("criterion,x,y,ci_lo,ci_hi\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("born_x1,")).count(), 3);
    let larcs: Vec<&str> = text.lines().filter(|l| l.starts_with("abc_rate,")).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(larcs, ["4", "8", "16"]);
}

#[test]
fn verify_list_names_every_criterion() {
    let o = larc(&["verify", "--list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for id in ["single-larc-weights", "born-rule", "abc-rate", "normalization", "reproducibility"] {
        assert!(text.contains(id), "{text}");
    }
}
