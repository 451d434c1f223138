use std::fs;
use std::process::Command;

fn ccl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccl"))
}

const SMALL: &str = "\
# three clustered sites
set = explicit
set.sites = 0,0,0; 1,0,0; 0,1,1
replicas = 200
z_grid = -1, 0, 1
";

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f3.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let mut csvs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let status = ccl()
            .args(["run", "--experiment", "gumbel-interlacement", "--seed", "7", "--threads", "2"])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(matches!(status.code(), Some(0) | Some(2)), "{status:?}");
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("f3.json")).unwrap()).unwrap();
        assert_eq!(json["config"]["seed"], 7);
        assert_eq!(json["config"]["replicas"], 200);
        assert_eq!(json["pass"].as_bool().unwrap(), status.code() == Some(0));
        csvs.push(fs::read(out.join("f3.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(String::from_utf8_lossy(&csvs[0]).lines().count(), 201);
}

#[test]
fn replicas_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f3.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    ccl()
        .args(["run", "--experiment", "gumbel-interlacement", "--seed", "1", "--replicas", "17"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    let csv = fs::read_to_string(out.join("f3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 18);
}

#[test]
fn missing_replicas_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "experiment = last-k\nn = 4\n").unwrap();
    let o = ccl()
        .args(["run", "--seed", "1"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicas"));
}

#[test]
fn missing_seed_and_unknown_experiment_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "experiment = last-k\nn = 4\nreplicas = 2\n").unwrap();
    let o = ccl().arg("run").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = ccl()
        .args(["run", "--seed", "3", "--experiment", "nonsense"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));
}

#[test]
fn failing_verdict_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("z.cfg");
    // a guard of 50 steps censors every run
    fs::write(&cfg, "experiment = cover-time-zeta\nn = 4\nreplicas = 5\nmax_steps = 50\n").unwrap();
    let status = ccl()
        .args(["run", "--seed", "2"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn selftest_passes_and_detects_fault() {
    let o = ccl().arg("selftest").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("entrance law residual, N=8"));
    let o = ccl().args(["selftest", "--fault-origin", "1.01"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
