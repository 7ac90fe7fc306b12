use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(format!("{name}.toml"))
}

fn prlc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prlc"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .map(|d| d.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn validate_config_reports_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("two-layer-5", "states=18 actions=56"),
        ("three-layer-dg5", "states=88 actions=252"),
        ("three-layer-dg7", "states=88 actions=792"),
        ("two-server-symmetric", "states=18 actions=200"),
    ];
    for (name, dims) in cases {
        let s = scenario(name);
        let o = prlc(dir.path(), &["validate-config", s.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains(dims), "{name}: {}", stdout(&o));
    }
}

#[test]
fn malformed_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("two-layer-5")).unwrap();
    std::fs::write(&bad, text.replace("loss = 0.05", "loss = 1.5")).unwrap();
    let o = prlc(dir.path(), &["validate-config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("loss"));
    let o = prlc(dir.path(), &["validate-config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn plan_then_simulate_produces_valid_products() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("two-layer-5");
    let s = s.to_str().unwrap();
    let o = prlc(dir.path(), &["--self-check", "plan", s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("states=18 actions=56"));
    let policy = dir.path().join("two-layer-5-model-mdp-g0.9.policy.json");
    assert!(policy.exists());
    let o = prlc(
        dir.path(),
        &["--self-check", "simulate", s, "--policy", policy.to_str().unwrap(), "--runs", "10", "--svg"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names = files(dir.path());
    for f in [
        "two-layer-5-model-mdp-s1-summary.csv",
        "two-layer-5-model-mdp-s1-trace.csv",
        "two-layer-5-model-mdp-s1-trace.svg",
    ] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    let trace = std::fs::read_to_string(dir.path().join("two-layer-5-model-mdp-s1-trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 101);
    assert!(trace.starts_with("generation,mean_delta,std_error"));
}

#[test]
fn policy_for_another_scenario_is_refused_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let plan_dir = dir.path().join("plan");
    let sim_dir = dir.path().join("sim");
    let a = scenario("two-layer-5");
    let o = prlc(&plan_dir, &["plan", a.to_str().unwrap()]);
    assert!(o.status.success());
    let policy = plan_dir.join("two-layer-5-model-mdp-g0.9.policy.json");
    let b = scenario("two-layer-10");
    let o = prlc(&sim_dir, &["simulate", b.to_str().unwrap(), "--policy", policy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fingerprint"));
    assert!(files(&sim_dir).is_empty());
}

#[test]
fn interrupted_training_resumes_to_the_same_policy() {
    let dir = tempfile::tempdir().unwrap();
    let split = dir.path().join("split");
    let whole = dir.path().join("whole");
    let s = scenario("two-layer-5");
    let s = s.to_str().unwrap();
    let base = ["train", s, "--algo", "qlearn-ve", "--seed", "4"];
    let mut first: Vec<&str> = base.to_vec();
    first.extend(["--episodes", "6000", "--stop-after", "2500"]);
    let o = prlc(&split, &first);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!split.join("two-layer-5-qlearn-ve-s4.policy.json").exists());
    let ck = split.join("two-layer-5-qlearn-ve-s4.checkpoint.json");
    let mut second: Vec<&str> = base.to_vec();
    second.extend(["--resume", ck.to_str().unwrap()]);
    let o = prlc(&split, &second);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut straight: Vec<&str> = vec!["--self-check"];
    straight.extend(base);
    straight.extend(["--episodes", "6000"]);
    let o = prlc(&whole, &straight);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["two-layer-5-qlearn-ve-s4.policy.json", "two-layer-5-qlearn-ve-s4-curve.csv"] {
        assert_eq!(
            std::fs::read(split.join(f)).unwrap(),
            std::fs::read(whole.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn resume_with_the_wrong_learner_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("two-layer-5");
    let s = s.to_str().unwrap();
    let o = prlc(dir.path(), &["train", s, "--algo", "qlearn", "--episodes", "1000", "--stop-after", "10"]);
    assert!(o.status.success());
    let ck = dir.path().join("two-layer-5-qlearn-s0.checkpoint.json");
    let o = prlc(dir.path(), &["train", s, "--algo", "qlearn-ve", "--resume", ck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resume_keeps_the_checkpoint_seed_and_length() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("two-layer-5");
    let s = s.to_str().unwrap();
    let o = prlc(dir.path(), &["train", s, "--algo", "qlearn", "--seed", "4", "--episodes", "300", "--stop-after", "100"]);
    assert!(o.status.success());
    let ck = dir.path().join("two-layer-5-qlearn-s4.checkpoint.json");
    let ck = ck.to_str().unwrap();
    for extra in [["--seed", "5"], ["--episodes", "900"]] {
        let mut args = vec!["train", s, "--algo", "qlearn", "--resume", ck];
        args.extend(extra);
        assert_eq!(prlc(dir.path(), &args).status.code(), Some(2), "{extra:?}");
    }
    let o = prlc(dir.path(), &["train", s, "--algo", "qlearn", "--resume", ck]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("two-layer-5-qlearn-s4.policy.json").exists());
    assert!(!dir.path().join("two-layer-5-qlearn-s0.policy.json").exists());
}

#[test]
fn loss_sweep_writes_long_format_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("two-layer-5");
    let o = prlc(
        dir.path(),
        &["--self-check", "sweep", s.to_str().unwrap(), "--axis", "loss", "--values", "0.05,0.2", "--runs", "5"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("two-layer-5-sweep-loss.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,value,scheme,seed,mean_delta,std_error");
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().filter(|l| l.contains(",randsched,")).count() == 2);
}

#[test]
fn sweep_rejects_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("two-layer-5");
    let s = s.to_str().unwrap();
    for (axis, values) in [("loss", "1.5"), ("episodes", "10.5"), ("update-period", "0")] {
        let o = prlc(dir.path(), &["sweep", s, "--axis", axis, "--values", values]);
        assert_eq!(o.status.code(), Some(2), "{axis}={values}");
    }
    let o = prlc(dir.path(), &["sweep", s, "--axis", "loss"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("two-layer-5");
    let o = prlc(dir.path(), &["simulate", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = prlc(dir.path(), &["train", s.to_str().unwrap(), "--algo", "sarsa"]);
    assert_eq!(o.status.code(), Some(2));
}
