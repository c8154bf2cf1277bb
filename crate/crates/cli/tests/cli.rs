use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tree_motion::learning::{build_with_demos, DemoSet, Trajectory};
use tree_motion::spec::TreeSpec;
use tree_motion::ParamVector;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn demo_files() -> Vec<PathBuf> {
    (0..4).map(|i| fixture(&format!("conflicting_demo_{i}.csv"))).collect()
}

fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_tree-motion")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn args(parts: &[&dyn AsRef<std::ffi::OsStr>]) -> Vec<std::ffi::OsString> {
    parts.iter().map(|p| p.as_ref().to_os_string()).collect()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(Vec::<&str>::new())), 1);
    assert_eq!(code(&run(["check"])), 1);
    assert_eq!(code(&run(["check", "x.json", "--bogus"])), 1);
    assert_eq!(code(&run(["--help"])), 0);
    let help = String::from_utf8(run(["train", "--help"]).stdout).unwrap();
    assert!(help.contains("--loss") && help.contains("--lambda") && help.contains("--config"));
    assert!(!help.contains("corrupt"));
}

#[test]
fn check_accepts_valid_trees() {
    for name in ["two_link.json", "stability_arm.json", "conflicting_arm.json"] {
        let out = run(args(&[&"check", &fixture(name), &"--seed", &"3"]));
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stdout));
        let r = report(&out);
        assert_eq!(r["ok"], true);
        assert!(r["tested"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn check_names_the_edge_with_mismatched_dimensions() {
    let out = run(args(&[&"check", &fixture("bad_dims.json")]));
    assert_eq!(code(&out), 2);
    let r = report(&out);
    assert_eq!(r["ok"], false);
    assert_eq!(r["error"]["kind"], "structure");
    assert_eq!(r["error"]["item"], "fk");
}

#[test]
fn check_reports_singular_root_metric() {
    let out = run(args(&[&"check", &fixture("singular_at_origin.json")]));
    assert_eq!(code(&out), 3);
    let r = report(&out);
    let origin = &r["points"][0];
    assert_eq!(origin["q"], serde_json::json!([0.0, 0.0]));
    assert_eq!(origin["error"]["kind"], "singular_metric");
}

#[test]
fn missing_and_malformed_files_are_validation_errors() {
    assert_eq!(code(&run(args(&[&"check", &fixture("does_not_exist.json")]))), 2);
    assert_eq!(code(&run(args(&[&"check", &fixture("conflicting_demo_0.csv")]))), 2);
}

#[test]
fn zero_iterations_write_the_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("params.json");
    let mut a = args(&[&"train", &fixture("conflicting_arm.json"), &"--out", &out_path, &"--iterations", &"0", &"--demos"]);
    a.extend(demo_files().into_iter().map(Into::into));
    let out = run(&a);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let spec = TreeSpec::load(fixture("conflicting_arm.json")).unwrap();
    let demos = DemoSet::new(demo_files().iter().map(|p| Trajectory::load(p).unwrap()).collect()).unwrap();
    let (_, init) = build_with_demos(&spec, &demos).unwrap();
    let text = std::fs::read_to_string(&out_path).unwrap();
    let written = ParamVector::from_json(&text).unwrap();
    assert_eq!(written, init);
    assert_eq!(written.to_json().unwrap(), text);
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
    assert_eq!(history.lines().next(), Some("iteration,loss"));
}

fn train_run(dir: &Path, name: &str, extra: &[&str]) -> Value {
    let out_path = dir.join(format!("{name}.json"));
    let history = dir.join(format!("{name}.csv"));
    let mut a = args(&[&"train", &fixture("conflicting_arm.json"), &"--out", &out_path, &"--history", &history]);
    a.extend(extra.iter().map(Into::into));
    a.push("--demos".into());
    a.extend(demo_files().into_iter().map(Into::into));
    let out = run(&a);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    report(&out)
}

#[test]
fn subtask_training_beats_joint_training_in_subtask_space() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("conflicting_subtask.json");
    let config = config.to_str().unwrap();
    let sub = train_run(dir.path(), "sub", &["--config", config, "--iterations", "50"]);
    let initial = sub["subtask_loss"]["initial"].as_f64().unwrap();
    let trained = sub["subtask_loss"]["final"].as_f64().unwrap();
    assert!(trained * 10.0 <= initial, "{initial} -> {trained}");

    let joint = train_run(dir.path(), "joint", &["--config", config, "--loss", "joint", "--iterations", "50"]);
    assert_eq!(joint["loss"], "joint_space");
    assert!(joint["subtask_loss"]["final"].as_f64().unwrap() > trained);
    assert!(joint["joint_loss"]["final"].as_f64().unwrap() > 0.0);

    // Evaluating the written parameters reproduces the reported loss.
    let mut a = args(&[&"eval", &fixture("conflicting_arm.json"), &"--params", &dir.path().join("sub.json"), &"--lambda", &"1,0,0", &"--demos"]);
    a.extend(demo_files().into_iter().map(Into::into));
    let eval = report(&run(&a));
    assert_eq!(eval["subtask_loss"].as_f64().unwrap(), trained);
}

#[test]
fn training_is_byte_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_path = dir.path().join(format!("p{threads}.json"));
        let history = dir.path().join(format!("h{threads}.csv"));
        let mut a = args(&[&"train", &fixture("conflicting_arm.json"), &"--out", &out_path, &"--history", &history]);
        a.extend(["--loss", "joint", "--iterations", "3", "--seed", "5", "--minibatch", "64", "--demos"].map(Into::into));
        a.extend(demo_files().into_iter().map(Into::into));
        let out = Command::new(env!("CARGO_BIN_EXE_tree-motion"))
            .env("TREE_MOTION_THREADS", threads)
            .args(&a)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        outputs.push((std::fs::read(&out_path).unwrap(), std::fs::read(&history).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_tree-motion"))
        .env("TREE_MOTION_THREADS", "zero")
        .args(args(&[&"check", &fixture("two_link.json")]))
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn aborted_training_keeps_partial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("params.json");
    let mut a = args(&[&"train", &fixture("conflicting_arm.json"), &"--out", &out_path]);
    a.extend(["--loss", "joint", "--alpha", "1e12", "--iterations", "5", "--demos"].map(Into::into));
    a.push(demo_files()[0].clone().into());
    let out = run(&a);
    assert_ne!(code(&out), 0);
    let r = report(&out);
    assert!(r["aborted"].is_string());
    assert!(!out_path.exists());
    let partial = ParamVector::from_json(&std::fs::read_to_string(dir.path().join("params.json.partial")).unwrap()).unwrap();
    assert!(partial.values.iter().all(|v| v.is_finite()));
}

#[test]
fn subtask_training_rejects_all_zero_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = args(&[&"train", &fixture("conflicting_arm.json"), &"--out", &dir.path().join("p.json"), &"--lambda", &"0,0,0", &"--demos"]);
    a.push(demo_files()[0].clone().into());
    let out = run(&a);
    assert_eq!(code(&out), 2);
    assert_eq!(report(&out)["error"]["kind"], "config");
}

fn rollout(dir: &Path, tree: &str, q0: &str) -> (Output, PathBuf) {
    let out_path = dir.join("traj.csv");
    let out = run(args(&[&"rollout", &fixture(tree), &"--q0", &q0, &"--out", &out_path]));
    (out, out_path)
}

#[test]
fn rollout_from_equilibrium_converges_in_zero_steps() {
    let dir = tempfile::tempdir().unwrap();
    let (out, path) = rollout(dir.path(), "two_link.json", "0.3,0.5");
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["status"], "converged");
    assert_eq!(r["steps"], 0);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(path.with_extension("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, r);
    let traj = Trajectory::load(&path).unwrap();
    assert_eq!(traj.len(), 1);
}

#[test]
fn rollout_on_stability_fixture_converges_with_monotone_phi() {
    let dir = tempfile::tempdir().unwrap();
    let (out, path) = rollout(dir.path(), "stability_arm.json", "-1.2,0.8,1.5");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    assert_eq!(r["status"], "converged");
    assert!(r["terminal_grad_norm"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["lyapunov"]["violations"], 0);

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["t", "q0", "q1", "q2", "qd0", "qd1", "qd2", "phi"]);
    let phi: Vec<f64> = reader.records().map(|r| r.unwrap()[7].parse().unwrap()).collect();
    assert_eq!(phi.len(), r["steps"].as_u64().unwrap() as usize + 1);
    assert!(phi.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    // The trajectory file is readable as a demonstration.
    let traj = Trajectory::load(&path).unwrap();
    assert_eq!(traj.dim(), 3);
}

#[test]
fn rollout_inside_the_obstacle_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = rollout(dir.path(), "stability_arm.json", "0.41,1.7,0");
    assert_eq!(code(&out), 3);
    let r = report(&out);
    assert_eq!(r["status"], "error");
    assert!(r["message"].as_str().unwrap().contains("avoid"));
}

#[test]
fn rollout_rejects_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = rollout(dir.path(), "stability_arm.json", "0.1,0.2");
    assert_eq!(code(&out), 2);
}

fn gradcheck(tree: &str, extra: &[&str]) -> Output {
    let mut a = args(&[&"gradcheck", &fixture(tree), &"--demos"]);
    a.push(demo_files()[1].clone().into());
    a.extend(extra.iter().map(Into::into));
    run(&a)
}

#[test]
fn gradcheck_with_frozen_leaves_only_passes() {
    let out = gradcheck("stability_arm.json", &["--loss", "joint"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["parameters"], 0);
    assert_eq!(r["checked"], 0);
}

#[test]
fn gradcheck_passes_on_learnable_fixture_and_catches_corruption() {
    for loss in ["subtask", "joint", "independent"] {
        let out = gradcheck("conflicting_arm.json", &["--loss", loss, "--max-coords", "60"]);
        assert_eq!(code(&out), 0, "{loss}: {}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(report(&out)["checked"], 60);
    }
    let out = gradcheck("conflicting_arm.json", &["--max-coords", "60", "--corrupt-gradient"]);
    assert_eq!(code(&out), 3);
    assert_eq!(report(&out)["ok"], false);
}

#[test]
fn eval_prints_the_composed_policy() {
    let out = run(args(&[&"eval", &fixture("two_link.json"), &"--q", &"0.3,0.5"]));
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let pi: Vec<f64> = serde_json::from_value(r["policy"].clone()).unwrap();
    assert!(pi.iter().all(|v| v.abs() < 1e-12));
    assert!(r["root_metric_min_eigenvalue"].as_f64().unwrap() > 0.0);

    let out = run(args(&[&"eval", &fixture("two_link.json"), &"--q", &"0.0,0.0"]));
    let pi: Vec<f64> = serde_json::from_value(report(&out)["policy"].clone()).unwrap();
    let spec = TreeSpec::load(fixture("two_link.json")).unwrap();
    let (tree, params) = spec.build(&Default::default()).unwrap();
    let expected = tree.evaluate_policy(&nalgebra::DVector::zeros(2), &params).unwrap();
    assert_eq!(pi, expected.as_slice());
    assert_eq!(code(&run(args(&[&"eval", &fixture("two_link.json")]))), 1);
}
