use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};
use tree_motion::learning::{
    joint_loss, subtask_loss, train as train_loss, train_independent_baseline, LossKind, LossSpec, Objective,
    TrainOptions,
};
use tree_motion::linalg::min_eigenvalue;
use tree_motion::rollout::{integrate, lyapunov_check, RolloutOptions, RolloutStatus};
use tree_motion::spec::TreeSpec;
use tree_motion::verify::{
    check_edge_jacobians, compare_gradients, fd_gradient, tree_flat_gap, tree_flat_tolerance, GRADIENT_STEP,
};
use tree_motion::{Error, ParamVector, TransformTree};

use crate::io::{
    create_file, emit, error_json, load_tree, read_demos, read_spec, to_pretty, write_file, CliError, Outcome, EXIT_NUMERIC,
    EXIT_PASS,
};
use crate::LossArg;

/// Relative tolerance for analytic edge Jacobians against differences.
const JACOBIAN_TOL: f64 = 1e-5;

fn finish(report: Value, passed: bool) -> Result<Outcome, CliError> {
    emit(&report);
    Ok(Outcome {
        code: if passed { EXIT_PASS } else { EXIT_NUMERIC },
    })
}

fn vector_arg(values: &[f64], dim: usize, what: &str) -> Result<DVector<f64>, CliError> {
    if values.len() != dim {
        return Err(Error::Config(format!("{what} has {} entries but the tree root has dimension {dim}", values.len())).into());
    }
    Ok(DVector::from_column_slice(values))
}

fn check_point(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector) -> tree_motion::Result<Value> {
    let pi = tree.evaluate_policy(q, params)?;
    let gap = tree_flat_gap(tree, q, params)?;
    let tol = tree_flat_tolerance(tree, q, params, pi.amax())?;
    let (jac, edge) = check_edge_jacobians(tree, q, params)?;
    let passed = gap <= tol && jac < JACOBIAN_TOL;
    Ok(json!({
        "q": q.as_slice(),
        "passed": passed,
        "flat_gap": gap,
        "flat_tolerance": tol,
        "jacobian_error": jac,
        "worst_edge": edge,
    }))
}

/// Evaluates the tree at the origin and at `points` random configurations.
/// Configurations outside a leaf's domain are skipped.
pub fn check(tree_path: &Path, params: Option<&Path>, points: usize, scale: f64, seed: u64) -> Result<Outcome, CliError> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(CliError::Usage(format!("--scale must be finite and nonnegative, got {scale}")));
    }
    let spec = read_spec(tree_path)?;
    let (tree, params) = load_tree(&spec, params, None)?;
    let d = tree.root_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut configs = vec![DVector::zeros(d)];
    configs.extend((0..points).map(|_| DVector::from_fn(d, |_, _| scale * rng.random_range(-1.0..=1.0))));

    let mut results = Vec::new();
    let mut failures = 0;
    let mut tested = 0;
    for q in &configs {
        match check_point(&tree, q, &params) {
            Ok(row) => {
                tested += 1;
                if row["passed"] == json!(false) {
                    failures += 1;
                }
                results.push(row);
            }
            Err(e @ Error::Domain { .. }) => results.push(json!({"q": q.as_slice(), "skipped": error_json(&e)})),
            Err(e) => {
                failures += 1;
                results.push(json!({"q": q.as_slice(), "passed": false, "error": error_json(&e)}));
            }
        }
    }
    let passed = failures == 0 && tested > 0;
    let report = json!({
        "ok": passed,
        "command": "check",
        "nodes": tree.node_count(),
        "edges": tree.edges().len(),
        "leaves": tree.leaves().iter().map(|l| l.name.clone()).collect::<Vec<_>>(),
        "parameters": params.len(),
        "tested": tested,
        "failures": failures,
        "points": results,
    });
    finish(report, passed)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfig {
    loss: Option<LossSpec>,
    alpha: Option<f64>,
    iterations: Option<usize>,
    seed: Option<u64>,
    minibatch: Option<usize>,
    momentum: Option<f64>,
}

pub struct TrainRequest<'a> {
    pub tree: &'a Path,
    pub params: Option<&'a Path>,
    pub demos: &'a [PathBuf],
    pub out: &'a Path,
    pub history: Option<&'a Path>,
    pub config: Option<&'a Path>,
    pub loss: Option<LossArg>,
    pub lambda: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub minibatch: Option<usize>,
    pub momentum: Option<f64>,
}

/// Loss from the flag, then the config, then the subtask default; subtask
/// weights default to the spec's per-leaf defaults.
fn resolve_loss(spec: &TreeSpec, flag: Option<LossArg>, lambda: Option<Vec<f64>>, config: Option<LossSpec>) -> LossSpec {
    let kind = match flag {
        Some(LossArg::Subtask) => LossKind::SubtaskSpace,
        Some(LossArg::Joint) => LossKind::JointSpace,
        Some(LossArg::Independent) => LossKind::IndependentBaseline,
        None => config.as_ref().map_or(LossKind::SubtaskSpace, |c| c.kind),
    };
    let lambda = lambda.or_else(|| config.and_then(|c| c.lambda));
    LossSpec {
        kind,
        lambda: (kind == LossKind::SubtaskSpace).then(|| lambda.unwrap_or_else(|| spec.default_lambda())),
    }
}

fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

pub fn train(req: TrainRequest<'_>) -> Result<Outcome, CliError> {
    let spec = read_spec(req.tree)?;
    let config: TrainConfig = match req.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::File {
                path: path.to_path_buf(),
                source: e.into(),
            })?;
            serde_json::from_str(&text).map_err(|e| CliError::File {
                path: path.to_path_buf(),
                source: e.into(),
            })?
        }
        None => TrainConfig::default(),
    };
    let demos = read_demos(req.demos)?;
    let (tree, init) = load_tree(&spec, req.params, Some(&demos))?;
    let loss = resolve_loss(&spec, req.loss, req.lambda, config.loss);
    let defaults = TrainOptions::default();
    let opts = TrainOptions {
        alpha: req.alpha.or(config.alpha),
        iterations: req.iterations.or(config.iterations).unwrap_or(defaults.iterations),
        seed: req.seed.or(config.seed).unwrap_or(defaults.seed),
        minibatch: req.minibatch.or(config.minibatch),
        momentum: req.momentum.or(config.momentum).unwrap_or(defaults.momentum),
    };

    let report = match loss.kind {
        LossKind::IndependentBaseline => train_independent_baseline(&tree, &init, &demos, &opts)?,
        _ => train_loss(&tree, &init, &demos, &loss, &opts)?,
    };

    let out = match report.aborted {
        Some(_) => {
            let mut name = req.out.as_os_str().to_owned();
            name.push(".partial");
            PathBuf::from(name)
        }
        None => req.out.to_path_buf(),
    };
    write_file(&out, &report.params.to_json()?)?;
    let history = match req.history {
        Some(p) => p.to_path_buf(),
        None => req.out.with_file_name("history.csv"),
    };
    write_file(&history, &history_csv(&report.history))?;

    let lambda = loss.lambda.clone().unwrap_or_else(|| spec.default_lambda());
    let subtask = |p: &ParamVector| subtask_loss(&tree, p, &demos, &lambda).ok();
    let joint = |p: &ParamVector| joint_loss(&tree, p, &demos).ok();
    let passed = report.aborted.is_none();
    let summary = json!({
        "ok": passed,
        "command": "train",
        "loss": loss.kind.name(),
        "lambda": lambda,
        "samples": demos.sample_count(),
        "parameters": init.len(),
        "iterations": report.history.len() - 1,
        "alpha": report.alpha,
        "initial_loss": report.history.first(),
        "final_loss": report.history.last(),
        "subtask_loss": {"initial": subtask(&init), "final": subtask(&report.params)},
        "joint_loss": {"initial": joint(&init), "final": joint(&report.params)},
        "aborted": report.aborted,
        "params": out.display().to_string(),
        "history": history.display().to_string(),
    });
    finish(summary, passed)
}

pub fn rollout(
    tree_path: &Path,
    params: Option<&Path>,
    q0: &[f64],
    out: &Path,
    summary: Option<&Path>,
    opts: RolloutOptions,
) -> Result<Outcome, CliError> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(CliError::Usage(format!("--dt must be positive, got {}", opts.dt)));
    }
    let spec = read_spec(tree_path)?;
    let (tree, params) = load_tree(&spec, params, None)?;
    let q0 = vector_arg(q0, tree.root_dim(), "--q0")?;
    let result = integrate(&tree, &params, &q0, &opts);
    let lyapunov = lyapunov_check(&result);

    let file = create_file(out)?;
    if !result.trajectory.is_empty() {
        result.trajectory.write_csv(file, result.potential_trace.as_deref())?;
    }
    let summary_path = match summary {
        Some(p) => p.to_path_buf(),
        None => out.with_extension("summary.json"),
    };
    let (status, message) = match &result.status {
        RolloutStatus::Converged => ("converged", None),
        RolloutStatus::MaxSteps => ("max_steps", None),
        RolloutStatus::Error(msg) => ("error", Some(msg.clone())),
    };
    let passed = !matches!(result.status, RolloutStatus::Error(_)) && lyapunov.as_ref().is_none_or(|l| l.passed);
    let report = json!({
        "ok": passed,
        "command": "rollout",
        "status": status,
        "message": message,
        "steps": result.steps,
        "dt": result.dt,
        "terminal_grad_norm": result.terminal_grad_norm,
        "max_descent_rate": result.max_descent_rate,
        "final_q": result.trajectory.q.last().map(|q| q.as_slice().to_vec()),
        "final_phi": result.potential_trace.as_ref().and_then(|p| p.last()),
        "lyapunov": lyapunov,
        "trajectory": out.display().to_string(),
    });
    write_file(&summary_path, &to_pretty(&report))?;
    finish(report, passed)
}

#[allow(clippy::too_many_arguments)]
pub fn gradcheck(
    tree_path: &Path,
    params: Option<&Path>,
    demo_paths: &[PathBuf],
    loss: Option<LossArg>,
    lambda: Option<Vec<f64>>,
    max_coords: usize,
    seed: u64,
    corrupt: bool,
) -> Result<Outcome, CliError> {
    let spec = read_spec(tree_path)?;
    let demos = read_demos(demo_paths)?;
    let (tree, params) = load_tree(&spec, params, Some(&demos))?;
    let loss = resolve_loss(&spec, loss, lambda, None);
    let objective = Objective::new(&tree, &params, &demos, &loss)?;
    let (value, mut analytic) = objective.value_and_gradient(&params, None)?;

    let n = params.len();
    let coords: Vec<usize> = if n <= max_coords {
        (0..n).collect()
    } else {
        let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, max_coords).into_vec();
        idx.sort_unstable();
        idx
    };
    if corrupt {
        for &i in &coords {
            analytic[i] = analytic[i] * 1.01 + 1e-3;
        }
    }
    let numeric = fd_gradient(|p| objective.value(p), &params, &coords, GRADIENT_STEP)?;
    let check = compare_gradients(&analytic, &numeric, &coords);
    let worst = check.worst_index.and_then(|i| {
        params
            .registry
            .iter()
            .find(|e| (e.offset..e.offset + e.len).contains(&i))
            .map(|e| format!("{}[{}]", e.name, i - e.offset))
    });
    let report = json!({
        "ok": check.passed,
        "command": "gradcheck",
        "loss": loss.kind.name(),
        "loss_value": value,
        "parameters": n,
        "checked": check.checked,
        "max_relative_error": check.max_relative_error,
        "max_small_abs_error": check.max_small_abs_error,
        "worst_parameter": worst,
    });
    finish(report, check.passed)
}

pub fn eval(
    tree_path: &Path,
    params: Option<&Path>,
    q: Option<&[f64]>,
    demo_paths: &[PathBuf],
    lambda: Option<Vec<f64>>,
) -> Result<Outcome, CliError> {
    if q.is_none() && demo_paths.is_empty() {
        return Err(CliError::Usage("eval needs --q, --demos or both".into()));
    }
    let spec = read_spec(tree_path)?;
    let demos = if demo_paths.is_empty() { None } else { Some(read_demos(demo_paths)?) };
    let (tree, params) = load_tree(&spec, params, demos.as_ref())?;
    let mut report = json!({"ok": true, "command": "eval"});
    if let Some(q) = q {
        let q = vector_arg(q, tree.root_dim(), "--q")?;
        let eval = tree.evaluate(&q, &params)?;
        report["q"] = json!(q.as_slice());
        report["policy"] = json!(eval.policy.as_slice());
        report["potential"] = json!(tree.potential_at(&eval.states, &params)?);
        report["root_metric_min_eigenvalue"] = json!(min_eigenvalue(eval.root_metric()));
    }
    if let Some(demos) = &demos {
        let lambda = lambda.unwrap_or_else(|| spec.default_lambda());
        report["samples"] = json!(demos.sample_count());
        report["joint_loss"] = json!(joint_loss(&tree, &params, demos)?);
        report["subtask_loss"] = json!(subtask_loss(&tree, &params, demos, &lambda)?);
        report["lambda"] = json!(lambda);
    }
    finish(report, true)
}
