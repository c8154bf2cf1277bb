use nalgebra::{DMatrix, DVector};
use tree_motion::fixtures::{conflicting_demos, CONFLICTING_ARM};
use tree_motion::gradients::policy_param_jacobian;
use tree_motion::learning::{
    build_with_demos, joint_loss, loss_gradient, subtask_loss, train, train_independent_baseline, DemoSet, LossSpec,
    Objective, TrainOptions, Trajectory,
};
use tree_motion::maps::{LinearMap, Map};
use tree_motion::policies::{LeafPolicy, Metric, Potential, Velocity};
use tree_motion::spec::TreeSpec;
use tree_motion::{Edge, Error, Leaf, NodeId, ParamVector, TransformTree, Weights};

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn demos(samples: &[(&[f64], &[f64])]) -> DemoSet {
    let t = (0..samples.len()).map(|i| i as f64).collect();
    let q = samples.iter().map(|(q, _)| v(q)).collect();
    let qd = samples.iter().map(|(_, qd)| v(qd)).collect();
    DemoSet::new(vec![Trajectory::new(t, q, Some(qd)).unwrap()]).unwrap()
}

fn edge(parent: usize, child: usize, map: Map) -> Edge {
    Edge {
        name: format!("e{child}"),
        parent: NodeId(parent),
        child: NodeId(child),
        map,
    }
}

fn leaf(node: usize, policy: LeafPolicy) -> Leaf {
    Leaf {
        name: format!("leaf{node}"),
        node: NodeId(node),
        policy,
    }
}

/// One identity leaf whose velocity is the learnable vector itself.
fn direct_velocity(init: &[f64]) -> (TransformTree, ParamVector) {
    let mut params = ParamVector::new();
    let w = Weights::allocate(&mut params, "v".into(), init.to_vec(), true);
    let n = init.len();
    let tree = TransformTree::new(
        vec![n, n],
        vec![edge(0, 1, Map::Identity(n))],
        vec![leaf(1, LeafPolicy::raw(Velocity::Param(w), Metric::identity(n)))],
    )
    .unwrap();
    (tree, params)
}

#[test]
fn joint_loss_examples() {
    let (tree, params) = direct_velocity(&[0.0, 0.0]);
    assert_eq!(joint_loss(&tree, &params, &demos(&[(&[1.0, 1.0], &[3.0, 4.0])])).unwrap(), 25.0);
    let (tree, params) = direct_velocity(&[3.0, 4.0]);
    assert_eq!(joint_loss(&tree, &params, &demos(&[(&[1.0, 1.0], &[3.0, 4.0])])).unwrap(), 0.0);
}

#[test]
fn subtask_loss_projects_the_residual() {
    // Leaf 1 sees the first coordinate; leaf 2 keeps the root metric full rank.
    let tree = TransformTree::new(
        vec![2, 1, 2],
        vec![
            edge(0, 1, Map::Linear(LinearMap {
                matrix: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                offset: DVector::zeros(1),
            })),
            edge(0, 2, Map::Identity(2)),
        ],
        vec![leaf(1, LeafPolicy::damper(1.0, 1)), leaf(2, LeafPolicy::damper(1.0, 2))],
    )
    .unwrap();
    let d = demos(&[(&[0.5, -0.5], &[3.0, 7.0])]);
    let none = ParamVector::new();
    assert_eq!(subtask_loss(&tree, &none, &d, &[1.0, 0.0]).unwrap(), 9.0);
    assert_eq!(subtask_loss(&tree, &none, &d, &[0.0, 0.0]).unwrap(), 0.0);
}

#[test]
fn zero_weights_give_zero_gradient() {
    let (tree, params) = direct_velocity(&[0.2, -0.1]);
    let d = demos(&[(&[0.0, 0.0], &[1.0, 2.0])]);
    let g = loss_gradient(&tree, &params, &d, &LossSpec::subtask(vec![0.0])).unwrap();
    assert!(g.iter().all(|&x| x == 0.0));
    let err = train(&tree, &params, &d, &LossSpec::subtask(vec![0.0]), &TrainOptions::default());
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn identity_leaf_reduces_subtask_to_joint_loss() {
    let (tree, params) = direct_velocity(&[0.2, -0.1]);
    let d = demos(&[(&[0.0, 0.0], &[1.0, 2.0]), (&[1.0, 0.0], &[-1.0, 0.5])]);
    assert_eq!(subtask_loss(&tree, &params, &d, &[1.0]).unwrap(), joint_loss(&tree, &params, &d).unwrap());
}

fn arm_with_demos() -> (TransformTree, ParamVector, DemoSet) {
    let spec = TreeSpec::from_json(CONFLICTING_ARM).unwrap();
    let all = conflicting_demos();
    let tr = &all.trajectories[1];
    let few = DemoSet::new(vec![Trajectory::new(tr.t[..5].to_vec(), tr.q[..5].to_vec(), Some(tr.qdot[..5].to_vec())).unwrap()])
        .unwrap();
    let (tree, params) = build_with_demos(&spec, &all).unwrap();
    (tree, params, few)
}

#[test]
fn gradient_is_linear_in_the_weights() {
    let (tree, params, d) = arm_with_demos();
    let g1 = loss_gradient(&tree, &params, &d, &LossSpec::subtask(vec![1.0, 0.0, 0.0])).unwrap();
    let g2 = loss_gradient(&tree, &params, &d, &LossSpec::subtask(vec![2.0, 0.0, 0.0])).unwrap();
    assert!(g1.iter().zip(&g2).all(|(a, b)| 2.0 * a == *b));
}

#[test]
fn loss_gradient_is_jacobian_transpose_times_residual_gradient() {
    let (tree, params, d) = arm_with_demos();
    let (q, qd) = d.samples()[0].clone();
    let one = demos(&[(q.as_slice(), qd.as_slice())]);
    let g = loss_gradient(&tree, &params, &one, &LossSpec::joint()).unwrap();
    let r = &qd - tree.evaluate_policy(&q, &params).unwrap();
    let chained = policy_param_jacobian(&tree, &q, &params).unwrap().tr_mul(&(r * -2.0));
    let scale = chained.amax().max(1.0);
    assert!(g.iter().zip(chained.iter()).all(|(a, b)| (a - b).abs() <= 1e-12 * scale));
}

#[test]
fn gradient_vanishes_when_demos_are_reproduced() {
    let (tree, params, _) = arm_with_demos();
    let q = v(&[0.3, 0.9, -0.4]);
    let qd = tree.evaluate_policy(&q, &params).unwrap();
    let d = demos(&[(q.as_slice(), qd.as_slice())]);
    let g = loss_gradient(&tree, &params, &d, &LossSpec::joint()).unwrap();
    assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-8);
}

#[test]
fn quadratic_toy_follows_the_closed_form() {
    // L(theta) = sum_i |qd_i - theta|^2 has curvature 2N; gradient descent
    // contracts the error by (1 - 2 N alpha) per step.
    let (tree, params) = direct_velocity(&[2.0, -1.0]);
    let d = demos(&[(&[0.0, 0.0], &[1.0, 0.0]), (&[1.0, 0.0], &[0.0, 1.0]), (&[0.0, 1.0], &[2.0, 2.0])]);
    let n = 3.0;
    let alpha = 0.9 / n;
    let opts = TrainOptions {
        alpha: Some(alpha),
        iterations: 20,
        ..Default::default()
    };
    let report = train(&tree, &params, &d, &LossSpec::joint(), &opts).unwrap();
    let mean = v(&[1.0, 1.0]);
    let floor: f64 = d.samples().iter().map(|(_, qd)| (qd - &mean).norm_squared()).sum();
    let e0 = (v(&params.values) - &mean).norm_squared();
    for (k, l) in report.history.iter().enumerate() {
        let expected = floor + n * e0 * (1.0 - 2.0 * n * alpha).powi(2 * k as i32);
        assert!((l - expected).abs() < 1e-12 * expected.max(1.0), "iteration {k}: {l} vs {expected}");
    }
    assert!(report.history.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn zero_iterations_keep_parameters() {
    let (tree, params, d) = arm_with_demos();
    let opts = TrainOptions {
        iterations: 0,
        ..Default::default()
    };
    let report = train(&tree, &params, &d, &LossSpec::joint(), &opts).unwrap();
    assert_eq!(report.params.values, params.values);
    assert_eq!(report.history.len(), 1);
}

#[test]
fn training_is_deterministic() {
    let (tree, params, d) = arm_with_demos();
    let opts = TrainOptions {
        iterations: 5,
        seed: 3,
        minibatch: Some(2),
        momentum: 0.5,
        ..Default::default()
    };
    let a = train(&tree, &params, &d, &LossSpec::joint(), &opts).unwrap();
    let b = train(&tree, &params, &d, &LossSpec::joint(), &opts).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params.values, b.params.values);
}

#[test]
fn divergent_step_aborts_with_last_finite_parameters() {
    let (tree, params) = direct_velocity(&[0.0]);
    let d = demos(&[(&[0.0], &[1.0])]);
    let opts = TrainOptions {
        alpha: Some(1e300),
        iterations: 10,
        ..Default::default()
    };
    let report = train(&tree, &params, &d, &LossSpec::joint(), &opts).unwrap();
    assert!(report.aborted.is_some());
    assert!(report.params.values.iter().all(|x| x.is_finite()));
    assert!(report.history.iter().all(|x| x.is_finite()));
}

#[test]
fn baseline_on_a_single_leaf_matches_the_subtask_loss() {
    let spec = r#"{
      "nodes": [{"id": 0, "dim": 2}, {"id": 1, "dim": 2}],
      "edges": [{"parent": 0, "child": 1, "map": {"kind": "identity"}}],
      "leaves": [{"node": 1, "policy": {"kind": "natural_gradient",
        "potential": {"kind": "quadratic", "goal": [0.5, 0.0], "gain": 1.0},
        "metric": {"kind": "cholesky_net", "hidden": [8], "seed": 2}, "learnable": true}}]
    }"#;
    let (tree, params) = TreeSpec::from_json(spec).unwrap().build(&Default::default()).unwrap();
    let d = demos(&[(&[0.0, 0.0], &[1.0, 0.2]), (&[1.0, 1.0], &[-0.5, -1.0])]);
    let base = Objective::new(&tree, &params, &d, &LossSpec::baseline()).unwrap();
    let sub = Objective::new(&tree, &params, &d, &LossSpec::subtask(vec![1.0])).unwrap();
    let (lb, gb) = base.value_and_gradient(&params, None).unwrap();
    let (ls, gs) = sub.value_and_gradient(&params, None).unwrap();
    assert!((lb - ls).abs() < 1e-12 * ls);
    assert!(gb.iter().zip(&gs).all(|(a, b)| (a - b).abs() < 1e-12 * (1.0 + b.abs())));
}

#[test]
fn baseline_requires_gradient_leaves_and_leaves_frozen_ones_alone() {
    let (tree, params) = direct_velocity(&[0.0, 0.0]);
    let d = demos(&[(&[0.0, 0.0], &[1.0, 0.2])]);
    let err = train_independent_baseline(&tree, &params, &d, &TrainOptions::default());
    assert!(matches!(err, Err(Error::Config(_))));

    let frozen = TransformTree::new(
        vec![2, 2],
        vec![edge(0, 1, Map::Identity(2))],
        vec![leaf(1, LeafPolicy::natural_gradient(
            Potential::Quadratic { goal: v(&[1.0, 0.0]), gain: 1.0 },
            Metric::identity(2),
        ))],
    )
    .unwrap();
    let report = train_independent_baseline(&frozen, &ParamVector::new(), &d, &TrainOptions::default()).unwrap();
    assert!(report.params.is_empty());
    assert_eq!(report.history.len(), 1);
}
