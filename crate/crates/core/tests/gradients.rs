use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tree_motion::fixtures::{perturbed_policy_demos, random_tree, RandomTreeOptions};
use tree_motion::gradients::policy_vjp;
use tree_motion::learning::{LossSpec, Objective};
use tree_motion::Error;
use tree_motion::verify::{compare_gradients, fd_gradient, GRADIENT_STEP};

fn learnable(natural_gradient_only: bool) -> RandomTreeOptions {
    RandomTreeOptions {
        learnable: true,
        natural_gradient_only,
        diffeo_into_leaves: true,
        ..Default::default()
    }
}

/// Returns false when the seed was skipped.
fn check_loss(seed: u64, opts: &RandomTreeOptions, mut spec: impl FnMut(usize) -> LossSpec) -> bool {
    let (tree, params, _) = random_tree(seed, opts);
    if params.is_empty() {
        return false;
    }
    let demos = perturbed_policy_demos(&tree, &params, seed + 1000, 3, 0.3).unwrap();
    let obj = Objective::new(&tree, &params, &demos, &spec(tree.leaves().len()))
        .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    let grad = match obj.value_and_gradient(&params, None) {
        Ok((l, g)) if l < 100.0 => g,
        // Some independent subtrees have a singular or nearly singular metric.
        // Large losses also put difference noise (~ eps L / h) above the
        // absolute tolerance.
        Ok(_) | Err(Error::SingularMetric { .. }) => return false,
        Err(e) => panic!("seed {seed}: {e}"),
    };
    let coords: Vec<usize> = (0..params.len()).collect();
    let fd = fd_gradient(|p| obj.value(p), &params, &coords, GRADIENT_STEP).unwrap();
    let report = compare_gradients(&grad, &fd, &coords);
    assert!(report.passed, "seed {seed}: {report:?}");
    true
}

#[test]
fn joint_loss_gradient_matches_differences() {
    let checked = (0..100).filter(|&seed| check_loss(seed, &learnable(false), |_| LossSpec::joint())).count();
    assert!(checked >= 50, "only {checked} trees checked");
}

#[test]
fn subtask_loss_gradient_matches_differences() {
    let checked = (0..100)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            check_loss(seed, &learnable(false), |n| {
                LossSpec::subtask((0..n).map(|_| rng.random_range(0.0..2.0)).collect())
            })
        })
        .count();
    assert!(checked >= 50, "only {checked} trees checked");
}

#[test]
fn baseline_gradient_matches_differences() {
    let checked = (0..200).filter(|&seed| check_loss(seed, &learnable(true), |_| LossSpec::baseline())).count();
    assert!(checked >= 50, "only {checked} trees checked");
}

#[test]
fn policy_vjp_matches_differences() {
    for seed in 0..100 {
        let (tree, params, q) = random_tree(seed, &learnable(false));
        if params.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DVector::from_fn(q.len(), |_, _| rng.random_range(-1.0..1.0));
        let (_, grad) = policy_vjp(&tree, &q, &params, &g).unwrap();
        let coords: Vec<usize> = (0..params.len()).collect();
        let fd = fd_gradient(|p| Ok(g.dot(&tree.evaluate_policy(&q, p)?)), &params, &coords, GRADIENT_STEP).unwrap();
        let report = compare_gradients(&grad, &fd, &coords);
        assert!(report.passed, "seed {seed}: {report:?}");
    }
}
