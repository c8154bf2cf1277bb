use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::demos::DemoSet;
use super::loss::{LossSpec, Objective};
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::tree::TransformTree;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Fixed step size; found by backtracking on the first iteration when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minibatch: Option<usize>,
    #[serde(default)]
    pub momentum: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            alpha: None,
            iterations: 100,
            seed: 0,
            minibatch: None,
            momentum: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub params: ParamVector,
    /// Full-batch loss before the first step and after each step.
    pub history: Vec<f64>,
    pub alpha: f64,
    /// Set when training stopped early; `params` then holds the last finite iterate.
    pub aborted: Option<String>,
}

/// Gradient descent `theta <- theta - alpha grad L` on `loss`.
pub fn train(
    tree: &TransformTree,
    params: &ParamVector,
    demos: &DemoSet,
    loss: &LossSpec,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    loss.validate(tree)?;
    let objective = Objective::new(tree, params, demos, loss)?;
    train_objective(&objective, params, opts)
}

/// Trains every learnable leaf on its own mapped demonstrations; leaves are
/// composed only when the trained policy runs.
pub fn train_independent_baseline(
    tree: &TransformTree,
    params: &ParamVector,
    demos: &DemoSet,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    train(tree, params, demos, &LossSpec::baseline(), opts)
}

fn stepped(params: &ParamVector, dir: &[f64], alpha: f64) -> ParamVector {
    params.with_values(params.values.iter().zip(dir).map(|(p, d)| p - alpha * d).collect())
}

fn finite_loss(objective: &Objective<'_>, params: &ParamVector) -> Option<f64> {
    objective.value(params).ok().filter(|l| l.is_finite())
}

/// Backtracking from 1, with doubling while the sufficient-decrease test
/// keeps passing and the loss keeps falling.
fn line_search(objective: &Objective<'_>, params: &ParamVector, loss: f64, grad: &[f64]) -> f64 {
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    if g2 == 0.0 {
        return 1.0;
    }
    let accept = |alpha: f64| finite_loss(objective, &stepped(params, grad, alpha)).filter(|&l| l <= loss - ARMIJO_C * alpha * g2);
    let mut alpha = 1.0;
    match accept(alpha) {
        Some(mut best) => {
            for _ in 0..MAX_HALVINGS {
                match accept(2.0 * alpha) {
                    Some(l) if l < best => {
                        alpha *= 2.0;
                        best = l;
                    }
                    _ => break,
                }
            }
        }
        None => {
            for _ in 0..MAX_HALVINGS {
                alpha *= 0.5;
                if accept(alpha).is_some() {
                    break;
                }
            }
        }
    }
    alpha
}

pub fn train_objective(objective: &Objective<'_>, init: &ParamVector, opts: &TrainOptions) -> Result<TrainReport> {
    if let Some(a) = opts.alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {a}")));
        }
    }
    if !(0.0..1.0).contains(&opts.momentum) {
        return Err(Error::Config("momentum must lie in [0, 1)".into()));
    }
    let n = objective.sample_count();
    if let Some(b) = opts.minibatch {
        if b == 0 || b > n {
            return Err(Error::Config(format!("minibatch size must be between 1 and {n}")));
        }
    }
    let full_batch = opts.minibatch.is_none_or(|b| b == n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Option<Vec<usize>> {
        let b = opts.minibatch.filter(|_| !full_batch)?;
        let mut idx = sample(rng, n, b).into_vec();
        idx.sort_unstable();
        Some(idx)
    };

    let mut params = init.clone();
    let (loss0, mut grad) = objective.value_and_gradient(&params, draw(&mut rng).as_deref())?;
    let loss0 = if full_batch { loss0 } else { objective.value(&params)? };
    if !loss0.is_finite() {
        return Err(Error::NonFinite {
            leaf: "initial loss".into(),
        });
    }
    let mut history = vec![loss0];
    if opts.iterations == 0 || params.is_empty() {
        return Ok(TrainReport {
            params,
            history,
            alpha: opts.alpha.unwrap_or(0.0),
            aborted: None,
        });
    }
    let alpha = match opts.alpha {
        Some(a) => a,
        None => line_search(objective, &params, loss0, &grad),
    };

    let mut velocity = vec![0.0; params.len()];
    let mut aborted = None;
    for it in 1..=opts.iterations {
        for (v, g) in velocity.iter_mut().zip(&grad) {
            *v = opts.momentum * *v + g;
        }
        let next = stepped(&params, &velocity, alpha);
        let batch = draw(&mut rng);
        let result = objective.value_and_gradient(&next, batch.as_deref()).and_then(|(l, g)| {
            let l = if full_batch { l } else { objective.value(&next)? };
            Ok((l, g))
        });
        match result {
            Ok((l, g)) if l.is_finite() && g.iter().all(|x| x.is_finite()) => {
                params = next;
                grad = g;
                history.push(l);
            }
            Ok(_) => {
                aborted = Some(format!("non-finite loss at iteration {it}"));
                break;
            }
            Err(e) => {
                aborted = Some(format!("iteration {it}: {e}"));
                break;
            }
        }
    }
    Ok(TrainReport {
        params,
        history,
        alpha,
        aborted,
    })
}
