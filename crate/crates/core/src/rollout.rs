//! Closed-loop integration of `qdot = pi(q)` and Lyapunov monitoring.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::learning::Trajectory;
use crate::params::ParamVector;
use crate::tree::TransformTree;

/// Allowed per-step potential increase is `LYAPUNOV_SLACK_GAIN * dt^2`.
pub const LYAPUNOV_SLACK_GAIN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutOptions {
    pub dt: f64,
    pub max_steps: usize,
    pub grad_tol: f64,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            max_steps: 1_000_000,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "message")]
pub enum RolloutStatus {
    Converged,
    MaxSteps,
    Error(String),
}

#[derive(Clone, Debug)]
pub struct RolloutResult {
    /// Visited states with the policy velocity at each.
    pub trajectory: Trajectory,
    /// `Phi_r` along the trajectory when every leaf is a gradient system.
    pub potential_trace: Option<Vec<f64>>,
    /// `|p_r|` at the last state, which equals `|grad Phi_r|` for gradient systems.
    pub terminal_grad_norm: f64,
    /// Largest `-p_r^T pi` seen; nonpositive for natural gradient flows.
    pub max_descent_rate: f64,
    pub status: RolloutStatus,
    pub steps: usize,
    pub dt: f64,
}

struct Sample {
    policy: DVector<f64>,
    grad_norm: f64,
    descent_rate: f64,
    potential: Option<f64>,
}

fn sample(tree: &TransformTree, params: &ParamVector, q: &DVector<f64>) -> Result<Sample> {
    let eval = tree.evaluate(q, params)?;
    let potential = tree.potential_at(&eval.states, params)?;
    let p = eval.root_force();
    Ok(Sample {
        grad_norm: p.norm(),
        descent_rate: -p.dot(&eval.policy),
        potential,
        policy: eval.policy,
    })
}

/// Fixed-step RK4. Stops when `|grad Phi_r| <= grad_tol` or after
/// `max_steps` steps; a failed policy evaluation ends the rollout with the
/// states visited so far.
pub fn integrate(tree: &TransformTree, params: &ParamVector, q0: &DVector<f64>, opts: &RolloutOptions) -> RolloutResult {
    let dt = opts.dt;
    let mut t = vec![];
    let mut qs = vec![];
    let mut vs = vec![];
    let mut phi = Some(vec![]);
    let mut max_rate = f64::NEG_INFINITY;
    let mut q = q0.clone();
    let mut steps = 0;
    let mut grad_norm = f64::NAN;
    let status = loop {
        let s = match sample(tree, params, &q) {
            Ok(s) => s,
            Err(e) => break RolloutStatus::Error(e.to_string()),
        };
        t.push(steps as f64 * dt);
        qs.push(q.clone());
        grad_norm = s.grad_norm;
        max_rate = max_rate.max(s.descent_rate);
        phi = match (phi, s.potential) {
            (Some(mut trace), Some(v)) => {
                trace.push(v);
                Some(trace)
            }
            _ => None,
        };
        let k1 = s.policy;
        vs.push(k1.clone());
        if s.grad_norm <= opts.grad_tol {
            break RolloutStatus::Converged;
        }
        if steps >= opts.max_steps {
            break RolloutStatus::MaxSteps;
        }
        let step = (|| -> Result<DVector<f64>> {
            let k2 = tree.evaluate_policy(&(&q + &k1 * (0.5 * dt)), params)?;
            let k3 = tree.evaluate_policy(&(&q + &k2 * (0.5 * dt)), params)?;
            let k4 = tree.evaluate_policy(&(&q + &k3 * dt), params)?;
            Ok(&q + (&k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
        })();
        match step {
            Ok(next) => q = next,
            Err(e) => break RolloutStatus::Error(e.to_string()),
        }
        steps += 1;
    };
    let trajectory = Trajectory { t, q: qs, qdot: vs };
    RolloutResult {
        potential_trace: phi.filter(|p| !p.is_empty()),
        trajectory,
        terminal_grad_norm: grad_norm,
        max_descent_rate: max_rate,
        status,
        steps,
        dt,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Largest single-step increase of `Phi_r` (0 when it never increases).
    pub max_violation: f64,
    /// Number of steps whose increase exceeds `slack`.
    pub violations: usize,
    pub slack: f64,
    pub passed: bool,
}

/// Checks `Phi_{t+1} <= Phi_t + slack` along a rollout; `None` without a potential trace.
pub fn lyapunov_check(result: &RolloutResult) -> Option<LyapunovReport> {
    let trace = result.potential_trace.as_ref()?;
    let slack = LYAPUNOV_SLACK_GAIN * result.dt * result.dt;
    let mut max_violation: f64 = 0.0;
    let mut violations = 0;
    for w in trace.windows(2) {
        let inc = w[1] - w[0];
        max_violation = max_violation.max(inc);
        if inc > slack {
            violations += 1;
        }
    }
    Some(LyapunovReport {
        max_violation,
        violations,
        slack,
        passed: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::LeafPolicy;
    use crate::tree::{Leaf, NodeId};

    fn scalar_well() -> TransformTree {
        TransformTree::new(
            vec![1],
            vec![],
            vec![Leaf {
                name: "well".into(),
                node: NodeId(0),
                policy: LeafPolicy::attractor(DVector::zeros(1), 1.0, 1.0),
            }],
        )
        .unwrap()
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = RolloutOptions {
            dt: 0.01,
            max_steps: 100,
            grad_tol: 0.0,
        };
        let r = integrate(&scalar_well(), &ParamVector::new(), &DVector::from_element(1, 2.0), &opts);
        assert_eq!(r.status, RolloutStatus::MaxSteps);
        let q1 = r.trajectory.q.last().unwrap()[0];
        assert!((q1 - 2.0 * (-1.0f64).exp()).abs() < 1e-6);
        let report = lyapunov_check(&r).unwrap();
        assert!(report.passed && report.max_violation <= 0.0);
    }

    #[test]
    fn equilibrium_start_converges_immediately() {
        let r = integrate(&scalar_well(), &ParamVector::new(), &DVector::zeros(1), &RolloutOptions::default());
        assert_eq!(r.status, RolloutStatus::Converged);
        assert_eq!(r.steps, 0);
        assert_eq!(r.trajectory.len(), 1);
    }
}
