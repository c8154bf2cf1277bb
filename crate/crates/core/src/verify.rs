//! Central finite-difference checks of analytic derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::maps::DifferentiableMap;
use crate::params::ParamVector;
use crate::tree::{flat_solve, TransformTree};

/// Step for Jacobian checks of maps.
pub const JACOBIAN_STEP: f64 = 1e-6;
/// Step for parameter-gradient checks.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Components below this magnitude are compared in absolute terms.
pub const SMALL_GRADIENT: f64 = 1e-3;
pub const GRADIENT_REL_TOL: f64 = 1e-4;
pub const GRADIENT_ABS_TOL: f64 = 1e-7;

pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        cols.push((f(&xp)? - f(&xm)?) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

/// `|a - b|_max / max(|b|_max, 1)`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// Largest relative error between analytic and differenced edge Jacobians
/// at the node coordinates reached from `q`, with the worst edge's name.
pub fn check_edge_jacobians(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector) -> Result<(f64, Option<String>)> {
    let states = tree.forward_pass(q, params)?;
    let mut worst = (0.0, None);
    for e in tree.edges() {
        let x = &states[e.parent.0].coord;
        let fd = fd_jacobian(|y| e.map.value(y, params), x, JACOBIAN_STEP)?;
        let err = relative_error(&states[e.child.0].jac_to_parent, &fd);
        if err > worst.0 {
            worst = (err, Some(e.name.clone()));
        }
    }
    Ok(worst)
}

/// `|pi_tree - pi_flat|_inf` at `q`.
pub fn tree_flat_gap(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector) -> Result<f64> {
    let a = tree.evaluate_policy(q, params)?;
    let b = flat_solve(tree, q, params)?;
    Ok((a - b).amax())
}

/// Largest condition number among the leaf metrics at `q`. The flat solve
/// materializes `v_k = M_k^-1 p_k`, so its agreement with the staged
/// evaluation degrades roughly as this times machine epsilon.
pub fn leaf_metric_condition(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector) -> Result<f64> {
    let mut states = tree.forward_pass(q, params)?;
    tree.leaf_evaluate(&mut states, params)?;
    Ok(tree
        .leaves()
        .iter()
        .map(|l| {
            let ev = states[l.node.0].pulled_metric.clone().symmetric_eigenvalues();
            ev.max() / ev.min()
        })
        .fold(1.0, f64::max))
}

/// Allowed `tree_flat_gap` at `q`: `1e-9` relative, widened to
/// `100 eps kappa` when a leaf metric is ill conditioned.
pub fn tree_flat_tolerance(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector, policy_scale: f64) -> Result<f64> {
    let kappa = leaf_metric_condition(tree, q, params)?;
    Ok(1e-9_f64.max(100.0 * f64::EPSILON * kappa) * policy_scale.max(1.0))
}

/// `-grad_q Phi_r` by central differences.
pub fn fd_neg_potential_gradient(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector, h: f64) -> Result<Option<DVector<f64>>> {
    let mut out = DVector::zeros(q.len());
    for j in 0..q.len() {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[j] += h;
        qm[j] -= h;
        match (tree.potential(&qp, params)?, tree.potential(&qm, params)?) {
            (Some(a), Some(b)) => out[j] = -(a - b) / (2.0 * h),
            _ => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Central differences of a scalar function of the parameters, over `coords`.
pub fn fd_gradient<F>(f: F, params: &ParamVector, coords: &[usize], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&ParamVector) -> Result<f64>,
{
    let mut out = Vec::with_capacity(coords.len());
    let mut p = params.clone();
    for &i in coords {
        let orig = p.values[i];
        p.values[i] = orig + h;
        let fp = f(&p)?;
        p.values[i] = orig - h;
        let fm = f(&p)?;
        p.values[i] = orig;
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub checked: usize,
    /// Largest relative error among components at or above `SMALL_GRADIENT`.
    pub max_relative_error: f64,
    /// Largest absolute error among components below `SMALL_GRADIENT`.
    pub max_small_abs_error: f64,
    /// Parameter index of the worst failing component, if any.
    pub worst_index: Option<usize>,
    pub passed: bool,
}

/// Compares `analytic[coords[i]]` with `numeric[i]`. A component passes if
/// its relative error is below `GRADIENT_REL_TOL`, or, when both values are
/// below `SMALL_GRADIENT` in magnitude, its absolute error is below
/// `GRADIENT_ABS_TOL`.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64], coords: &[usize]) -> GradientCheck {
    let mut report = GradientCheck {
        checked: coords.len(),
        max_relative_error: 0.0,
        max_small_abs_error: 0.0,
        worst_index: None,
        passed: true,
    };
    let mut worst_score = 0.0;
    for (&i, &n) in coords.iter().zip(numeric) {
        let a = analytic[i];
        let err = (a - n).abs();
        let scale = a.abs().max(n.abs());
        let (ok, score) = if scale < SMALL_GRADIENT {
            report.max_small_abs_error = report.max_small_abs_error.max(err);
            (err < GRADIENT_ABS_TOL, err / GRADIENT_ABS_TOL)
        } else {
            let rel = err / scale;
            report.max_relative_error = report.max_relative_error.max(rel);
            (rel < GRADIENT_REL_TOL, rel / GRADIENT_REL_TOL)
        };
        if !ok || !err.is_finite() {
            report.passed = false;
            if score > worst_score || !err.is_finite() {
                worst_score = score;
                report.worst_index = Some(i);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_jacobian_of_square() {
        let x = DVector::from_vec(vec![2.0, 5.0]);
        let j = fd_jacobian(|v| Ok(DVector::from_element(1, v[0] * v[0])), &x, 1e-6).unwrap();
        assert!((j[(0, 0)] - 4.0).abs() < 1e-8 && j[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn comparison_flags_corruption() {
        let a = [1.0, 2e-4, 3.0];
        assert!(compare_gradients(&a, &[1.0, 2e-4 + 1e-9, 3.0], &[0, 1, 2]).passed);
        let bad = compare_gradients(&a, &[1.0, 2e-4, 3.01], &[0, 1, 2]);
        assert!(!bad.passed);
        assert_eq!(bad.worst_index, Some(2));
    }
}
