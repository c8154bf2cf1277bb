//! Hand-derived parameter gradients of the composed policy.
//!
//! For a scalar `l = g^T pi` with `pi = M_r^-1 p_r`, set `lambda = M_r^-1 g`.
//! Then `dl/dtheta` is the partial derivative of
//! `S = sum_k a_k^T p_k - a_k^T M_k b_k`, `a_k = J_k lambda`, `b_k = J_k pi`,
//! with `lambda` and `pi` held fixed. The tangents `a`, `b` are pushed down
//! the tree and `S` is differentiated in one reverse sweep.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::maps::DifferentiableMap;
use crate::params::ParamVector;
use crate::tree::{at_edge, at_leaf, Evaluation, NodeId, TransformTree};

/// `(d pi / d theta)^T g` at an existing evaluation, added into `grad`.
pub fn policy_vjp_at(
    tree: &TransformTree,
    eval: &Evaluation,
    params: &ParamVector,
    g: &DVector<f64>,
    grad: &mut [f64],
) -> Result<()> {
    let n = tree.node_count();
    let states = &eval.states;
    let lambda = eval.solver.solve(g);

    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    a.push(lambda);
    b.push(eval.policy.clone());
    for e in tree.edges() {
        let jac = &states[e.child.0].jac_to_parent;
        a.push(jac * &a[e.parent.0]);
        b.push(jac * &b[e.parent.0]);
    }

    let zeros = |u: usize| DVector::<f64>::zeros(tree.dim(NodeId(u)));
    let mut x_bar: Vec<DVector<f64>> = (0..n).map(zeros).collect();
    let mut a_bar: Vec<DVector<f64>> = (0..n).map(zeros).collect();
    let mut b_bar: Vec<DVector<f64>> = (0..n).map(zeros).collect();

    for (k, leaf) in tree.leaves().iter().enumerate() {
        let u = leaf.node.0;
        let dependent = tree.is_param_dependent(leaf.node);
        if !dependent && !leaf.policy.is_learnable() {
            continue;
        }
        let goal = eval.latent_goals[k].as_ref();
        let input = tree.leaf_input(k, states, goal);
        let adj = leaf
            .policy
            .adjoint(input, &a[u], &b[u], params, grad)
            .map_err(|err| at_leaf(err, &leaf.name))?;
        if !dependent {
            continue;
        }
        let st = &states[u];
        a_bar[u] += &st.pulled_force - &st.pulled_metric * &b[u];
        b_bar[u] -= &st.pulled_metric * &a[u];
        x_bar[u] += adj.coord;
        x_bar[tree.metric_node(leaf.node, &leaf.policy).0] += adj.metric_input;
        if let (Some(goal_bar), Some(source)) = (adj.latent_goal, leaf.policy.latent_goal_source()) {
            let edge = tree.parent_edge(leaf.node).expect("latent leaf has an edge");
            edge.map
                .value_param_adjoint(source, &goal_bar, params, grad)
                .map_err(|err| at_edge(err, &edge.name))?;
        }
    }

    for e in tree.edges().iter().rev() {
        let (c, u) = (e.child.0, e.parent.0);
        if !tree.is_param_dependent(e.child) {
            continue;
        }
        let x = &states[u].coord;
        let mut x_part = e.map.tangent_adjoint(x, &a_bar[c], &a[u], params, grad)?;
        x_part += e.map.tangent_adjoint(x, &b_bar[c], &b[u], params, grad)?;
        if e.map.is_learnable() {
            e.map.value_param_adjoint(x, &x_bar[c], params, grad)?;
        }
        if tree.is_param_dependent(e.parent) {
            let jac = &states[c].jac_to_parent;
            let (xc, ac, bc) = (jac.tr_mul(&x_bar[c]), jac.tr_mul(&a_bar[c]), jac.tr_mul(&b_bar[c]));
            x_bar[u] += xc + x_part;
            a_bar[u] += ac;
            b_bar[u] += bc;
        }
    }
    Ok(())
}

/// Evaluates `pi(q)` and `(d pi / d theta)^T g`.
pub fn policy_vjp(
    tree: &TransformTree,
    q: &DVector<f64>,
    params: &ParamVector,
    g: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<f64>)> {
    let eval = tree.evaluate(q, params)?;
    let mut grad = vec![0.0; params.len()];
    policy_vjp_at(tree, &eval, params, g, &mut grad)?;
    Ok((eval.policy, grad))
}

/// `d pi / d theta`, a `d x |theta|` matrix, one reverse sweep per row.
pub fn policy_param_jacobian(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector) -> Result<DMatrix<f64>> {
    let eval = tree.evaluate(q, params)?;
    let d = tree.root_dim();
    let mut jac = DMatrix::zeros(d, params.len());
    for i in 0..d {
        let mut row = vec![0.0; params.len()];
        policy_vjp_at(tree, &eval, params, &DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 }), &mut row)?;
        jac.row_mut(i).copy_from_slice(&row);
    }
    Ok(jac)
}
