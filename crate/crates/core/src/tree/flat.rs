use nalgebra::{DMatrix, DVector};

use super::{NodeId, TransformTree};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, SINGULAR_EIGENVALUE};
use crate::maps::DifferentiableMap;
use crate::params::ParamVector;
use crate::policies::{LeafInput, MetricSpace};

/// Solves `argmin_u sum_k |v_k - J_k u|^2_{M_k}` directly.
///
/// Each root-to-leaf chain is composed on its own (maps re-evaluated per
/// leaf, Jacobians multiplied by the chain rule), leaf velocities are
/// materialized, and the normal equations are solved by LU. Shares no
/// propagation code with the staged evaluation, so it serves as a check on it.
pub fn flat_solve(tree: &TransformTree, q: &DVector<f64>, params: &ParamVector) -> Result<DVector<f64>> {
    let d = tree.root_dim();
    let mut normal = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for leaf in tree.leaves() {
        let path = tree.path_to(leaf.node);
        let mut coord = q.clone();
        let mut jac = DMatrix::<f64>::identity(d, d);
        let mut parent_coord = None;
        for &node in &path[1..] {
            let edge = tree.parent_edge(node).expect("non-root node has an edge");
            let next = edge.map.value(&coord, params)?;
            jac = edge.map.jacobian(&coord, params)? * jac;
            parent_coord = Some(std::mem::replace(&mut coord, next));
        }
        let goal = match leaf.policy.latent_goal_source() {
            Some(g) => {
                let edge = tree.parent_edge(leaf.node).expect("latent leaf has an edge");
                Some(edge.map.value(g, params)?)
            }
            None => None,
        };
        let metric_input = match (leaf.policy.metric_space, &parent_coord) {
            (MetricSpace::Subtask, Some(p)) => p,
            _ => &coord,
        };
        let input = LeafInput {
            coord: &coord,
            metric_input,
            latent_goal: goal.as_ref(),
        };
        let vel = leaf.policy.velocity(input, params)?;
        let (_, m) = leaf.policy.evaluate(input, params)?;
        let jtm = jac.transpose() * m;
        normal += &jtm * &jac;
        rhs += jtm * vel;
    }
    let reg = tree.regularization();
    if reg > 0.0 {
        normal += DMatrix::<f64>::identity(d, d) * reg;
    } else {
        let lmin = min_eigenvalue(&normal);
        if lmin < SINGULAR_EIGENVALUE {
            return Err(Error::SingularMetric { min_eigenvalue: lmin });
        }
    }
    normal
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularMetric { min_eigenvalue: 0.0 })
}

impl TransformTree {
    /// Composed map value and Jacobian from the root to `u`, evaluated
    /// edge by edge without the staged passes.
    pub fn compose_to(&self, u: NodeId, q: &DVector<f64>, params: &ParamVector) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.root_dim();
        let mut coord = q.clone();
        let mut jac = DMatrix::<f64>::identity(d, d);
        for node in self.path_to(u).into_iter().skip(1) {
            let edge = self.parent_edge(node).expect("non-root node has an edge");
            let (y, j) = edge.map.value_and_jacobian(&coord, params)?;
            jac = j * jac;
            coord = y;
        }
        Ok((coord, jac))
    }
}
