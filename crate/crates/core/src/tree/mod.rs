//! Transform trees and the four-stage composition: forward pass, leaf
//! evaluation, backward pullback, root resolve.

mod flat;

pub use flat::flat_solve;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, RootSolver};
use crate::maps::{DifferentiableMap, Map};
use crate::params::ParamVector;
use crate::policies::{LeafInput, LeafPolicy, MetricSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub name: String,
    pub parent: NodeId,
    pub child: NodeId,
    pub map: Map,
}

#[derive(Clone, Debug)]
pub struct Leaf {
    pub name: String,
    pub node: NodeId,
    pub policy: LeafPolicy,
}

/// Per-node scratch filled by the evaluation stages.
#[derive(Clone, Debug)]
pub struct NodeState {
    pub coord: DVector<f64>,
    /// Jacobian of the incoming edge; identity at the root.
    pub jac_to_parent: DMatrix<f64>,
    pub pulled_force: DVector<f64>,
    pub pulled_metric: DMatrix<f64>,
}

/// Everything produced by one full evaluation at `q`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub states: Vec<NodeState>,
    /// Mapped latent goals, one slot per leaf.
    pub latent_goals: Vec<Option<DVector<f64>>>,
    pub solver: RootSolver,
    pub policy: DVector<f64>,
}

impl Evaluation {
    pub fn root_force(&self) -> &DVector<f64> {
        &self.states[0].pulled_force
    }

    pub fn root_metric(&self) -> &DMatrix<f64> {
        &self.states[0].pulled_metric
    }
}

/// A rooted tree stored in topological order: node 0 is the configuration
/// space and every edge points from a lower to a higher index.
#[derive(Clone, Debug)]
pub struct TransformTree {
    dims: Vec<usize>,
    /// `edges[c - 1]` enters node `c`.
    edges: Vec<Edge>,
    leaves: Vec<Leaf>,
    children: Vec<Vec<usize>>,
    leaf_at: Vec<Option<usize>>,
    param_dependent: Vec<bool>,
    regularization: f64,
}

impl TransformTree {
    pub fn new(dims: Vec<usize>, mut edges: Vec<Edge>, leaves: Vec<Leaf>) -> Result<Self> {
        let n = dims.len();
        if n == 0 {
            return Err(Error::structure("tree", "no nodes"));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::structure(format!("node {i}"), "dimension must be positive"));
        }
        for e in &edges {
            if e.child.0 >= n || e.parent.0 >= n {
                return Err(Error::structure(&e.name, "references a node that does not exist"));
            }
            if e.parent >= e.child {
                return Err(Error::structure(&e.name, "parent index must be below child index"));
            }
        }
        edges.sort_by_key(|e| e.child);
        let mut incoming = vec![0usize; n];
        for e in &edges {
            incoming[e.child.0] += 1;
        }
        if let Some(c) = (1..n).find(|&c| incoming[c] != 1) {
            let msg = if incoming[c] == 0 { "not connected to the root" } else { "has more than one parent" };
            return Err(Error::structure(format!("node {c}"), msg));
        }
        for e in &edges {
            let (din, dout) = (dims[e.parent.0], dims[e.child.0]);
            if e.map.in_dim() != din || e.map.out_dim() != dout {
                return Err(Error::structure(
                    &e.name,
                    format!(
                        "map `{}` is {}->{} but connects node {} (dim {din}) to node {} (dim {dout})",
                        e.map.kind(),
                        e.map.in_dim(),
                        e.map.out_dim(),
                        e.parent.0,
                        e.child.0
                    ),
                ));
            }
        }

        let mut children = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            children[e.parent.0].push(i);
        }
        let mut leaf_at = vec![None; n];
        for (k, leaf) in leaves.iter().enumerate() {
            let u = leaf.node.0;
            if u >= n {
                return Err(Error::structure(&leaf.name, "attached to a node that does not exist"));
            }
            if !children[u].is_empty() {
                return Err(Error::structure(&leaf.name, format!("node {u} has children and cannot carry a policy")));
            }
            if leaf_at[u].replace(k).is_some() {
                return Err(Error::structure(&leaf.name, format!("node {u} already has a policy")));
            }
        }
        if let Some(u) = (0..n).find(|&u| children[u].is_empty() && leaf_at[u].is_none()) {
            return Err(Error::structure(format!("node {u}"), "leaf node has no policy"));
        }

        let mut param_dependent = vec![false; n];
        for (i, e) in edges.iter().enumerate() {
            param_dependent[i + 1] = param_dependent[e.parent.0] || e.map.is_learnable();
        }

        let tree = Self {
            dims,
            edges,
            leaves,
            children,
            leaf_at,
            param_dependent,
            regularization: 0.0,
        };
        for leaf in &tree.leaves {
            let u = leaf.node;
            let metric_dim = tree.dims[tree.metric_node(u, &leaf.policy).0];
            leaf.policy
                .check_dim(tree.dims[u.0], metric_dim)
                .map_err(|msg| Error::structure(&leaf.name, msg))?;
            if let Some(goal) = leaf.policy.latent_goal_source() {
                let Some(e) = tree.parent_edge(u) else {
                    return Err(Error::structure(&leaf.name, "latent goal needs an incoming edge"));
                };
                if goal.len() != e.map.in_dim() {
                    return Err(Error::structure(
                        &leaf.name,
                        format!("goal has dimension {} but the parent node has {}", goal.len(), e.map.in_dim()),
                    ));
                }
            }
        }
        Ok(tree)
    }

    /// Tikhonov term added to the root metric before solving; 0 disables it.
    pub fn with_regularization(mut self, reg: f64) -> Self {
        assert!(reg >= 0.0 && reg.is_finite());
        self.regularization = reg;
        self
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn root_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn node_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, u: NodeId) -> usize {
        self.dims[u.0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Edges sorted by child index.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn leaves_mut(&mut self) -> &mut [Leaf] {
        &mut self.leaves
    }

    pub fn parent_edge(&self, u: NodeId) -> Option<&Edge> {
        (u.0 > 0).then(|| &self.edges[u.0 - 1])
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.parent_edge(u).map(|e| e.parent)
    }

    pub fn children(&self, u: NodeId) -> impl Iterator<Item = &Edge> {
        self.children[u.0].iter().map(|&i| &self.edges[i])
    }

    pub fn leaf_at(&self, u: NodeId) -> Option<usize> {
        self.leaf_at[u.0]
    }

    /// True when some learnable edge lies between the root and `u`.
    pub fn is_param_dependent(&self, u: NodeId) -> bool {
        self.param_dependent[u.0]
    }

    /// Node whose coordinate feeds the leaf's metric.
    pub fn metric_node(&self, u: NodeId, policy: &LeafPolicy) -> NodeId {
        match (policy.metric_space, self.parent(u)) {
            (MetricSpace::Subtask, Some(p)) => p,
            _ => u,
        }
    }

    /// Node ids from the root down to `u`, inclusive.
    pub fn path_to(&self, u: NodeId) -> Vec<NodeId> {
        let mut path = vec![u];
        let mut cur = u;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn is_learnable(&self) -> bool {
        self.edges.iter().any(|e| e.map.is_learnable()) || self.leaves.iter().any(|l| l.policy.is_learnable())
    }

    /// Copy of the subtree below `root`, renumbered so `root` becomes node 0.
    /// Returns the new tree and, per new leaf, the index of the original leaf.
    pub fn subtree(&self, root: NodeId) -> Result<(TransformTree, Vec<usize>)> {
        let n = self.node_count();
        let mut keep = vec![false; n];
        keep[root.0] = true;
        for c in root.0 + 1..n {
            keep[c] = self.parent(NodeId(c)).is_some_and(|p| keep[p.0]);
        }
        let mut new_id = vec![usize::MAX; n];
        let mut dims = Vec::new();
        for u in (0..n).filter(|&u| keep[u]) {
            new_id[u] = dims.len();
            dims.push(self.dims[u]);
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e.child.0] && e.child != root)
            .map(|e| Edge {
                name: e.name.clone(),
                parent: NodeId(new_id[e.parent.0]),
                child: NodeId(new_id[e.child.0]),
                map: e.map.clone(),
            })
            .collect();
        let mut origin = Vec::new();
        let leaves = self
            .leaves
            .iter()
            .enumerate()
            .filter(|(_, l)| keep[l.node.0])
            .map(|(k, l)| {
                origin.push(k);
                Leaf {
                    name: l.name.clone(),
                    node: NodeId(new_id[l.node.0]),
                    policy: l.policy.clone(),
                }
            })
            .collect();
        let tree = TransformTree::new(dims, edges, leaves)?.with_regularization(self.regularization);
        Ok((tree, origin))
    }

    /// Stage 1: node coordinates and edge Jacobians in topological order.
    pub fn forward_pass(&self, q: &DVector<f64>, params: &ParamVector) -> Result<Vec<NodeState>> {
        if q.len() != self.root_dim() {
            return Err(Error::structure(
                "root",
                format!("configuration has dimension {} but the tree expects {}", q.len(), self.root_dim()),
            ));
        }
        let mut states = Vec::with_capacity(self.node_count());
        states.push(NodeState::fresh(q.clone(), DMatrix::identity(q.len(), q.len())));
        for e in &self.edges {
            let x = &states[e.parent.0].coord;
            let (y, jac) = e.map.value_and_jacobian(x, params).map_err(|err| at_edge(err, &e.name))?;
            let dim = self.dims[e.child.0];
            if y.len() != dim || jac.shape() != (dim, x.len()) {
                return Err(Error::structure(
                    &e.name,
                    format!("map produced dimension {} for a node of dimension {dim}", y.len()),
                ));
            }
            states.push(NodeState::fresh(y, jac));
        }
        Ok(states)
    }

    /// Goal of a latent potential mapped through the leaf's incoming edge.
    pub fn latent_goal(&self, k: usize, params: &ParamVector) -> Result<Option<DVector<f64>>> {
        let leaf = &self.leaves[k];
        let Some(goal) = leaf.policy.latent_goal_source() else {
            return Ok(None);
        };
        let edge = self.parent_edge(leaf.node).expect("validated at construction");
        edge.map.value(goal, params).map(Some).map_err(|err| at_edge(err, &edge.name))
    }

    pub fn leaf_input<'a>(&self, k: usize, states: &'a [NodeState], goal: Option<&'a DVector<f64>>) -> LeafInput<'a> {
        let leaf = &self.leaves[k];
        LeafInput {
            coord: &states[leaf.node.0].coord,
            metric_input: &states[self.metric_node(leaf.node, &leaf.policy).0].coord,
            latent_goal: goal,
        }
    }

    /// Stage 2: `(p_k, M_k)` at every leaf. Returns the mapped latent goals.
    pub fn leaf_evaluate(&self, states: &mut [NodeState], params: &ParamVector) -> Result<Vec<Option<DVector<f64>>>> {
        let mut goals = Vec::with_capacity(self.leaves.len());
        for (k, leaf) in self.leaves.iter().enumerate() {
            let goal = self.latent_goal(k, params)?;
            let (p, m) = leaf
                .policy
                .evaluate(self.leaf_input(k, states, goal.as_ref()), params)
                .map_err(|err| at_leaf(err, &leaf.name))?;
            if p.iter().chain(m.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    leaf: leaf.name.clone(),
                });
            }
            let st = &mut states[leaf.node.0];
            st.pulled_force = p;
            st.pulled_metric = m;
            goals.push(goal);
        }
        Ok(goals)
    }

    /// Stage 3: pull forces and metrics back to the root.
    pub fn backward_pass(&self, states: &mut [NodeState]) {
        for (i, e) in self.edges.iter().enumerate().rev() {
            let c = i + 1;
            if !self.children[c].is_empty() {
                symmetrize(&mut states[c].pulled_metric);
            }
            let (head, tail) = states.split_at_mut(c);
            let child = &tail[0];
            let parent = &mut head[e.parent.0];
            let jt = child.jac_to_parent.transpose();
            parent.pulled_force += &jt * &child.pulled_force;
            parent.pulled_metric += &jt * &child.pulled_metric * &child.jac_to_parent;
        }
        if !self.children[0].is_empty() {
            symmetrize(&mut states[0].pulled_metric);
        }
    }

    pub fn evaluate(&self, q: &DVector<f64>, params: &ParamVector) -> Result<Evaluation> {
        let mut states = self.forward_pass(q, params)?;
        let latent_goals = self.leaf_evaluate(&mut states, params)?;
        self.backward_pass(&mut states);
        let solver = RootSolver::new(&states[0].pulled_metric, self.regularization)?;
        let policy = solver.solve(&states[0].pulled_force);
        Ok(Evaluation {
            states,
            latent_goals,
            solver,
            policy,
        })
    }

    /// `pi(q) = M_r^-1 p_r`.
    pub fn evaluate_policy(&self, q: &DVector<f64>, params: &ParamVector) -> Result<DVector<f64>> {
        Ok(self.evaluate(q, params)?.policy)
    }

    /// Root potential `sum_k Phi_k(psi_k(q))`, or `None` when some leaf is
    /// not a gradient system.
    pub fn potential(&self, q: &DVector<f64>, params: &ParamVector) -> Result<Option<f64>> {
        let states = self.forward_pass(q, params)?;
        self.potential_at(&states, params)
    }

    pub fn potential_at(&self, states: &[NodeState], params: &ParamVector) -> Result<Option<f64>> {
        let mut total = 0.0;
        for (k, leaf) in self.leaves.iter().enumerate() {
            let goal = self.latent_goal(k, params)?;
            match leaf.policy.potential(self.leaf_input(k, states, goal.as_ref())) {
                Some(v) => total += v.map_err(|err| at_leaf(err, &leaf.name))?,
                None => return Ok(None),
            }
        }
        Ok(Some(total))
    }

    /// Jacobian of node `u`'s coordinate with respect to `q`.
    pub fn node_jacobian(&self, states: &[NodeState], u: NodeId) -> DMatrix<f64> {
        let mut jac = DMatrix::identity(self.root_dim(), self.root_dim());
        for v in self.path_to(u).into_iter().skip(1) {
            jac = &states[v.0].jac_to_parent * jac;
        }
        jac
    }
}

/// Stage 4: solve `(M_r + reg I) u = p_r`.
pub fn resolve(states: &[NodeState], regularization: f64) -> Result<DVector<f64>> {
    let root = &states[0];
    Ok(RootSolver::new(&root.pulled_metric, regularization)?.solve(&root.pulled_force))
}

impl NodeState {
    fn fresh(coord: DVector<f64>, jac_to_parent: DMatrix<f64>) -> Self {
        let n = coord.len();
        Self {
            coord,
            jac_to_parent,
            pulled_force: DVector::zeros(n),
            pulled_metric: DMatrix::zeros(n, n),
        }
    }
}

pub(crate) fn at_leaf(err: Error, name: &str) -> Error {
    match err {
        Error::Domain { leaf, msg } if leaf.is_empty() => Error::Domain {
            leaf: name.to_string(),
            msg,
        },
        other => other,
    }
}

pub(crate) fn at_edge(err: Error, name: &str) -> Error {
    match err {
        Error::Degenerate(msg) => Error::Degenerate(format!("{name}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{LinearMap, PlanarArmFk};
    use crate::policies::{Metric, Velocity};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn edge(parent: usize, child: usize, map: Map) -> Edge {
        Edge {
            name: format!("e{parent}{child}"),
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

    fn raw(vel: &[f64], m: Metric) -> LeafPolicy {
        LeafPolicy::raw(Velocity::Constant(v(vel)), m)
    }

    #[test]
    fn forward_identity_child() {
        let t = TransformTree::new(
            vec![2, 2],
            vec![edge(0, 1, Map::Identity(2))],
            vec![leaf(1, LeafPolicy::damper(1.0, 2))],
        )
        .unwrap();
        let s = t.forward_pass(&v(&[0.3, -0.1]), &ParamVector::new()).unwrap();
        assert_eq!(s[1].coord, v(&[0.3, -0.1]));
        assert_eq!(s[1].jac_to_parent, DMatrix::identity(2, 2));
    }

    #[test]
    fn forward_two_link_arm() {
        let t = TransformTree::new(
            vec![2, 2],
            vec![edge(0, 1, Map::PlanarArm(PlanarArmFk::new(vec![1.0, 1.0], None)))],
            vec![leaf(1, LeafPolicy::damper(1.0, 2))],
        )
        .unwrap();
        let s = t.forward_pass(&v(&[0.0, 0.0]), &ParamVector::new()).unwrap();
        assert!((s[1].coord[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn backward_scaled_jacobian() {
        let lin = Map::Linear(LinearMap {
            matrix: DMatrix::from_diagonal_element(2, 2, 2.0),
            offset: DVector::zeros(2),
        });
        let t = TransformTree::new(
            vec![2, 2],
            vec![edge(0, 1, lin)],
            vec![leaf(1, raw(&[1.0, 0.0], Metric::identity(2)))],
        )
        .unwrap();
        let p = ParamVector::new();
        let mut s = t.forward_pass(&v(&[0.0, 0.0]), &p).unwrap();
        t.leaf_evaluate(&mut s, &p).unwrap();
        t.backward_pass(&mut s);
        assert_eq!(s[0].pulled_force, v(&[2.0, 0.0]));
        assert_eq!(s[0].pulled_metric, DMatrix::from_diagonal_element(2, 2, 4.0));
    }

    #[test]
    fn two_equal_leaves_give_the_mean() {
        let t = TransformTree::new(
            vec![2, 2, 2],
            vec![edge(0, 1, Map::Identity(2)), edge(0, 2, Map::Identity(2))],
            vec![
                leaf(1, raw(&[1.0, 0.0], Metric::identity(2))),
                leaf(2, raw(&[0.0, 1.0], Metric::identity(2))),
            ],
        )
        .unwrap();
        let pi = t.evaluate_policy(&v(&[0.0, 0.0]), &ParamVector::new()).unwrap();
        assert!((pi - v(&[0.5, 0.5])).amax() < 1e-12);
    }

    #[test]
    fn damper_and_attractor_weighted_mean() {
        let t = TransformTree::new(
            vec![2, 2, 2],
            vec![edge(0, 1, Map::Identity(2)), edge(0, 2, Map::Identity(2))],
            vec![
                leaf(1, LeafPolicy::damper(1.0, 2)),
                leaf(2, raw(&[2.0, 0.0], Metric::identity(2))),
            ],
        )
        .unwrap();
        let pi = t.evaluate_policy(&v(&[0.4, 0.4]), &ParamVector::new()).unwrap();
        assert!((pi - v(&[1.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_root_is_singular() {
        let lin = Map::Linear(LinearMap {
            matrix: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            offset: DVector::zeros(1),
        });
        let t = TransformTree::new(
            vec![2, 1],
            vec![edge(0, 1, lin)],
            vec![leaf(1, raw(&[6.0], Metric::scaled_identity(1, 3.0)))],
        )
        .unwrap();
        let q = v(&[0.0, 0.0]);
        let p = ParamVector::new();
        assert!(matches!(t.evaluate_policy(&q, &p), Err(Error::SingularMetric { .. })));
        assert!(matches!(flat_solve(&t, &q, &p), Err(Error::SingularMetric { .. })));
        let reg = t.clone().with_regularization(1e-9);
        let pi = reg.evaluate_policy(&q, &p).unwrap();
        assert!((pi[0] - 3.0).abs() < 1e-6 && (pi[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn mismatched_edge_dims_name_the_edge() {
        let err = TransformTree::new(
            vec![3, 2],
            vec![edge(0, 1, Map::PlanarArm(PlanarArmFk::new(vec![1.0, 1.0], None)))],
            vec![leaf(1, LeafPolicy::damper(1.0, 2))],
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Structure { item, .. } if item == "e01"), "{err}");
    }

    #[test]
    fn childless_node_without_policy_is_rejected() {
        let err = TransformTree::new(vec![2, 2], vec![edge(0, 1, Map::Identity(2))], vec![]).unwrap_err();
        assert!(matches!(err, Error::Structure { .. }));
    }

    #[test]
    fn root_can_be_a_leaf() {
        let t = TransformTree::new(vec![2], vec![], vec![leaf(0, raw(&[1.0, 2.0], Metric::identity(2)))]).unwrap();
        assert_eq!(t.evaluate_policy(&v(&[5.0, 5.0]), &ParamVector::new()).unwrap(), v(&[1.0, 2.0]));
    }

    #[test]
    fn subtree_renumbers_nodes() {
        let t = TransformTree::new(
            vec![3, 2, 2, 2],
            vec![
                edge(0, 1, Map::PlanarArm(PlanarArmFk::new(vec![1.0, 1.0, 1.0], None))),
                edge(1, 2, Map::Identity(2)),
                edge(0, 3, Map::PlanarArm(PlanarArmFk::new(vec![1.0, 1.0, 1.0], Some(0)))),
            ],
            vec![
                leaf(2, LeafPolicy::damper(1.0, 2)),
                leaf(3, LeafPolicy::damper(1.0, 2)),
            ],
        )
        .unwrap();
        let (sub, origin) = t.subtree(NodeId(1)).unwrap();
        assert_eq!(sub.dims(), &[2, 2]);
        assert_eq!(origin, vec![0]);
    }
}
