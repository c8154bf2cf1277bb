use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::demos::DemoSet;
use super::map_indexed;
use crate::error::{Error, Result};
use crate::gradients::policy_vjp_at;
use crate::maps::Map;
use crate::params::ParamVector;
use crate::policies::LeafKind;
use crate::tree::{NodeId, TransformTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[serde(alias = "subtask")]
    SubtaskSpace,
    #[serde(alias = "joint")]
    JointSpace,
    #[serde(alias = "independent")]
    IndependentBaseline,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::SubtaskSpace => "subtask_space",
            LossKind::JointSpace => "joint_space",
            LossKind::IndependentBaseline => "independent_baseline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Per-leaf weights in leaf order; subtask loss only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

impl LossSpec {
    pub fn joint() -> Self {
        Self {
            kind: LossKind::JointSpace,
            lambda: None,
        }
    }

    pub fn subtask(lambda: Vec<f64>) -> Self {
        Self {
            kind: LossKind::SubtaskSpace,
            lambda: Some(lambda),
        }
    }

    pub fn baseline() -> Self {
        Self {
            kind: LossKind::IndependentBaseline,
            lambda: None,
        }
    }

    /// Checks that the loss is trainable on `tree`: a subtask loss needs at
    /// least one positive weight.
    pub fn validate(&self, tree: &TransformTree) -> Result<()> {
        if self.kind == LossKind::SubtaskSpace && resolve_lambda(tree, self.lambda.as_deref())?.iter().all(|&l| l == 0.0) {
            return Err(Error::Config("subtask loss needs at least one positive lambda".into()));
        }
        Ok(())
    }
}

/// Node at which a leaf's imitation error is measured: the subtask node
/// above a latent leaf, otherwise the leaf itself.
pub fn measurement_node(tree: &TransformTree, k: usize) -> NodeId {
    let node = tree.leaves()[k].node;
    match tree.parent_edge(node) {
        Some(e) if matches!(e.map, Map::Diffeo(_)) => e.parent,
        _ => node,
    }
}

/// `sum_i r_i^T W_i r_i` with `r_i = qdot_i - pi(q_i)` over a fixed tree.
struct Quadratic<'a> {
    tree: &'a TransformTree,
    points: Vec<DVector<f64>>,
    targets: Vec<DVector<f64>>,
    /// `None` means the identity.
    weights: Option<Vec<DMatrix<f64>>>,
}

fn residual_term(
    tree: &TransformTree,
    q: &DVector<f64>,
    target: &DVector<f64>,
    weight: Option<&DMatrix<f64>>,
    params: &ParamVector,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let eval = tree.evaluate(q, params)?;
    let r = target - &eval.policy;
    let wr = match weight {
        Some(w) => w * &r,
        None => r.clone(),
    };
    if let Some(grad) = grad {
        policy_vjp_at(tree, &eval, params, &(&wr * -2.0), grad)?;
    }
    Ok(r.dot(&wr))
}

/// Baseline piece: joint loss on the subtree below a measurement node,
/// against demonstrations mapped into that node's coordinates.
struct Part {
    tree: TransformTree,
    points: Vec<DVector<f64>>,
    targets: Vec<DVector<f64>>,
}

enum Terms<'a> {
    Single(Quadratic<'a>),
    Parts(Vec<Part>),
}

/// A training objective bound to a tree and a demonstration set.
pub struct Objective<'a> {
    terms: Terms<'a>,
    samples: usize,
}

impl<'a> Objective<'a> {
    pub fn new(tree: &'a TransformTree, params: &ParamVector, demos: &DemoSet, spec: &LossSpec) -> Result<Self> {
        if let Some(d) = demos.dim() {
            if d != tree.root_dim() {
                return Err(Error::Demo(format!(
                    "demonstrations have dimension {d} but the tree root has {}",
                    tree.root_dim()
                )));
            }
        }
        let samples = demos.samples();
        let (points, targets): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
        let n = points.len();
        let terms = match spec.kind {
            LossKind::JointSpace => Terms::Single(Quadratic {
                tree,
                points,
                targets,
                weights: None,
            }),
            LossKind::SubtaskSpace => {
                let lambda = resolve_lambda(tree, spec.lambda.as_deref())?;
                let mut weighted = Vec::new();
                for (k, &l) in lambda.iter().enumerate() {
                    if l == 0.0 {
                        continue;
                    }
                    let m = measurement_node(tree, k);
                    if tree.is_param_dependent(m) {
                        return Err(Error::Config(format!(
                            "leaf {} is measured at node {} whose map depends on learnable parameters",
                            tree.leaves()[k].name, m.0
                        )));
                    }
                    weighted.push((m, l));
                }
                let weights = points
                    .iter()
                    .map(|q| {
                        let mut w = DMatrix::zeros(q.len(), q.len());
                        for &(m, l) in &weighted {
                            let (_, jac) = tree.compose_to(m, q, params)?;
                            w += jac.tr_mul(&jac) * l;
                        }
                        Ok(w)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Terms::Single(Quadratic {
                    tree,
                    points,
                    targets,
                    weights: Some(weights),
                })
            }
            LossKind::IndependentBaseline => Terms::Parts(baseline_parts(tree, params, &points, &targets)?),
        };
        Ok(Self { terms, samples: n })
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    fn per_sample(&self, i: usize, params: &ParamVector, mut grad: Option<&mut [f64]>) -> Result<f64> {
        match &self.terms {
            Terms::Single(q) => {
                let w = q.weights.as_ref().map(|w| &w[i]);
                residual_term(q.tree, &q.points[i], &q.targets[i], w, params, grad)
            }
            Terms::Parts(parts) => {
                let mut total = 0.0;
                for part in parts {
                    total += residual_term(&part.tree, &part.points[i], &part.targets[i], None, params, grad.as_deref_mut())?;
                }
                Ok(total)
            }
        }
    }

    pub fn value(&self, params: &ParamVector) -> Result<f64> {
        let idx: Vec<usize> = (0..self.samples).collect();
        let parts = map_indexed(&idx, |i| self.per_sample(i, params, None));
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(total)
    }

    /// Loss and gradient over `batch` (all samples when `None`). Per-sample
    /// terms may run in parallel; they are summed in sample order.
    pub fn value_and_gradient(&self, params: &ParamVector, batch: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
        let all: Vec<usize>;
        let idx = match batch {
            Some(b) => b,
            None => {
                all = (0..self.samples).collect();
                &all
            }
        };
        let parts = map_indexed(idx, |i| {
            let mut g = vec![0.0; params.len()];
            self.per_sample(i, params, Some(&mut g)).map(|l| (l, g))
        });
        let mut total = 0.0;
        let mut grad = vec![0.0; params.len()];
        for p in parts {
            let (l, g) = p?;
            total += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((total, grad))
    }
}

fn resolve_lambda(tree: &TransformTree, lambda: Option<&[f64]>) -> Result<Vec<f64>> {
    let k = tree.leaves().len();
    let lambda = match lambda {
        Some(l) => l.to_vec(),
        None => tree
            .leaves()
            .iter()
            .map(|l| if l.policy.is_learnable() { 1.0 } else { 0.0 })
            .collect(),
    };
    if lambda.len() != k {
        return Err(Error::Config(format!("lambda has {} entries but the tree has {k} leaves", lambda.len())));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Config("lambda entries must be finite and nonnegative".into()));
    }
    Ok(lambda)
}

fn baseline_parts(
    tree: &TransformTree,
    params: &ParamVector,
    points: &[DVector<f64>],
    targets: &[DVector<f64>],
) -> Result<Vec<Part>> {
    let mut roots: Vec<NodeId> = Vec::new();
    for (k, leaf) in tree.leaves().iter().enumerate() {
        let learnable = leaf.policy.is_learnable() || tree.is_param_dependent(leaf.node);
        if !learnable {
            continue;
        }
        if !matches!(leaf.policy.kind, LeafKind::NaturalGradient(_)) {
            return Err(Error::Config(format!(
                "independent baseline needs natural-gradient learnable leaves; {} is not",
                leaf.name
            )));
        }
        // A metric that reads the parent coordinate needs the parent in the subtree.
        let m = measurement_node(tree, k).min(tree.metric_node(leaf.node, &leaf.policy));
        if tree.is_param_dependent(m) {
            return Err(Error::Config(format!(
                "leaf {} is measured at node {} whose map depends on learnable parameters",
                leaf.name, m.0
            )));
        }
        if !roots.contains(&m) {
            roots.push(m);
        }
    }
    roots
        .into_iter()
        .map(|m| {
            let (sub, _) = tree.subtree(m)?;
            let mut pts = Vec::with_capacity(points.len());
            let mut tgt = Vec::with_capacity(points.len());
            for (q, qd) in points.iter().zip(targets) {
                let (z, jac) = tree.compose_to(m, q, params)?;
                pts.push(z);
                tgt.push(jac * qd);
            }
            Ok(Part {
                tree: sub,
                points: pts,
                targets: tgt,
            })
        })
        .collect()
}
