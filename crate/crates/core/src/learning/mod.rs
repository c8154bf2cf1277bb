//! Imitation losses, gradient-descent training and the independently
//! trained baseline.

mod demos;
mod loss;
mod train;

pub use demos::{DemoSet, Trajectory};
pub use loss::{measurement_node, LossKind, LossSpec, Objective};
pub use train::{train, train_independent_baseline, train_objective, TrainOptions, TrainReport};

use std::collections::BTreeMap;

use crate::error::Result;
use crate::params::ParamVector;
use crate::spec::TreeSpec;
use crate::tree::TransformTree;

/// Fraction of the demonstration diameter used as the RFF length scale.
pub const LENGTH_SCALE_FRACTION: f64 = 0.45;

/// `sum lambda_k |J_k (qdot - pi(q))|^2` over all samples.
pub fn subtask_loss(tree: &TransformTree, params: &ParamVector, demos: &DemoSet, lambda: &[f64]) -> Result<f64> {
    Objective::new(tree, params, demos, &LossSpec::subtask(lambda.to_vec()))?.value(params)
}

/// `sum |qdot - pi(q)|^2` over all samples.
pub fn joint_loss(tree: &TransformTree, params: &ParamVector, demos: &DemoSet) -> Result<f64> {
    Objective::new(tree, params, demos, &LossSpec::joint())?.value(params)
}

/// `grad_theta L` for the given loss.
pub fn loss_gradient(tree: &TransformTree, params: &ParamVector, demos: &DemoSet, loss: &LossSpec) -> Result<Vec<f64>> {
    Ok(Objective::new(tree, params, demos, loss)?.value_and_gradient(params, None)?.1)
}

/// Length scales for diffeomorphism edges left unset in the spec:
/// `LENGTH_SCALE_FRACTION` times the diameter of the demonstrations mapped
/// to the edge's parent node, or 1 when the data has no spread.
pub fn estimate_length_scales(spec: &TreeSpec, demos: &DemoSet) -> Result<BTreeMap<String, f64>> {
    let names = spec.auto_length_scale_edges();
    if names.is_empty() {
        return Ok(BTreeMap::new());
    }
    let (tree, params) = spec.build(&BTreeMap::new())?;
    let points: Vec<_> = demos.samples().into_iter().map(|(q, _)| q).collect();
    let mut out = BTreeMap::new();
    for edge in tree.edges().iter().filter(|e| names.contains(&e.name)) {
        let coords = points
            .iter()
            .map(|q| tree.compose_to(edge.parent, q, &params).map(|(z, _)| z))
            .collect::<Result<Vec<_>>>()?;
        let mut diameter: f64 = 0.0;
        for (i, a) in coords.iter().enumerate() {
            for b in &coords[i + 1..] {
                diameter = diameter.max((a - b).norm());
            }
        }
        let l = if diameter > 1e-12 { LENGTH_SCALE_FRACTION * diameter } else { 1.0 };
        out.insert(edge.name.clone(), l);
    }
    Ok(out)
}

/// Builds a tree, resolving automatic length scales from `demos`.
pub fn build_with_demos(spec: &TreeSpec, demos: &DemoSet) -> Result<(TransformTree, ParamVector)> {
    spec.build(&estimate_length_scales(spec, demos)?)
}

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(idx: &[usize], f: F) -> Vec<T> {
    use rayon::prelude::*;
    idx.par_iter().map(|&i| f(i)).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(idx: &[usize], f: F) -> Vec<T> {
    idx.iter().map(|&i| f(i)).collect()
}
