//! JSON tree specifications.
//!
//! ```json
//! {
//!   "nodes": [{"id": 0, "dim": 3}, {"id": 1, "dim": 2}],
//!   "edges": [{"parent": 0, "child": 1,
//!              "map": {"kind": "planar_arm_fk", "lengths": [1, 1, 1], "point": "ee"}}],
//!   "leaves": [{"node": 1, "policy": {"kind": "attractor", "goal": [1, 1]}}]
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{CouplingLayer, DiffeoChain, DistanceToPoint, LinearMap, Map, PlanarArmFk, RffFunction, MAP_KINDS};
use crate::params::{ParamVector, Weights};
use crate::policies::{CholeskyMetricNet, LeafPolicy, Metric, MetricSpace, Potential, Velocity};
use crate::tree::{Edge, Leaf, NodeId, TransformTree};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    pub leaves: Vec<LeafSpec>,
    /// Tikhonov term for the root solve; 0 means singular metrics are errors.
    #[serde(default)]
    pub regularization: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub parent: usize,
    pub child: usize,
    pub map: MapSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub node: usize,
    pub policy: PolicySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkPoint {
    Index(usize),
    Named(String),
}

/// A length scale given explicitly or `"auto"` (estimated from demonstrations).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthScale {
    Value(f64),
    Auto(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    PlanarArmFk {
        lengths: Vec<f64>,
        #[serde(default = "ee")]
        point: LinkPoint,
    },
    DistanceToPoint {
        center: Vec<f64>,
        #[serde(default)]
        radius: f64,
    },
    DiffeoChain {
        #[serde(default = "default_layers")]
        layers: usize,
        #[serde(rename = "features_D", default = "default_features")]
        features: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length_scale: Option<LengthScale>,
        #[serde(default)]
        seed: u64,
        #[serde(default = "yes")]
        learnable: bool,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Quadratic {
        goal: Vec<f64>,
        #[serde(default = "one")]
        gain: f64,
    },
    LatentQuadratic {
        goal: Vec<f64>,
    },
    Barrier {
        margin: f64,
        #[serde(default = "one")]
        gain: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Identity,
    ScaledIdentity {
        weight: f64,
    },
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    CholeskyNet {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "one")]
        diag_init: f64,
    },
    BarrierWeight {
        margin: f64,
        #[serde(default = "one")]
        gain: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySpec {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `v = theta`, initialized from `init` or zeros.
    Param {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    NaturalGradient {
        potential: PotentialSpec,
        metric: MetricSpec,
        #[serde(default)]
        learnable: bool,
        #[serde(default)]
        metric_space: MetricSpace,
    },
    RawVm {
        velocity: VelocitySpec,
        metric: MetricSpec,
        #[serde(default)]
        learnable: bool,
        #[serde(default)]
        metric_space: MetricSpace,
    },
    Damper {
        gain: f64,
    },
    Barrier {
        margin: f64,
        #[serde(default = "one")]
        gain: f64,
        #[serde(default = "one")]
        weight_gain: f64,
    },
    Attractor {
        goal: Vec<f64>,
        #[serde(default = "one")]
        gain: f64,
        #[serde(default = "one")]
        weight: f64,
    },
}

fn ee() -> LinkPoint {
    LinkPoint::Named("ee".into())
}
fn default_layers() -> usize {
    4
}
fn default_features() -> usize {
    128
}
fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_epsilon() -> f64 {
    1e-4
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl PolicySpec {
    /// Handcrafted policies are fixed behaviors that carry no imitation weight.
    pub fn is_handcrafted(&self) -> bool {
        matches!(
            self,
            PolicySpec::Damper { .. } | PolicySpec::Barrier { .. } | PolicySpec::Attractor { .. }
        )
    }
}

impl EdgeSpec {
    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("edge {}->{}", self.parent, self.child))
    }
}

impl LeafSpec {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("leaf@{}", self.node))
    }
}

impl TreeSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(edges) = value.get("edges").and_then(|e| e.as_array()) {
            for edge in edges {
                if let Some(kind) = edge.get("map").and_then(|m| m.get("kind")).and_then(|k| k.as_str()) {
                    if !MAP_KINDS.contains(&kind) {
                        return Err(Error::UnknownMapKind {
                            kind: kind.to_string(),
                            registered: MAP_KINDS.to_vec(),
                        });
                    }
                }
            }
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Names of diffeomorphism edges whose length scale is left to the data.
    pub fn auto_length_scale_edges(&self) -> Vec<String> {
        self.edges
            .iter()
            .filter(|e| match &e.map {
                MapSpec::DiffeoChain { length_scale, .. } => !matches!(length_scale, Some(LengthScale::Value(_))),
                _ => false,
            })
            .map(EdgeSpec::display_name)
            .collect()
    }

    /// Default imitation weights: 1 for user-defined leaves, 0 for handcrafted ones.
    pub fn default_lambda(&self) -> Vec<f64> {
        self.leaves
            .iter()
            .map(|l| if l.policy.is_handcrafted() { 0.0 } else { 1.0 })
            .collect()
    }

    /// Builds the tree and its initial parameters. `length_scales` supplies
    /// values for edges whose spec leaves the length scale unset; missing
    /// entries fall back to 1.
    pub fn build(&self, length_scales: &BTreeMap<String, f64>) -> Result<(TransformTree, ParamVector)> {
        let mut dims = vec![0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::structure(
                    format!("node {}", node.id),
                    format!("node ids must be contiguous from 0; found {} at position {i}", node.id),
                ));
            }
            dims[i] = node.dim;
        }
        let dim_of = |id: usize, item: &str| {
            dims.get(id)
                .copied()
                .ok_or_else(|| Error::structure(item, format!("node {id} does not exist")))
        };

        let mut params = ParamVector::new();
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let name = e.display_name();
            let din = dim_of(e.parent, &name)?;
            let map = build_map(&e.map, &name, din, length_scales, &mut params)?;
            edges.push(Edge {
                name,
                parent: NodeId(e.parent),
                child: NodeId(e.child),
                map,
            });
        }

        let parent_of: BTreeMap<usize, usize> = self.edges.iter().map(|e| (e.child, e.parent)).collect();
        let mut leaves = Vec::with_capacity(self.leaves.len());
        for l in &self.leaves {
            let name = l.display_name();
            let n = dim_of(l.node, &name)?;
            let metric_in = match l.policy {
                PolicySpec::NaturalGradient {
                    metric_space: MetricSpace::Subtask,
                    ..
                }
                | PolicySpec::RawVm {
                    metric_space: MetricSpace::Subtask,
                    ..
                } => match parent_of.get(&l.node) {
                    Some(&p) => dim_of(p, &name)?,
                    None => n,
                },
                _ => n,
            };
            let policy = build_policy(&l.policy, &name, n, metric_in, &mut params)?;
            leaves.push(Leaf {
                name,
                node: NodeId(l.node),
                policy,
            });
        }

        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::Config("regularization must be a finite nonnegative number".into()));
        }
        let tree = TransformTree::new(dims, edges, leaves)?.with_regularization(self.regularization);
        params.length_scales = length_scales
            .iter()
            .filter(|(k, _)| self.auto_length_scale_edges().contains(k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        Ok((tree, params))
    }
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn matrix(rows: &[Vec<f64>], item: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::structure(item, "matrix rows must be nonempty and of equal length"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn check_finite(values: &[f64], item: &str, what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("{item}: {what} must be finite")))
    }
}

fn build_map(
    spec: &MapSpec,
    name: &str,
    din: usize,
    length_scales: &BTreeMap<String, f64>,
    params: &mut ParamVector,
) -> Result<Map> {
    Ok(match spec {
        MapSpec::Identity => Map::Identity(din),
        MapSpec::PlanarArmFk { lengths, point } => {
            if lengths.is_empty() || lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                return Err(Error::Config(format!("{name}: link lengths must be positive")));
            }
            let link = match point {
                LinkPoint::Named(s) if s == "ee" => None,
                LinkPoint::Index(i) if *i < lengths.len() => Some(*i),
                other => {
                    return Err(Error::Config(format!(
                        "{name}: point must be \"ee\" or a link index below {}, got {other:?}",
                        lengths.len()
                    )))
                }
            };
            Map::PlanarArm(PlanarArmFk::new(lengths.clone(), link))
        }
        MapSpec::DistanceToPoint { center, radius } => {
            check_finite(center, name, "center")?;
            if !(*radius >= 0.0 && radius.is_finite()) {
                return Err(Error::Config(format!("{name}: radius must be nonnegative")));
            }
            Map::Distance(DistanceToPoint::new(vector(center), *radius))
        }
        MapSpec::DiffeoChain {
            layers,
            features,
            length_scale,
            seed,
            learnable,
        } => {
            if din < 2 {
                return Err(Error::Config(format!(
                    "{name}: a diffeomorphism chain needs dimension at least 2 (got {din})"
                )));
            }
            if *layers == 0 || *features == 0 {
                return Err(Error::Config(format!("{name}: layers and features_D must be positive")));
            }
            let l = match length_scale {
                Some(LengthScale::Value(v)) => *v,
                Some(LengthScale::Auto(s)) if s == "auto" => length_scales.get(name).copied().unwrap_or(1.0),
                None => length_scales.get(name).copied().unwrap_or(1.0),
                Some(LengthScale::Auto(s)) => {
                    return Err(Error::Config(format!("{name}: length_scale must be a number or \"auto\", got {s:?}")))
                }
            };
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("{name}: length scale must be positive, got {l}")));
            }
            let (na, nb) = CouplingLayer::block_sizes(din);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut net = |label: String, rng: &mut ChaCha8Rng| {
                let w = Weights::allocate(params, label, vec![0.0; features * nb], *learnable);
                RffFunction::sample(na, nb, *features, l, rng.random(), w)
            };
            let chain = (0..*layers)
                .map(|m| {
                    let s = net(format!("{name}/layer{m}/s"), &mut rng);
                    let t = net(format!("{name}/layer{m}/t"), &mut rng);
                    CouplingLayer::new(din, m % 2 == 1, s, t)
                })
                .collect();
            Map::Diffeo(DiffeoChain::new(din, chain))
        }
        MapSpec::Linear { matrix: rows, offset } => {
            let m = matrix(rows, name)?;
            check_finite(m.as_slice(), name, "matrix")?;
            let offset = match offset {
                Some(o) if o.len() == m.nrows() => vector(o),
                Some(o) => {
                    return Err(Error::structure(
                        name,
                        format!("offset has length {} but the matrix has {} rows", o.len(), m.nrows()),
                    ))
                }
                None => DVector::zeros(m.nrows()),
            };
            Map::Linear(LinearMap { matrix: m, offset })
        }
    })
}

fn build_metric(spec: &MetricSpec, name: &str, n: usize, metric_in: usize, learnable: bool, params: &mut ParamVector) -> Result<Metric> {
    Ok(match spec {
        MetricSpec::Identity => Metric::identity(n),
        MetricSpec::ScaledIdentity { weight } => {
            if !(*weight > 0.0 && weight.is_finite()) {
                return Err(Error::Config(format!("{name}: metric weight must be positive")));
            }
            Metric::scaled_identity(n, *weight)
        }
        MetricSpec::Constant { matrix: rows } => {
            let m = matrix(rows, name)?;
            if m.nrows() != m.ncols() || (&m - m.transpose()).amax() > 1e-12 || m.clone().cholesky().is_none() {
                return Err(Error::Config(format!("{name}: constant metric must be symmetric positive definite")));
            }
            Metric::Constant(m)
        }
        MetricSpec::CholeskyNet {
            hidden,
            epsilon,
            seed,
            diag_init,
        } => {
            if !(*epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Config(format!("{name}: cholesky epsilon must be positive")));
            }
            let init = CholeskyMetricNet::init_values(metric_in, n, hidden, *diag_init, *seed);
            let w = Weights::allocate(params, format!("{name}/metric"), init, learnable);
            Metric::Cholesky(CholeskyMetricNet::new(metric_in, n, hidden.clone(), *epsilon, w))
        }
        MetricSpec::BarrierWeight { margin, gain } => {
            if !(*margin > 0.0 && *gain >= 0.0) {
                return Err(Error::Config(format!("{name}: barrier weight needs margin > 0 and gain >= 0")));
            }
            Metric::BarrierWeight {
                margin: *margin,
                gain: *gain,
            }
        }
    })
}

fn build_policy(spec: &PolicySpec, name: &str, n: usize, metric_in: usize, params: &mut ParamVector) -> Result<LeafPolicy> {
    Ok(match spec {
        PolicySpec::NaturalGradient {
            potential,
            metric,
            learnable,
            metric_space,
        } => {
            let potential = match potential {
                PotentialSpec::Zero => Potential::Zero,
                PotentialSpec::Quadratic { goal, gain } => {
                    check_finite(goal, name, "goal")?;
                    Potential::Quadratic { goal: vector(goal), gain: *gain }
                }
                PotentialSpec::LatentQuadratic { goal } => {
                    check_finite(goal, name, "goal")?;
                    Potential::LatentQuadratic { goal: vector(goal) }
                }
                PotentialSpec::Barrier { margin, gain } => {
                    if margin.is_nan() || *margin <= 0.0 {
                        return Err(Error::Config(format!("{name}: barrier margin must be positive")));
                    }
                    Potential::Barrier {
                        margin: *margin,
                        gain: *gain,
                    }
                }
            };
            let metric = build_metric(metric, name, n, metric_in, *learnable, params)?;
            LeafPolicy::natural_gradient(potential, metric).with_metric_space(*metric_space)
        }
        PolicySpec::RawVm {
            velocity,
            metric,
            learnable,
            metric_space,
        } => {
            let velocity = match velocity {
                VelocitySpec::Zero => Velocity::Zero,
                VelocitySpec::Constant { value } => {
                    check_finite(value, name, "velocity")?;
                    Velocity::Constant(vector(value))
                }
                VelocitySpec::Param { init } => {
                    let init = init.clone().unwrap_or_else(|| vec![0.0; n]);
                    check_finite(&init, name, "velocity")?;
                    Velocity::Param(Weights::allocate(params, format!("{name}/velocity"), init, *learnable))
                }
            };
            let metric = build_metric(metric, name, n, metric_in, *learnable, params)?;
            LeafPolicy::raw(velocity, metric).with_metric_space(*metric_space)
        }
        PolicySpec::Damper { gain } => {
            if !(*gain > 0.0 && gain.is_finite()) {
                return Err(Error::Config(format!("{name}: damper gain must be positive")));
            }
            LeafPolicy::damper(*gain, n)
        }
        PolicySpec::Barrier {
            margin,
            gain,
            weight_gain,
        } => {
            if !(*margin > 0.0 && *gain >= 0.0 && *weight_gain >= 0.0) {
                return Err(Error::Config(format!("{name}: barrier needs margin > 0 and nonnegative gains")));
            }
            LeafPolicy::barrier(*margin, *gain, *weight_gain)
        }
        PolicySpec::Attractor { goal, gain, weight } => {
            check_finite(goal, name, "goal")?;
            if !(*gain > 0.0 && *weight > 0.0) {
                return Err(Error::Config(format!("{name}: attractor gain and weight must be positive")));
            }
            LeafPolicy::attractor(vector(goal), *gain, *weight)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARM: &str = r#"{
        "nodes": [{"id": 0, "dim": 2}, {"id": 1, "dim": 2}],
        "edges": [{"parent": 0, "child": 1, "map": {"kind": "planar_arm_fk", "lengths": [1.0, 1.0], "point": "ee"}}],
        "leaves": [{"node": 1, "policy": {"kind": "attractor", "goal": [1.0, 1.0]}}]
    }"#;

    #[test]
    fn loads_two_link_arm() {
        let spec = TreeSpec::from_json(ARM).unwrap();
        let (tree, params) = spec.build(&BTreeMap::new()).unwrap();
        assert_eq!(tree.node_count(), 2);
        assert!(params.is_empty());
    }

    #[test]
    fn unknown_kind_lists_registry() {
        let text = ARM.replace("planar_arm_fk", "spline");
        let err = TreeSpec::from_json(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::UnknownMapKind { .. }));
        assert!(msg.contains("diffeo_chain") && msg.contains("spline"), "{msg}");
    }

    #[test]
    fn diffeo_on_one_dimension_is_rejected() {
        let text = r#"{
            "nodes": [{"id": 0, "dim": 1}, {"id": 1, "dim": 1}],
            "edges": [{"parent": 0, "child": 1, "map": {"kind": "diffeo_chain"}}],
            "leaves": [{"node": 1, "policy": {"kind": "damper", "gain": 1.0}}]
        }"#;
        let err = TreeSpec::from_json(text).unwrap().build(&BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn learnable_components_register_parameters() {
        let text = r#"{
            "nodes": [{"id": 0, "dim": 2}, {"id": 1, "dim": 2}],
            "edges": [{"name": "phi", "parent": 0, "child": 1,
                       "map": {"kind": "diffeo_chain", "layers": 2, "features_D": 8, "length_scale": "auto"}}],
            "leaves": [{"name": "goal", "node": 1, "policy": {"kind": "natural_gradient",
                "potential": {"kind": "latent_quadratic", "goal": [0.5, 0.5]},
                "metric": {"kind": "cholesky_net", "hidden": [4]}, "learnable": true}}]
        }"#;
        let spec = TreeSpec::from_json(text).unwrap();
        assert_eq!(spec.auto_length_scale_edges(), vec!["phi".to_string()]);
        let scales = BTreeMap::from([("phi".to_string(), 0.7)]);
        let (tree, params) = spec.build(&scales).unwrap();
        assert!(tree.is_learnable());
        assert_eq!(params.registry.len(), 5);
        assert_eq!(params.length_scales["phi"], 0.7);
        assert!(params.validate().is_ok());
    }
}
