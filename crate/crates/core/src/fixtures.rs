//! Seeded trees and demonstration sets used by tests, the CLI and examples.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::learning::{DemoSet, Trajectory};
use crate::maps::{CouplingLayer, DiffeoChain, DistanceToPoint, LinearMap, Map, PlanarArmFk, RffFunction};
use crate::params::{ParamVector, Weights};
use crate::policies::{CholeskyMetricNet, LeafPolicy, Metric, MetricSpace, Potential, Velocity};
use crate::spec::TreeSpec;
use crate::tree::{Edge, Leaf, NodeId, TransformTree};

#[derive(Clone, Debug)]
pub struct RandomTreeOptions {
    pub max_depth: usize,
    pub max_dim: usize,
    /// Only natural-gradient leaves (plus zero-velocity dampers).
    pub natural_gradient_only: bool,
    /// Register diffeomorphism, metric-net and velocity weights as learnable.
    pub learnable: bool,
    /// Diffeomorphism edges always end in a leaf, so every measurement node
    /// is parameter free.
    pub diffeo_into_leaves: bool,
}

impl Default for RandomTreeOptions {
    fn default() -> Self {
        Self {
            max_depth: 4,
            max_dim: 6,
            natural_gradient_only: false,
            learnable: false,
            diffeo_into_leaves: false,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * gauss(rng))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| gauss(rng));
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    opts: &'a RandomTreeOptions,
    params: ParamVector,
    dims: Vec<usize>,
    depth: Vec<usize>,
    edges: Vec<Edge>,
}

impl Builder<'_> {
    /// Learnable trees still freeze about a quarter of their nets.
    fn weights(&mut self, name: String, init: Vec<f64>) -> Weights {
        let learnable = self.opts.learnable && self.rng.random_bool(0.75);
        Weights::allocate(&mut self.params, name, init, learnable)
    }

    fn diffeo(&mut self, name: &str, n: usize) -> Map {
        let learnable = self.opts.learnable && self.rng.random_bool(0.75);
        let seed = self.rng.random();
        Map::Diffeo(random_diffeo(seed, name, n, 2, 16, 0.3, learnable, &mut self.params))
    }

    fn add_child(&mut self, parent: usize) -> usize {
        let din = self.dims[parent];
        let child = self.dims.len();
        let name = format!("e{parent}_{child}");
        let (map, dout) = match self.rng.random_range(0..5) {
            0 => (Map::Identity(din), din),
            1 => {
                let dout = self.rng.random_range(1..=self.opts.max_dim);
                let scale = 1.0 / (din as f64).sqrt();
                let matrix = DMatrix::from_fn(dout, din, |_, _| scale * gauss(&mut self.rng));
                let offset = random_vector(&mut self.rng, dout, 1.0);
                (Map::Linear(LinearMap { matrix, offset }), dout)
            }
            2 => {
                let lengths = (0..din).map(|_| self.rng.random_range(0.5..1.5)).collect();
                let link = self.rng.random_bool(0.5).then(|| self.rng.random_range(0..din));
                (Map::PlanarArm(PlanarArmFk::new(lengths, link)), 2)
            }
            3 => (Map::Distance(DistanceToPoint::new(random_vector(&mut self.rng, din, 3.0), 0.0)), 1),
            _ if din >= 2 => (self.diffeo(&name, din), din),
            _ => (Map::Identity(din), din),
        };
        self.dims.push(dout);
        self.depth.push(self.depth[parent] + 1);
        self.edges.push(Edge {
            name,
            parent: NodeId(parent),
            child: NodeId(child),
            map,
        });
        child
    }

    fn metric(&mut self, name: &str, n: usize, input: usize) -> Metric {
        if self.rng.random_bool(0.5) {
            Metric::Constant(random_spd(&mut self.rng, n))
        } else {
            let hidden = vec![6, 6];
            let diag = if self.rng.random_bool(0.5) { 0.6 } else { -0.6 };
            let init = CholeskyMetricNet::init_values(input, n, &hidden, diag, self.rng.random());
            let w = self.weights(format!("{name}/metric"), init);
            Metric::Cholesky(CholeskyMetricNet::new(input, n, hidden, 1e-2, w))
        }
    }

    fn leaf(&mut self, node: usize) -> LeafPolicy {
        let n = self.dims[node];
        let name = format!("leaf{node}");
        let incoming = &self.edges[node - 1];
        let parent_dim = self.dims[incoming.parent.0];
        let after_diffeo = matches!(incoming.map, Map::Diffeo(_));
        let after_distance = matches!(incoming.map, Map::Distance(_));
        let subtask_metric = self.rng.random_bool(0.3);
        let metric_input = if subtask_metric { parent_dim } else { n };
        let space = if subtask_metric {
            MetricSpace::Subtask
        } else {
            MetricSpace::Latent
        };
        if after_distance && self.rng.random_bool(0.5) {
            let margin = self.rng.random_range(1.0..8.0);
            return LeafPolicy::barrier(margin, self.rng.random_range(0.1..1.0), self.rng.random_range(0.0..2.0));
        }
        let choice = if self.opts.natural_gradient_only {
            self.rng.random_range(0..3)
        } else {
            self.rng.random_range(0..6)
        };
        let metric = self.metric(&name, n, metric_input);
        let kind = match choice {
            0 if after_diffeo => Potential::LatentQuadratic {
                goal: random_vector(&mut self.rng, parent_dim, 1.0),
            },
            0 | 1 => Potential::Quadratic {
                goal: random_vector(&mut self.rng, n, 1.0),
                gain: self.rng.random_range(0.5..2.0),
            },
            2 => Potential::Zero,
            3 => return LeafPolicy::raw(Velocity::Constant(random_vector(&mut self.rng, n, 1.0)), metric).with_metric_space(space),
            4 => {
                let init = random_vector(&mut self.rng, n, 1.0).as_slice().to_vec();
                let w = self.weights(format!("{name}/velocity"), init);
                return LeafPolicy::raw(Velocity::Param(w), metric).with_metric_space(space);
            }
            _ => return LeafPolicy::damper(self.rng.random_range(0.1..2.0), n),
        };
        LeafPolicy::natural_gradient(kind, metric).with_metric_space(space)
    }
}

/// Coupling-layer chain with Gaussian weights of standard deviation
/// `weight_std` and unit length scale, registered in `params` when learnable.
#[allow(clippy::too_many_arguments)]
pub fn random_diffeo(
    seed: u64,
    name: &str,
    dim: usize,
    layers: usize,
    features: usize,
    weight_std: f64,
    learnable: bool,
    params: &mut ParamVector,
) -> DiffeoChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (na, nb) = CouplingLayer::block_sizes(dim);
    let layers = (0..layers)
        .map(|m| {
            let mut net = |label: &str| {
                let init: Vec<f64> = (0..features * nb).map(|_| weight_std * gauss(&mut rng)).collect();
                let w = Weights::allocate(params, format!("{name}/layer{m}/{label}"), init, learnable);
                RffFunction::sample(na, nb, features, 1.0, rng.random(), w)
            };
            let s = net("s");
            let t = net("t");
            CouplingLayer::new(dim, m % 2 == 1, s, t)
        })
        .collect();
    DiffeoChain::new(dim, layers)
}

/// Random tree with a full-rank identity leaf at the root so the root
/// metric is positive definite, plus a configuration to evaluate it at.
pub fn random_tree(seed: u64, opts: &RandomTreeOptions) -> (TransformTree, ParamVector, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_dim = rng.random_range(1..=opts.max_dim);
    let mut b = Builder {
        rng,
        opts,
        params: ParamVector::new(),
        dims: vec![root_dim],
        depth: vec![0],
        edges: Vec::new(),
    };
    let mut frontier = vec![0];
    while let Some(u) = frontier.pop() {
        if b.depth[u] >= opts.max_depth {
            continue;
        }
        let kids = if u == 0 { b.rng.random_range(1..=3) } else { b.rng.random_range(0..=2) };
        for _ in 0..kids {
            let c = b.add_child(u);
            let diffeo = matches!(b.edges[c - 1].map, Map::Diffeo(_));
            if !(diffeo && opts.diffeo_into_leaves) {
                frontier.push(c);
            }
        }
    }
    // Anchor leaf directly on the configuration space.
    let anchor = b.dims.len();
    b.dims.push(root_dim);
    b.depth.push(1);
    b.edges.push(Edge {
        name: format!("e0_{anchor}"),
        parent: NodeId(0),
        child: NodeId(anchor),
        map: Map::Identity(root_dim),
    });

    let n = b.dims.len();
    let mut has_child = vec![false; n];
    for e in &b.edges {
        has_child[e.parent.0] = true;
    }
    let mut leaves = Vec::new();
    for u in (1..n).filter(|&u| !has_child[u]) {
        let policy = if u == anchor {
            let goal = random_vector(&mut b.rng, root_dim, 1.0);
            LeafPolicy::natural_gradient(
                Potential::Quadratic { goal, gain: 1.0 },
                Metric::Constant(random_spd(&mut b.rng, root_dim)),
            )
        } else {
            b.leaf(u)
        };
        leaves.push(Leaf {
            name: format!("leaf{u}"),
            node: NodeId(u),
            policy,
        });
    }
    let q = random_vector(&mut b.rng, root_dim, 1.0);
    let tree = TransformTree::new(b.dims, b.edges, leaves).expect("generated trees are valid");
    (tree, b.params, q)
}

/// Random demonstration samples for a tree of root dimension `d`.
pub fn random_demos(seed: u64, d: usize, samples: usize) -> DemoSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = (0..samples).map(|i| i as f64 * 0.1).collect();
    let q = (0..samples).map(|_| random_vector(&mut rng, d, 1.0)).collect();
    let qd = (0..samples).map(|_| random_vector(&mut rng, d, 1.0)).collect();
    DemoSet::new(vec![Trajectory::new(t, q, Some(qd)).expect("valid samples")]).expect("one trajectory")
}

/// Demonstrations at random configurations whose velocities are the policy
/// of `tree` plus Gaussian noise of standard deviation `noise`.
pub fn perturbed_policy_demos(
    tree: &TransformTree,
    params: &ParamVector,
    seed: u64,
    samples: usize,
    noise: f64,
) -> crate::Result<DemoSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = tree.root_dim();
    let t = (0..samples).map(|i| i as f64 * 0.1).collect();
    let mut q = Vec::with_capacity(samples);
    let mut qd = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = random_vector(&mut rng, d, 1.0);
        qd.push(tree.evaluate_policy(&x, params)? + random_vector(&mut rng, d, noise));
        q.push(x);
    }
    DemoSet::new(vec![Trajectory::new(t, q, Some(qd))?])
}

/// Three-link arm reaching a goal past an obstacle: end-effector attractor,
/// barrier on the obstacle distance, joint damper.
pub const STABILITY_ARM: &str = r#"{
  "nodes": [
    {"id": 0, "dim": 3},
    {"id": 1, "dim": 2},
    {"id": 2, "dim": 2},
    {"id": 3, "dim": 1},
    {"id": 4, "dim": 3}
  ],
  "edges": [
    {"name": "fk", "parent": 0, "child": 1, "map": {"kind": "planar_arm_fk", "lengths": [1.0, 0.8, 0.6], "point": "ee"}},
    {"name": "ee", "parent": 1, "child": 2, "map": {"kind": "identity"}},
    {"name": "obstacle", "parent": 1, "child": 3, "map": {"kind": "distance_to_point", "center": [0.2, 1.6], "radius": 0.2}},
    {"name": "joints", "parent": 0, "child": 4, "map": {"kind": "identity"}}
  ],
  "leaves": [
    {"name": "reach", "node": 2, "policy": {"kind": "attractor", "goal": [1.2, 0.9], "gain": 1.0, "weight": 1.0}},
    {"name": "avoid", "node": 3, "policy": {"kind": "barrier", "margin": 0.3, "gain": 0.5, "weight_gain": 1.0}},
    {"name": "damping", "node": 4, "policy": {"kind": "damper", "gain": 0.05}}
  ]
}"#;

pub fn stability_arm() -> (TransformTree, ParamVector) {
    TreeSpec::from_json(STABILITY_ARM)
        .and_then(|s| s.build(&Default::default()))
        .expect("fixture spec is valid")
}

/// Seeded start configurations for the stability arm, each at least
/// 0.15 clear of the obstacle surface.
pub fn stability_starts(seed: u64, count: usize) -> Vec<DVector<f64>> {
    let (tree, params) = stability_arm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let states = tree.forward_pass(&q, &params);
        if let Ok(states) = states {
            if states[3].coord[0] > 0.15 {
                out.push(q);
            }
        }
    }
    out
}

/// Redundant three-link arm with a learnable latent end-effector leaf, a
/// learnable joint posture leaf and a fixed joint damper.
pub const CONFLICTING_ARM: &str = r#"{
  "nodes": [
    {"id": 0, "dim": 3},
    {"id": 1, "dim": 2},
    {"id": 2, "dim": 2},
    {"id": 3, "dim": 3},
    {"id": 4, "dim": 3}
  ],
  "edges": [
    {"name": "fk", "parent": 0, "child": 1, "map": {"kind": "planar_arm_fk", "lengths": [1.0, 0.8, 0.6], "point": "ee"}},
    {"name": "latent", "parent": 1, "child": 2, "map": {"kind": "diffeo_chain", "layers": 4, "features_D": 32, "length_scale": "auto", "seed": 7}},
    {"name": "posture", "parent": 0, "child": 3, "map": {"kind": "identity"}},
    {"name": "joints", "parent": 0, "child": 4, "map": {"kind": "identity"}}
  ],
  "leaves": [
    {"name": "reach", "node": 2, "policy": {"kind": "natural_gradient",
      "potential": {"kind": "latent_quadratic", "goal": [1.0, 1.0]},
      "metric": {"kind": "cholesky_net", "hidden": [16, 16], "seed": 11}, "learnable": true}},
    {"name": "posture", "node": 3, "policy": {"kind": "natural_gradient",
      "potential": {"kind": "quadratic", "goal": [0.5, 0.5, 0.5], "gain": 0.1},
      "metric": {"kind": "cholesky_net", "hidden": [16, 16], "seed": 13, "diag_init": 0.3}, "learnable": true}},
    {"name": "damping", "node": 4, "policy": {"kind": "damper", "gain": 0.05}}
  ]
}"#;

/// End-effector goal of the conflicting-demo arm.
pub const CONFLICTING_GOAL: [f64; 2] = [1.0, 1.0];
/// End-effector convergence rates along x and y.
pub const CONFLICTING_RATES: [f64; 2] = [1.0, 2.5];

fn arm_fk() -> PlanarArmFk {
    PlanarArmFk::new(vec![1.0, 0.8, 0.6], None)
}

/// Unit null-space direction of a 2x3 Jacobian, oriented by the cross product.
fn null_direction(j: &DMatrix<f64>) -> DVector<f64> {
    let (a, b) = (j.row(0), j.row(1));
    let n = DVector::from_vec(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]);
    let norm = n.norm();
    n / norm
}

/// Demonstrated joint velocity: end-effector motion `xdot = A (x* - x)`
/// resolved by the pseudoinverse, plus `null_speed` along the null space.
fn conflicting_velocity(q: &DVector<f64>, null_speed: f64) -> DVector<f64> {
    let fk = arm_fk();
    let x = fk.value(q);
    let j = fk.jacobian(q);
    let xdot = DVector::from_fn(2, |i, _| CONFLICTING_RATES[i] * (CONFLICTING_GOAL[i] - x[i]));
    let jjt = &j * j.transpose();
    let pinv = j.transpose() * jjt.try_inverse().expect("arm away from singularity");
    pinv * xdot + null_direction(&j) * null_speed
}

fn rk4(q: &DVector<f64>, t: f64, h: f64, f: &impl Fn(&DVector<f64>, f64) -> DVector<f64>) -> DVector<f64> {
    let k1 = f(q, t);
    let k2 = f(&(q + &k1 * (h / 2.0)), t + h / 2.0);
    let k3 = f(&(q + &k2 * (h / 2.0)), t + h / 2.0);
    let k4 = f(&(q + &k3 * h), t + h);
    q + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// Four demonstrations with identical end-effector motion from two start
/// points, each start reached by two joint configurations, with different
/// null-space oscillations.
pub fn conflicting_demos() -> DemoSet {
    const SAMPLE_DT: f64 = 0.05;
    const SUBSTEPS: usize = 50;
    const SAMPLES: usize = 81;
    let starts = [
        DVector::from_vec(vec![-0.4, 1.2, 1.0]),
        DVector::from_vec(vec![1.3, 1.4, -0.6]),
    ];
    let oscillations = [(1.5, 0.0), (-1.5, 1.5)];
    let mut trajectories = Vec::new();
    for start in &starts {
        // Second configuration for the same end-effector point.
        let shift = |q: &DVector<f64>, _: f64| null_direction(&arm_fk().jacobian(q));
        let mut other = start.clone();
        for _ in 0..600 {
            other = rk4(&other, 0.0, 1e-3, &shift);
        }
        for (q0, &(amp, phase)) in [start.clone(), other].iter().zip(&oscillations) {
            let f = |q: &DVector<f64>, t: f64| conflicting_velocity(q, amp * (3.0 * t + phase).sin());
            let h = SAMPLE_DT / SUBSTEPS as f64;
            let mut q = q0.clone();
            let (mut ts, mut qs, mut qds) = (Vec::new(), Vec::new(), Vec::new());
            for i in 0..SAMPLES {
                let t = i as f64 * SAMPLE_DT;
                ts.push(t);
                qds.push(f(&q, t));
                qs.push(q.clone());
                for s in 0..SUBSTEPS {
                    q = rk4(&q, t + s as f64 * h, h, &f);
                }
            }
            trajectories.push(Trajectory::new(ts, qs, Some(qds)).expect("finite samples"));
        }
    }
    DemoSet::new(trajectories).expect("equal dimensions")
}
