//! Browser bindings: an interactive three-link arm driven by a composed
//! reach/avoid/damping tree, and a grid warped by a random coupling-layer
//! diffeomorphism.

use nalgebra::DVector;
use serde_json::{json, Value};
use tree_motion::fixtures::{random_diffeo, STABILITY_ARM};
use tree_motion::maps::DiffeoChain;
use tree_motion::spec::TreeSpec;
use tree_motion::{ParamVector, TransformTree};
use wasm_bindgen::prelude::*;

const LINKS: [f64; 3] = [1.0, 0.8, 0.6];
const REACH: usize = 0;
const AVOID: usize = 1;
const EE_NODE: usize = 2;
const DISTANCE_NODE: usize = 3;
const FK_NODE: usize = 1;

/// Three-link arm reaching for a goal around a round obstacle.
#[wasm_bindgen]
pub struct ArmDemo {
    spec: Value,
    tree: TransformTree,
    params: ParamVector,
    q: DVector<f64>,
    time: f64,
}

fn build(spec: &Value) -> Result<(TransformTree, ParamVector), String> {
    TreeSpec::from_json(&spec.to_string())
        .and_then(|s| s.build(&Default::default()))
        .map_err(|e| e.to_string())
}

fn js(err: String) -> JsError {
    JsError::new(&err)
}

impl ArmDemo {
    pub fn try_new() -> Result<Self, String> {
        let spec: Value = serde_json::from_str(STABILITY_ARM).map_err(|e| e.to_string())?;
        let (tree, params) = build(&spec)?;
        Ok(Self {
            spec,
            tree,
            params,
            q: DVector::from_column_slice(&[-1.2, 0.8, 1.5]),
            time: 0.0,
        })
    }

    fn rebuild(&mut self, edit: impl FnOnce(&mut Value)) -> Result<(), String> {
        let mut spec = self.spec.clone();
        edit(&mut spec);
        let (tree, params) = build(&spec)?;
        self.spec = spec;
        self.tree = tree;
        self.params = params;
        Ok(())
    }

    pub fn try_set_goal(&mut self, x: f64, y: f64) -> Result<(), String> {
        self.rebuild(|s| s["leaves"][REACH]["policy"]["goal"] = json!([x, y]))
    }

    /// Moves the obstacle; refused when the arm's end effector would be inside it.
    pub fn try_set_obstacle(&mut self, x: f64, y: f64, radius: f64) -> Result<(), String> {
        let previous = self.spec.clone();
        self.rebuild(|s| {
            let map = &mut s["edges"][DISTANCE_NODE - 1]["map"];
            map["center"] = json!([x, y]);
            map["radius"] = json!(radius);
        })?;
        if let Err(e) = self.tree.evaluate(&self.q, &self.params) {
            self.rebuild(|s| *s = previous)?;
            return Err(e.to_string());
        }
        Ok(())
    }

    pub fn try_set_configuration(&mut self, q: &[f64]) -> Result<(), String> {
        if q.len() != LINKS.len() {
            return Err(format!("expected {} joint angles, got {}", LINKS.len(), q.len()));
        }
        let q = DVector::from_column_slice(q);
        self.tree.evaluate(&q, &self.params).map_err(|e| e.to_string())?;
        self.q = q;
        self.time = 0.0;
        Ok(())
    }

    fn policy(&self, q: &DVector<f64>) -> Result<DVector<f64>, String> {
        self.tree.evaluate_policy(q, &self.params).map_err(|e| e.to_string())
    }

    /// Advances `steps` RK4 steps of `qdot = pi(q)`; the state is left
    /// unchanged by a step that fails.
    pub fn try_step(&mut self, steps: usize, dt: f64) -> Result<(), String> {
        for _ in 0..steps {
            let q = &self.q;
            let k1 = self.policy(q)?;
            let k2 = self.policy(&(q + &k1 * (0.5 * dt)))?;
            let k3 = self.policy(&(q + &k2 * (0.5 * dt)))?;
            let k4 = self.policy(&(q + &k3 * dt))?;
            self.q = q + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
            self.time += dt;
        }
        Ok(())
    }

    /// End-effector velocities `[reach, avoid, composed]`, two entries each.
    /// The avoid leaf's one-dimensional velocity is drawn along the distance
    /// gradient.
    pub fn try_ee_velocities(&self) -> Result<Vec<f64>, String> {
        let eval = self.tree.evaluate(&self.q, &self.params).map_err(|e| e.to_string())?;
        let reach = &eval.states[EE_NODE];
        let v_reach = reach
            .pulled_metric
            .clone()
            .cholesky()
            .ok_or("reach metric is not positive definite")?
            .solve(&reach.pulled_force);
        let avoid = &eval.states[DISTANCE_NODE];
        let v_avoid = avoid.pulled_force[0] / avoid.pulled_metric[(0, 0)];
        let grad = avoid.jac_to_parent.row(0).transpose();
        let along = &grad * (v_avoid / grad.norm_squared().max(1e-12));
        let composed = &eval.states[FK_NODE].jac_to_parent * &eval.policy;
        Ok(vec![v_reach[0], v_reach[1], along[0], along[1], composed[0], composed[1]])
    }
}

#[wasm_bindgen]
impl ArmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<ArmDemo, JsError> {
        Self::try_new().map_err(js)
    }

    pub fn set_goal(&mut self, x: f64, y: f64) -> Result<(), JsError> {
        self.try_set_goal(x, y).map_err(js)
    }

    pub fn set_obstacle(&mut self, x: f64, y: f64, radius: f64) -> Result<(), JsError> {
        self.try_set_obstacle(x, y, radius).map_err(js)
    }

    pub fn set_configuration(&mut self, q: &[f64]) -> Result<(), JsError> {
        self.try_set_configuration(q).map_err(js)
    }

    pub fn step(&mut self, steps: usize, dt: f64) -> Result<(), JsError> {
        self.try_step(steps, dt).map_err(js)
    }

    pub fn ee_velocities(&self) -> Result<Vec<f64>, JsError> {
        self.try_ee_velocities().map_err(js)
    }

    pub fn configuration(&self) -> Vec<f64> {
        self.q.as_slice().to_vec()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Base and link end points, `[x0, y0, x1, y1, ...]`.
    pub fn joint_positions(&self) -> Vec<f64> {
        let mut out = vec![0.0, 0.0];
        let (mut x, mut y, mut angle) = (0.0, 0.0, 0.0);
        for (l, q) in LINKS.iter().zip(self.q.iter()) {
            angle += q;
            x += l * angle.cos();
            y += l * angle.sin();
            out.extend([x, y]);
        }
        out
    }

    /// Total potential of the composed tree.
    pub fn potential(&self) -> f64 {
        self.tree.potential(&self.q, &self.params).ok().flatten().unwrap_or(f64::NAN)
    }

    /// `|grad Phi|` at the current configuration.
    pub fn grad_norm(&self) -> f64 {
        self.tree
            .evaluate(&self.q, &self.params)
            .map(|e| e.root_force().norm())
            .unwrap_or(f64::NAN)
    }

    pub fn goal(&self) -> Vec<f64> {
        floats(&self.spec["leaves"][REACH]["policy"]["goal"])
    }

    /// `[x, y, radius]` of the obstacle.
    pub fn obstacle(&self) -> Vec<f64> {
        let map = &self.spec["edges"][DISTANCE_NODE - 1]["map"];
        let mut out = floats(&map["center"]);
        out.push(map["radius"].as_f64().unwrap_or(0.0));
        out
    }

    /// Distance at which the barrier starts to act, measured from the obstacle surface.
    pub fn barrier_margin(&self) -> f64 {
        self.spec["leaves"][AVOID]["policy"]["margin"].as_f64().unwrap_or(0.0)
    }
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default()
}

/// Random planar coupling-layer diffeomorphism.
#[wasm_bindgen]
pub struct DiffeoDemo {
    chain: DiffeoChain,
    params: ParamVector,
}

#[wasm_bindgen]
impl DiffeoDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, layers: usize, features: usize, weight_std: f64) -> DiffeoDemo {
        let mut params = ParamVector::new();
        let chain = random_diffeo(u64::from(seed), "phi", 2, layers, features, weight_std, false, &mut params);
        Self { chain, params }
    }

    /// Images of `lines` horizontal and `lines` vertical grid lines over
    /// `[-extent, extent]^2`, each sampled at `samples` points, as
    /// consecutive `x, y` pairs.
    pub fn warp_grid(&self, lines: usize, samples: usize, extent: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * lines * samples);
        let at = |i: usize, n: usize| if n < 2 { 0.0 } else { -extent + 2.0 * extent * i as f64 / (n - 1) as f64 };
        for vertical in [false, true] {
            for i in 0..lines {
                for j in 0..samples {
                    let (a, b) = (at(i, lines), at(j, samples));
                    let p = if vertical { [a, b] } else { [b, a] };
                    let y = self.chain.value(&DVector::from_column_slice(&p), &self.params);
                    out.extend([y[0], y[1]]);
                }
            }
        }
        out
    }

    /// Maps one point forward.
    pub fn forward(&self, x: f64, y: f64) -> Vec<f64> {
        self.chain.value(&DVector::from_column_slice(&[x, y]), &self.params).as_slice().to_vec()
    }

    /// Maps one point back.
    pub fn inverse(&self, x: f64, y: f64) -> Vec<f64> {
        self.chain.inverse(&DVector::from_column_slice(&[x, y]), &self.params).as_slice().to_vec()
    }

    /// Largest `|phi^-1(phi(x)) - x|` over a `samples x samples` grid.
    pub fn roundtrip_error(&self, samples: usize, extent: f64) -> f64 {
        let grid = self.grid_points(samples, extent);
        grid.iter()
            .map(|x| (self.chain.inverse(&self.chain.value(x, &self.params), &self.params) - x).amax())
            .fold(0.0, f64::max)
    }

    /// Log-determinant of the Jacobian at one point.
    pub fn log_det(&self, x: f64, y: f64) -> f64 {
        self.chain.log_det(&DVector::from_column_slice(&[x, y]), &self.params)
    }
}

impl DiffeoDemo {
    fn grid_points(&self, samples: usize, extent: f64) -> Vec<DVector<f64>> {
        let n = samples.max(2);
        let at = |i: usize| -extent + 2.0 * extent * i as f64 / (n - 1) as f64;
        (0..n * n).map(|k| DVector::from_column_slice(&[at(k / n), at(k % n)])).collect()
    }
}
