//! Leaf policies `(v, M)` and their natural-gradient-flow generators `(Phi, M)`.

mod metric;
mod potential;

pub use metric::{CholeskyMetricNet, Metric, MetricSpace};
pub use potential::Potential;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::params::{ParamVector, Weights};

#[derive(Clone, Debug)]
pub enum Velocity {
    Zero,
    Constant(DVector<f64>),
    /// `v = theta`, a directly parameterized constant velocity.
    Param(Weights),
}

#[derive(Clone, Debug)]
pub enum LeafKind {
    /// `M v = -grad Phi`; the force is taken as `-grad Phi` directly.
    NaturalGradient(Potential),
    RawVm(Velocity),
}

/// Inputs a leaf reads during evaluation.
#[derive(Clone, Copy, Debug)]
pub struct LeafInput<'a> {
    pub coord: &'a DVector<f64>,
    /// Coordinate fed to the metric (the leaf coordinate or its parent's).
    pub metric_input: &'a DVector<f64>,
    /// Goal mapped into the leaf's coordinates, for latent potentials.
    pub latent_goal: Option<&'a DVector<f64>>,
}

/// Partial derivatives of `a^T p - a^T M b` with respect to leaf inputs.
/// Parameter gradients are accumulated separately.
#[derive(Clone, Debug)]
pub struct LeafAdjoint {
    pub coord: DVector<f64>,
    pub metric_input: DVector<f64>,
    pub latent_goal: Option<DVector<f64>>,
}

#[derive(Clone, Debug)]
pub struct LeafPolicy {
    pub kind: LeafKind,
    pub metric: Metric,
    pub metric_space: MetricSpace,
}

impl LeafPolicy {
    pub fn natural_gradient(potential: Potential, metric: Metric) -> Self {
        Self {
            kind: LeafKind::NaturalGradient(potential),
            metric,
            metric_space: MetricSpace::Latent,
        }
    }

    pub fn raw(velocity: Velocity, metric: Metric) -> Self {
        Self {
            kind: LeafKind::RawVm(velocity),
            metric,
            metric_space: MetricSpace::Latent,
        }
    }

    /// Zero velocity with weight `c I`.
    pub fn damper(c: f64, dim: usize) -> Self {
        assert!(c > 0.0, "damper gain must be positive");
        Self::raw(Velocity::Zero, Metric::scaled_identity(dim, c))
    }

    /// Barrier on a 1-D distance coordinate. The potential is
    /// `gain * max(0, margin - z)^2 / z` and the weight is
    /// `1 + weight_gain * (max(0, margin - z) / z)^2`.
    pub fn barrier(margin: f64, gain: f64, weight_gain: f64) -> Self {
        assert!(margin > 0.0, "barrier margin must be positive");
        Self::natural_gradient(
            Potential::Barrier { margin, gain },
            Metric::BarrierWeight {
                margin,
                gain: weight_gain,
            },
        )
    }

    /// Quadratic well `0.5 * gain * |z - goal|^2` with weight `weight * I`.
    pub fn attractor(goal: DVector<f64>, gain: f64, weight: f64) -> Self {
        let n = goal.len();
        Self::natural_gradient(Potential::Quadratic { goal, gain }, Metric::scaled_identity(n, weight))
    }

    pub fn with_metric_space(mut self, space: MetricSpace) -> Self {
        self.metric_space = space;
        self
    }

    pub fn is_learnable(&self) -> bool {
        self.metric.is_learnable() || matches!(&self.kind, LeafKind::RawVm(Velocity::Param(w)) if w.is_learnable())
    }

    pub fn is_natural_gradient(&self) -> bool {
        matches!(self.kind, LeafKind::NaturalGradient(_))
    }

    /// Goal in parent coordinates that must be mapped through the incoming edge.
    pub fn latent_goal_source(&self) -> Option<&DVector<f64>> {
        match &self.kind {
            LeafKind::NaturalGradient(p) => p.latent_goal_source(),
            LeafKind::RawVm(_) => None,
        }
    }

    /// Checks that every component agrees with a leaf of dimension `dim`.
    pub fn check_dim(&self, dim: usize, metric_input_dim: usize) -> std::result::Result<(), String> {
        if self.metric.dim() != dim {
            return Err(format!("metric is {0}x{0} but the leaf has dimension {dim}", self.metric.dim()));
        }
        if let Some(n) = self.metric.input_dim() {
            if n != metric_input_dim {
                return Err(format!("metric expects input dimension {n}, got {metric_input_dim}"));
            }
        }
        let other = match &self.kind {
            LeafKind::NaturalGradient(p) => p.dim(),
            LeafKind::RawVm(Velocity::Zero) => None,
            LeafKind::RawVm(Velocity::Constant(v)) => Some(v.len()),
            LeafKind::RawVm(Velocity::Param(w)) => Some(w.len()),
        };
        match other {
            Some(n) if n != dim => Err(format!("policy is defined on dimension {n} but the leaf has dimension {dim}")),
            _ => Ok(()),
        }
    }

    fn raw_velocity(&self, v: &Velocity, dim: usize, params: &ParamVector) -> DVector<f64> {
        match v {
            Velocity::Zero => DVector::zeros(dim),
            Velocity::Constant(v) => v.clone(),
            Velocity::Param(w) => DVector::from_column_slice(w.get(params)),
        }
    }

    /// Returns `(p, M)` with `p = M v`, or `p = -grad Phi` for natural-gradient leaves.
    pub fn evaluate(&self, input: LeafInput<'_>, params: &ParamVector) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let m = self.metric.eval(input.metric_input, params)?;
        let p = match &self.kind {
            LeafKind::NaturalGradient(pot) => -pot.gradient(input.coord, input.latent_goal)?,
            LeafKind::RawVm(v) => &m * self.raw_velocity(v, input.coord.len(), params),
        };
        Ok((p, m))
    }

    /// Materialized leaf velocity. Natural-gradient leaves solve `M v = -grad Phi`.
    pub fn velocity(&self, input: LeafInput<'_>, params: &ParamVector) -> Result<DVector<f64>> {
        match &self.kind {
            LeafKind::NaturalGradient(_) => {
                let (p, m) = self.evaluate(input, params)?;
                let chol = m
                    .cholesky()
                    .expect("leaf metrics are positive definite by construction");
                Ok(chol.solve(&p))
            }
            LeafKind::RawVm(v) => Ok(self.raw_velocity(v, input.coord.len(), params)),
        }
    }

    /// `Phi` at the leaf, when the leaf is a gradient system. A zero-velocity
    /// raw leaf counts as one with `Phi = 0`.
    pub fn potential(&self, input: LeafInput<'_>) -> Option<Result<f64>> {
        match &self.kind {
            LeafKind::NaturalGradient(pot) => Some(pot.value(input.coord, input.latent_goal)),
            LeafKind::RawVm(Velocity::Zero) => Some(Ok(0.0)),
            LeafKind::RawVm(_) => None,
        }
    }

    /// Differentiates `s = a^T p - a^T M b` with `a`, `b` fixed. Parameter
    /// gradients are added to `grad`.
    pub fn adjoint(
        &self,
        input: LeafInput<'_>,
        a: &DVector<f64>,
        b: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) -> Result<LeafAdjoint> {
        let (coord, g, latent_goal) = match &self.kind {
            LeafKind::NaturalGradient(pot) => {
                let coord = -pot.hessian_vec(input.coord, a)?;
                let goal_bar = pot.latent_goal_source().map(|_| a.clone());
                (coord, -a * b.transpose(), goal_bar)
            }
            LeafKind::RawVm(v) => {
                let vel = self.raw_velocity(v, input.coord.len(), params);
                if let Velocity::Param(w) = v {
                    if let Some(gv) = w.grad(grad) {
                        let m = self.metric.eval(input.metric_input, params)?;
                        for (gi, mi) in gv.iter_mut().zip((m * a).iter()) {
                            *gi += mi;
                        }
                    }
                }
                (DVector::zeros(input.coord.len()), a * (vel - b).transpose(), None)
            }
        };
        let metric_input = self.metric.backprop(input.metric_input, &g, params, grad)?;
        Ok(LeafAdjoint {
            coord,
            metric_input,
            latent_goal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(leaf: &LeafPolicy, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let z = DVector::from_column_slice(z);
        let input = LeafInput {
            coord: &z,
            metric_input: &z,
            latent_goal: None,
        };
        leaf.evaluate(input, &ParamVector::new()).unwrap()
    }

    #[test]
    fn raw_leaf_force_is_metric_times_velocity() {
        let leaf = LeafPolicy::raw(
            Velocity::Constant(DVector::from_vec(vec![1.0, -1.0])),
            Metric::scaled_identity(2, 2.0),
        );
        assert_eq!(eval(&leaf, &[0.0, 0.0]).0, DVector::from_vec(vec![2.0, -2.0]));
    }

    #[test]
    fn natural_gradient_force_ignores_metric() {
        let leaf = LeafPolicy::attractor(DVector::zeros(2), 1.0, 5.0);
        assert_eq!(eval(&leaf, &[1.0, 0.0]).0, DVector::from_vec(vec![-1.0, 0.0]));
        assert_eq!(eval(&leaf, &[0.0, 0.0]).0, DVector::zeros(2));
    }

    #[test]
    fn materialized_velocity_satisfies_flow_equation() {
        let leaf = LeafPolicy::barrier(1.0, 0.7, 2.0);
        let z = DVector::from_element(1, 0.4);
        let input = LeafInput {
            coord: &z,
            metric_input: &z,
            latent_goal: None,
        };
        let p = ParamVector::new();
        let v = leaf.velocity(input, &p).unwrap();
        let (force, m) = leaf.evaluate(input, &p).unwrap();
        assert!((m * v - force).amax() < 1e-12);
    }

    #[test]
    fn damper_has_zero_force() {
        let (p, m) = eval(&LeafPolicy::damper(3.0, 2), &[0.5, 0.1]);
        assert_eq!(p, DVector::zeros(2));
        assert_eq!(m, DMatrix::from_diagonal_element(2, 2, 3.0));
    }

    #[test]
    fn dimension_check_reports_mismatch() {
        let leaf = LeafPolicy::attractor(DVector::zeros(2), 1.0, 1.0);
        assert!(leaf.check_dim(2, 2).is_ok());
        assert!(leaf.check_dim(3, 3).is_err());
    }
}
