//! Differentiable maps used as transform-tree edges.

mod coupling;
mod distance;
mod kinematics;
mod rff;

pub use coupling::{CouplingLayer, DiffeoChain};
pub use distance::{DistanceToPoint, DEGENERATE_RADIUS};
pub use kinematics::PlanarArmFk;
pub use rff::RffFunction;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::params::ParamVector;

/// Names accepted in the `kind` field of a map spec.
pub const MAP_KINDS: &[&str] = &[
    "identity",
    "planar_arm_fk",
    "distance_to_point",
    "diffeo_chain",
    "linear",
];

/// A smooth map with analytic first derivatives and the second-order
/// products needed to differentiate the composed policy with respect to
/// parameters.
pub trait DifferentiableMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>, params: &ParamVector) -> Result<DVector<f64>>;

    fn jacobian(&self, x: &DVector<f64>, params: &ParamVector) -> Result<DMatrix<f64>>;

    fn value_and_jacobian(
        &self,
        x: &DVector<f64>,
        params: &ParamVector,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.value(x, params)?, self.jacobian(x, params)?))
    }

    /// `grad_x (u^T J(x) w)`. Parameterized maps also add `grad_theta` of
    /// the same scalar into `grad`.
    fn tangent_adjoint(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) -> Result<DVector<f64>>;

    /// Adds `(d psi / d theta)^T y_bar` into `grad`.
    fn value_param_adjoint(
        &self,
        _x: &DVector<f64>,
        _y_bar: &DVector<f64>,
        _params: &ParamVector,
        _grad: &mut [f64],
    ) -> Result<()> {
        Ok(())
    }

    fn is_learnable(&self) -> bool {
        false
    }
}

/// `x -> A x + b`.
#[derive(Clone, Debug)]
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

#[derive(Clone, Debug)]
pub enum Map {
    Identity(usize),
    Linear(LinearMap),
    PlanarArm(PlanarArmFk),
    Distance(DistanceToPoint),
    Diffeo(DiffeoChain),
}

impl Map {
    pub fn kind(&self) -> &'static str {
        match self {
            Map::Identity(_) => "identity",
            Map::Linear(_) => "linear",
            Map::PlanarArm(_) => "planar_arm_fk",
            Map::Distance(_) => "distance_to_point",
            Map::Diffeo(_) => "diffeo_chain",
        }
    }

    pub fn as_diffeo(&self) -> Option<&DiffeoChain> {
        match self {
            Map::Diffeo(d) => Some(d),
            _ => None,
        }
    }
}

impl DifferentiableMap for Map {
    fn in_dim(&self) -> usize {
        match self {
            Map::Identity(n) => *n,
            Map::Linear(l) => l.matrix.ncols(),
            Map::PlanarArm(a) => a.joints(),
            Map::Distance(d) => d.dim(),
            Map::Diffeo(c) => c.dim(),
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            Map::Identity(n) => *n,
            Map::Linear(l) => l.matrix.nrows(),
            Map::PlanarArm(_) => 2,
            Map::Distance(_) => 1,
            Map::Diffeo(c) => c.dim(),
        }
    }

    fn value(&self, x: &DVector<f64>, params: &ParamVector) -> Result<DVector<f64>> {
        Ok(match self {
            Map::Identity(_) => x.clone(),
            Map::Linear(l) => &l.matrix * x + &l.offset,
            Map::PlanarArm(a) => a.value(x),
            Map::Distance(d) => d.value(x)?,
            Map::Diffeo(c) => c.value(x, params),
        })
    }

    fn jacobian(&self, x: &DVector<f64>, params: &ParamVector) -> Result<DMatrix<f64>> {
        Ok(match self {
            Map::Identity(n) => DMatrix::identity(*n, *n),
            Map::Linear(l) => l.matrix.clone(),
            Map::PlanarArm(a) => a.jacobian(x),
            Map::Distance(d) => d.jacobian(x)?,
            Map::Diffeo(c) => c.value_and_jacobian(x, params).1,
        })
    }

    fn value_and_jacobian(
        &self,
        x: &DVector<f64>,
        params: &ParamVector,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match self {
            Map::Diffeo(c) => Ok(c.value_and_jacobian(x, params)),
            _ => Ok((self.value(x, params)?, self.jacobian(x, params)?)),
        }
    }

    fn tangent_adjoint(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) -> Result<DVector<f64>> {
        Ok(match self {
            Map::Identity(n) => DVector::zeros(*n),
            Map::Linear(l) => DVector::zeros(l.matrix.ncols()),
            Map::PlanarArm(a) => a.tangent_adjoint(x, u, w),
            Map::Distance(d) => d.tangent_adjoint(x, u, w)?,
            Map::Diffeo(c) => c.tangent_adjoint(x, u, w, params, grad),
        })
    }

    fn value_param_adjoint(
        &self,
        x: &DVector<f64>,
        y_bar: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) -> Result<()> {
        if let Map::Diffeo(c) = self {
            c.value_param_adjoint(x, y_bar, params, grad);
        }
        Ok(())
    }

    fn is_learnable(&self) -> bool {
        matches!(self, Map::Diffeo(c) if c.is_learnable())
    }
}
