use nalgebra::DVector;

use super::metric::barrier_coordinate;
use crate::error::{Error, Result};

/// Scalar potential `Phi` defined on a leaf coordinate.
#[derive(Clone, Debug)]
pub enum Potential {
    Zero,
    /// `0.5 * gain * |z - goal|^2`.
    Quadratic { goal: DVector<f64>, gain: f64 },
    /// `0.5 * |w - phi(goal)|^2` at a latent leaf, where `phi` is the map on
    /// the leaf's incoming edge and `goal` is given in the parent's coordinates.
    LatentQuadratic { goal: DVector<f64> },
    /// `gain * max(0, margin - z)^2 / z` on a 1-D distance coordinate, `z > 0`.
    ///
    /// Hand-designed collision term: flat beyond `margin`, unbounded as
    /// `z -> 0`, continuously differentiable at the margin.
    Barrier { margin: f64, gain: f64 },
}

impl Potential {
    fn target<'a>(&'a self, latent_goal: Option<&'a DVector<f64>>) -> Result<&'a DVector<f64>> {
        match self {
            Potential::Quadratic { goal, .. } => Ok(goal),
            Potential::LatentQuadratic { .. } => latent_goal
                .ok_or_else(|| Error::Config("latent potential evaluated without its mapped goal".into())),
            _ => unreachable!("only quadratic potentials have a target"),
        }
    }

    pub fn value(&self, z: &DVector<f64>, latent_goal: Option<&DVector<f64>>) -> Result<f64> {
        Ok(match self {
            Potential::Zero => 0.0,
            Potential::Quadratic { gain, .. } => 0.5 * gain * (z - self.target(latent_goal)?).norm_squared(),
            Potential::LatentQuadratic { .. } => 0.5 * (z - self.target(latent_goal)?).norm_squared(),
            Potential::Barrier { margin, gain } => {
                let d = barrier_coordinate(z)?;
                let r = (margin - d).max(0.0);
                gain * r * r / d
            }
        })
    }

    pub fn gradient(&self, z: &DVector<f64>, latent_goal: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        Ok(match self {
            Potential::Zero => DVector::zeros(z.len()),
            Potential::Quadratic { gain, .. } => (z - self.target(latent_goal)?) * *gain,
            Potential::LatentQuadratic { .. } => z - self.target(latent_goal)?,
            Potential::Barrier { margin, gain } => {
                let d = barrier_coordinate(z)?;
                let r = (margin - d).max(0.0);
                DVector::from_element(1, gain * (-2.0 * r / d - r * r / (d * d)))
            }
        })
    }

    /// Hessian-vector product `grad^2 Phi(z) a`.
    pub fn hessian_vec(&self, z: &DVector<f64>, a: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(match self {
            Potential::Zero => DVector::zeros(z.len()),
            Potential::Quadratic { gain, .. } => a * *gain,
            Potential::LatentQuadratic { .. } => a.clone(),
            Potential::Barrier { margin, gain } => {
                let d = barrier_coordinate(z)?;
                let h = if d < *margin {
                    let r = margin - d;
                    gain * (2.0 / d + 4.0 * r / (d * d) + 2.0 * r * r / d.powi(3))
                } else {
                    0.0
                };
                a * h
            }
        })
    }

    /// Goal expressed in the coordinates where it must be mapped, if any.
    pub fn latent_goal_source(&self) -> Option<&DVector<f64>> {
        match self {
            Potential::LatentQuadratic { goal } => Some(goal),
            _ => None,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Potential::Zero => None,
            Potential::Quadratic { goal, .. } | Potential::LatentQuadratic { goal } => Some(goal.len()),
            Potential::Barrier { .. } => Some(1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_flat_beyond_margin_and_repulsive_inside() {
        let b = Potential::Barrier { margin: 0.5, gain: 1.0 };
        let far = DVector::from_element(1, 0.7);
        assert_eq!(b.value(&far, None).unwrap(), 0.0);
        assert_eq!(b.gradient(&far, None).unwrap()[0], 0.0);
        let near = DVector::from_element(1, 0.25);
        // -grad Phi must point toward larger distance.
        assert!(-b.gradient(&near, None).unwrap()[0] > 0.0);
        assert!(b.value(&DVector::from_element(1, -0.1), None).is_err());
    }

    #[test]
    fn barrier_derivatives_match_differences() {
        let b = Potential::Barrier { margin: 0.8, gain: 2.0 };
        let h = 1e-6;
        for &z in &[0.1, 0.3, 0.79] {
            let f = |v: f64| b.value(&DVector::from_element(1, v), None).unwrap();
            let g = |v: f64| b.gradient(&DVector::from_element(1, v), None).unwrap()[0];
            let fd1 = (f(z + h) - f(z - h)) / (2.0 * h);
            let fd2 = (g(z + h) - g(z - h)) / (2.0 * h);
            let one = DVector::from_element(1, 1.0);
            let hz = b.hessian_vec(&DVector::from_element(1, z), &one).unwrap()[0];
            assert!((fd1 - g(z)).abs() < 1e-6 * fd1.abs().max(1.0));
            assert!((fd2 - hz).abs() < 1e-5 * hz.abs().max(1.0));
        }
    }
}
