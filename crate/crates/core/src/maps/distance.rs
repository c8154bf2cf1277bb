use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Inputs closer than this to the center have no usable Jacobian.
pub const DEGENERATE_RADIUS: f64 = 1e-9;

/// `x -> |x - center| - radius`: distance to a point, or signed distance to
/// a ball surface when `radius > 0`.
#[derive(Clone, Debug)]
pub struct DistanceToPoint {
    center: DVector<f64>,
    radius: f64,
}

impl DistanceToPoint {
    pub fn new(center: DVector<f64>, radius: f64) -> Self {
        assert!(radius >= 0.0);
        Self { center, radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn offset(&self, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let d = x - &self.center;
        let rho = d.norm();
        if rho < DEGENERATE_RADIUS {
            return Err(Error::Degenerate(format!(
                "distance map evaluated {rho:e} from its center"
            )));
        }
        Ok((d, rho))
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (_, rho) = self.offset(x)?;
        Ok(DVector::from_element(1, rho - self.radius))
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (d, rho) = self.offset(x)?;
        Ok(DMatrix::from_row_slice(1, d.len(), (d / rho).as_slice()))
    }

    pub fn tangent_adjoint(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        let (d, rho) = self.offset(x)?;
        let dw = d.dot(w);
        Ok((w / rho - &d * (dw / rho.powi(3))) * u[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let m = DistanceToPoint::new(DVector::zeros(2), 0.0);
        let x = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(m.value(&x).unwrap()[0], 5.0);
        let j = m.jacobian(&x).unwrap();
        assert!((j[(0, 0)] - 0.6).abs() < 1e-15 && (j[(0, 1)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn shifted_center() {
        let m = DistanceToPoint::new(DVector::from_vec(vec![1.0, 0.0]), 0.0);
        assert_eq!(m.value(&DVector::from_vec(vec![1.0, 2.0])).unwrap()[0], 2.0);
    }

    #[test]
    fn at_center_is_degenerate() {
        let m = DistanceToPoint::new(DVector::from_vec(vec![1.0, 1.0]), 0.0);
        let x = DVector::from_vec(vec![1.0, 1.0 + 1e-10]);
        assert!(matches!(m.value(&x), Err(Error::Degenerate(_))));
        assert!(m.jacobian(&x).is_err());
    }

    #[test]
    fn radius_gives_signed_distance() {
        let m = DistanceToPoint::new(DVector::zeros(2), 1.5);
        assert_eq!(m.value(&DVector::from_vec(vec![1.0, 0.0])).unwrap()[0], -0.5);
    }
}
