use nalgebra::{DMatrix, DVector};

/// Position of a link end of a planar serial chain with revolute joints.
///
/// Joint `i` rotates link `i`; absolute link angles are the running sums of
/// joint angles. The map always takes the full joint vector, so Jacobian
/// columns for joints past `link` are zero.
#[derive(Clone, Debug)]
pub struct PlanarArmFk {
    lengths: Vec<f64>,
    link: usize,
}

impl PlanarArmFk {
    /// `link = None` selects the end effector.
    pub fn new(lengths: Vec<f64>, link: Option<usize>) -> Self {
        assert!(!lengths.is_empty());
        assert!(lengths.iter().all(|&l| l > 0.0), "link lengths must be positive");
        let link = link.unwrap_or(lengths.len() - 1);
        assert!(link < lengths.len());
        Self { lengths, link }
    }

    pub fn joints(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    fn angles(&self, q: &DVector<f64>) -> Vec<f64> {
        q.iter()
            .take(self.link + 1)
            .scan(0.0, |acc, &qi| {
                *acc += qi;
                Some(*acc)
            })
            .collect()
    }

    pub fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        let (mut x, mut y) = (0.0, 0.0);
        for (l, s) in self.lengths.iter().zip(self.angles(q)) {
            x += l * s.cos();
            y += l * s.sin();
        }
        DVector::from_vec(vec![x, y])
    }

    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let angles = self.angles(q);
        let mut jac = DMatrix::zeros(2, self.joints());
        // Column j sums the contributions of links j..=link.
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in (0..=self.link).rev() {
            sx -= self.lengths[i] * angles[i].sin();
            sy += self.lengths[i] * angles[i].cos();
            jac[(0, i)] = sx;
            jac[(1, i)] = sy;
        }
        jac
    }

    /// Gradient of `u^T J(q) w` with respect to `q`.
    pub fn tangent_adjoint(&self, q: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let angles = self.angles(q);
        // u^T J w = sum_i l_i W_i (-u_x sin s_i + u_y cos s_i), W_i = sum_{j<=i} w_j.
        let mut out = DVector::zeros(self.joints());
        let mut cum_w = 0.0;
        let mut terms = vec![0.0; self.link + 1];
        for i in 0..=self.link {
            cum_w += w[i];
            let (s, c) = angles[i].sin_cos();
            terms[i] = self.lengths[i] * cum_w * (-u[0] * c - u[1] * s);
        }
        let mut acc = 0.0;
        for m in (0..=self.link).rev() {
            acc += terms[m];
            out[m] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn straight_two_link() {
        let fk = PlanarArmFk::new(vec![1.0, 1.0], None);
        let p = fk.value(&DVector::from_vec(vec![0.0, 0.0]));
        assert!((p[0] - 2.0).abs() < 1e-15 && p[1].abs() < 1e-15);
    }

    #[test]
    fn single_link_quarter_turn() {
        let fk = PlanarArmFk::new(vec![1.0], None);
        let p = fk.value(&DVector::from_vec(vec![FRAC_PI_2]));
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn intermediate_link_ignores_later_joints() {
        let fk = PlanarArmFk::new(vec![1.0, 2.0, 3.0], Some(0));
        let q = DVector::from_vec(vec![0.2, 1.0, -1.0]);
        let jac = fk.jacobian(&q);
        assert_eq!(jac[(0, 1)], 0.0);
        assert_eq!(jac[(1, 2)], 0.0);
        assert!((fk.value(&q)[0] - 0.2f64.cos()).abs() < 1e-15);
    }
}
