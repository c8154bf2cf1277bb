//! Affine coupling layers and chains of them.
//!
//! A layer keeps one block of coordinates (`a`, size `floor(n/2)`) and maps
//! the other (`b`, size `ceil(n/2)`) as `y_b = x_b ⊙ exp(s(x_a)) + t(x_a)`.
//! Even layers take `a` from the front of the vector and odd layers from the
//! back, so consecutive layers transform complementary coordinates.

use nalgebra::{DMatrix, DVector};

use super::rff::RffFunction;
use crate::params::ParamVector;

#[derive(Clone, Debug)]
pub struct CouplingLayer {
    dim: usize,
    a_idx: Vec<usize>,
    b_idx: Vec<usize>,
    s: RffFunction,
    t: RffFunction,
}

struct Split {
    xa: DVector<f64>,
    xb: DVector<f64>,
    t: DVector<f64>,
    e: DVector<f64>,
}

impl CouplingLayer {
    /// `flipped` selects the back-anchored split. Both nets must map
    /// `floor(n/2)` inputs to `ceil(n/2)` outputs.
    pub fn new(dim: usize, flipped: bool, s: RffFunction, t: RffFunction) -> Self {
        assert!(dim >= 2, "coupling layers need at least two coordinates");
        let (na, nb) = Self::block_sizes(dim);
        assert_eq!((s.in_dim(), s.out_dim()), (na, nb));
        assert_eq!((t.in_dim(), t.out_dim()), (na, nb));
        let (a_idx, b_idx) = if flipped {
            ((nb..dim).collect(), (0..nb).collect())
        } else {
            ((0..na).collect(), (na..dim).collect())
        };
        Self {
            dim,
            a_idx,
            b_idx,
            s,
            t,
        }
    }

    pub fn block_sizes(dim: usize) -> (usize, usize) {
        (dim / 2, dim - dim / 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale_net(&self) -> &RffFunction {
        &self.s
    }

    pub fn shift_net(&self) -> &RffFunction {
        &self.t
    }

    fn gather(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
    }

    fn split(&self, x: &DVector<f64>, params: &ParamVector) -> Split {
        let xa = Self::gather(x, &self.a_idx);
        let xb = Self::gather(x, &self.b_idx);
        let s = self.s.value(&xa, params);
        let t = self.t.value(&xa, params);
        let e = s.map(f64::exp);
        Split { xa, xb, t, e }
    }

    pub fn forward(&self, x: &DVector<f64>, params: &ParamVector) -> DVector<f64> {
        let sp = self.split(x, params);
        let mut y = x.clone();
        for (j, &bi) in self.b_idx.iter().enumerate() {
            y[bi] = sp.xb[j] * sp.e[j] + sp.t[j];
        }
        y
    }

    pub fn inverse(&self, y: &DVector<f64>, params: &ParamVector) -> DVector<f64> {
        let ya = Self::gather(y, &self.a_idx);
        let s = self.s.value(&ya, params);
        let t = self.t.value(&ya, params);
        let mut x = y.clone();
        for (j, &bi) in self.b_idx.iter().enumerate() {
            x[bi] = (y[bi] - t[j]) * (-s[j]).exp();
        }
        x
    }

    /// `log |det J|`, i.e. the sum of the scaling outputs.
    pub fn log_det(&self, x: &DVector<f64>, params: &ParamVector) -> f64 {
        let xa = Self::gather(x, &self.a_idx);
        self.s.value(&xa, params).sum()
    }

    pub fn jacobian(&self, x: &DVector<f64>, params: &ParamVector) -> DMatrix<f64> {
        let sp = self.split(x, params);
        let js = self.s.jacobian(&sp.xa, params);
        let jt = self.t.jacobian(&sp.xa, params);
        let mut jac = DMatrix::identity(self.dim, self.dim);
        for (j, &bi) in self.b_idx.iter().enumerate() {
            jac[(bi, bi)] = sp.e[j];
            let scale = sp.xb[j] * sp.e[j];
            for (k, &ai) in self.a_idx.iter().enumerate() {
                jac[(bi, ai)] = scale * js[(j, k)] + jt[(j, k)];
            }
        }
        jac
    }

    /// Gradient of `u^T J(x) w` with respect to `x`; the weight gradient is
    /// accumulated into `grad`.
    pub fn tangent_adjoint(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) -> DVector<f64> {
        let sp = self.split(x, params);
        let ub = Self::gather(u, &self.b_idx);
        let wa = Self::gather(w, &self.a_idx);
        let wb = Self::gather(w, &self.b_idx);

        let ws = self.s.weight_matrix(params);
        let wt = self.t.weight_matrix(params);
        let phi_s = self.s.phi(&sp.xa);
        let grad_phi_s = self.s.phi_jacobian(&sp.xa);
        let (dphi_s, hess_s) = self.s.phi_directional(&sp.xa, &wa);
        let (dphi_t, hess_t) = self.t.phi_directional(&sp.xa, &wa);
        let ds = ws.tr_mul(&dphi_s);

        let nb = self.b_idx.len();
        let c1 = DVector::from_fn(nb, |j, _| ub[j] * sp.e[j] * (wb[j] + sp.xb[j] * ds[j]));
        let c2 = DVector::from_fn(nb, |j, _| ub[j] * sp.xb[j] * sp.e[j]);

        let xa_bar = grad_phi_s.tr_mul(&(&ws * &c1))
            + hess_s.tr_mul(&(&ws * &c2))
            + hess_t.tr_mul(&(&wt * &ub));

        let mut x_bar = DVector::zeros(self.dim);
        for (k, &ai) in self.a_idx.iter().enumerate() {
            x_bar[ai] = xa_bar[k];
        }
        for (j, &bi) in self.b_idx.iter().enumerate() {
            x_bar[bi] = ub[j] * sp.e[j] * ds[j];
        }

        self.s.accumulate_outer(grad, &phi_s, &c1);
        self.s.accumulate_outer(grad, &dphi_s, &c2);
        self.t.accumulate_outer(grad, &dphi_t, &ub);
        x_bar
    }

    /// Accumulates `(d y / d theta)^T y_bar` into `grad`.
    pub fn value_param_adjoint(
        &self,
        x: &DVector<f64>,
        y_bar: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) {
        if !self.s.weights().is_learnable() && !self.t.weights().is_learnable() {
            return;
        }
        let sp = self.split(x, params);
        let yb = Self::gather(y_bar, &self.b_idx);
        let phi_s = self.s.phi(&sp.xa);
        let phi_t = self.t.phi(&sp.xa);
        let cs = DVector::from_fn(yb.len(), |j, _| yb[j] * sp.xb[j] * sp.e[j]);
        self.s.accumulate_outer(grad, &phi_s, &cs);
        self.t.accumulate_outer(grad, &phi_t, &yb);
    }
}

/// `phi = psi_M ∘ ... ∘ psi_1`, applied first-layer-first.
#[derive(Clone, Debug)]
pub struct DiffeoChain {
    dim: usize,
    layers: Vec<CouplingLayer>,
}

impl DiffeoChain {
    pub fn new(dim: usize, layers: Vec<CouplingLayer>) -> Self {
        assert!(layers.iter().all(|l| l.dim() == dim));
        Self { dim, layers }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> &[CouplingLayer] {
        &self.layers
    }

    pub fn is_learnable(&self) -> bool {
        self.layers
            .iter()
            .any(|l| l.s.weights().is_learnable() || l.t.weights().is_learnable())
    }

    pub fn value(&self, x: &DVector<f64>, params: &ParamVector) -> DVector<f64> {
        self.layers
            .iter()
            .fold(x.clone(), |y, layer| layer.forward(&y, params))
    }

    pub fn inverse(&self, y: &DVector<f64>, params: &ParamVector) -> DVector<f64> {
        self.layers
            .iter()
            .rev()
            .fold(y.clone(), |x, layer| layer.inverse(&x, params))
    }

    pub fn value_and_jacobian(&self, x: &DVector<f64>, params: &ParamVector) -> (DVector<f64>, DMatrix<f64>) {
        let mut y = x.clone();
        let mut jac = DMatrix::identity(self.dim, self.dim);
        for layer in &self.layers {
            jac = layer.jacobian(&y, params) * jac;
            y = layer.forward(&y, params);
        }
        (y, jac)
    }

    pub fn log_det(&self, x: &DVector<f64>, params: &ParamVector) -> f64 {
        let mut y = x.clone();
        let mut total = 0.0;
        for layer in &self.layers {
            total += layer.log_det(&y, params);
            y = layer.forward(&y, params);
        }
        total
    }

    /// Layer inputs `y_0 = x, ..., y_{M-1}` and their Jacobians.
    fn trace(&self, x: &DVector<f64>, params: &ParamVector) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut jacs = Vec::with_capacity(self.layers.len());
        let mut y = x.clone();
        for layer in &self.layers {
            jacs.push(layer.jacobian(&y, params));
            let next = layer.forward(&y, params);
            inputs.push(std::mem::replace(&mut y, next));
        }
        (inputs, jacs)
    }

    pub fn tangent_adjoint(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) -> DVector<f64> {
        let (inputs, jacs) = self.trace(x, params);
        let mut tangents = Vec::with_capacity(self.layers.len());
        let mut wm = w.clone();
        for jac in &jacs {
            let next = jac * &wm;
            tangents.push(std::mem::replace(&mut wm, next));
        }
        // Cotangents of the output coordinate and of the pushed tangent.
        let mut y_bar = DVector::zeros(self.dim);
        let mut w_bar = u.clone();
        for m in (0..self.layers.len()).rev() {
            let layer = &self.layers[m];
            layer.value_param_adjoint(&inputs[m], &y_bar, params, grad);
            let from_tangent = layer.tangent_adjoint(&inputs[m], &w_bar, &tangents[m], params, grad);
            y_bar = jacs[m].tr_mul(&y_bar) + from_tangent;
            w_bar = jacs[m].tr_mul(&w_bar);
        }
        y_bar
    }

    pub fn value_param_adjoint(
        &self,
        x: &DVector<f64>,
        y_bar: &DVector<f64>,
        params: &ParamVector,
        grad: &mut [f64],
    ) {
        let (inputs, jacs) = self.trace(x, params);
        let mut bar = y_bar.clone();
        for m in (0..self.layers.len()).rev() {
            self.layers[m].value_param_adjoint(&inputs[m], &bar, params, grad);
            bar = jacs[m].tr_mul(&bar);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Weights;

    fn constant_net(value: f64, out: usize) -> RffFunction {
        // One zero-frequency feature: phi = sqrt(2), so weight = value / sqrt(2).
        RffFunction::from_parts(
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            1.0,
            out,
            Weights::Frozen(vec![value / 2f64.sqrt(); out]),
        )
    }

    #[test]
    fn constant_scale_and_shift() {
        let layer = CouplingLayer::new(2, false, constant_net(2f64.ln(), 1), constant_net(1.0, 1));
        let p = ParamVector::new();
        let x = DVector::from_vec(vec![0.4, 3.0]);
        let y = layer.forward(&x, &p);
        assert!((y[0] - 0.4).abs() < 1e-15);
        assert!((y[1] - 7.0).abs() < 1e-12);
        let jac = layer.jacobian(&x, &p);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!((jac - expect).amax() < 1e-12);
        assert!((layer.inverse(&y, &p) - x).amax() < 1e-12);
    }

    #[test]
    fn zero_weights_give_identity() {
        let p = ParamVector::new();
        let mk = |seed| RffFunction::sample(1, 2, 16, 1.0, seed, Weights::Frozen(vec![0.0; 32]));
        let layer = CouplingLayer::new(3, true, mk(1), mk(2));
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(layer.forward(&x, &p), x);
        assert!((layer.jacobian(&x, &p) - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn flipped_split_transforms_front_block() {
        let layer = CouplingLayer::new(3, true, constant_net(0.0, 2), constant_net(1.0, 2));
        let p = ParamVector::new();
        let y = layer.forward(&DVector::from_vec(vec![0.0, 0.0, 5.0]), &p);
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
        assert_eq!(y[2], 5.0);
    }
}
