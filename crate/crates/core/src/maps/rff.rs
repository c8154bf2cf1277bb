//! Vector-valued functions linear in their weights over random Fourier
//! features of a Gaussian kernel.
//!
//! `f(x) = (phi(x) ⊗ I_m)^T theta` with
//! `phi_i(x) = sqrt(2/D) cos(alpha_i . x + beta_i)`. Frequencies are drawn as
//! `alpha_i ~ N(0, l^-2 I)` and phases as `beta_i ~ U[0, 2pi)`; both are fixed
//! at construction and only `theta` (a `D x m` row-major block) is learnable.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

use crate::params::{ParamVector, Weights};

#[derive(Clone, Debug)]
pub struct RffFunction {
    in_dim: usize,
    out_dim: usize,
    /// Unit-variance frequency draws, `D x in_dim`; divided by the length scale on use.
    unit_freq: DMatrix<f64>,
    phases: DVector<f64>,
    length_scale: f64,
    weights: Weights,
}

impl RffFunction {
    pub fn sample(
        in_dim: usize,
        out_dim: usize,
        features: usize,
        length_scale: f64,
        seed: u64,
        weights: Weights,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit_freq =
            DMatrix::from_fn(features, in_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let phases =
            DVector::from_fn(features, |_, _| rng.random::<f64>() * std::f64::consts::TAU);
        Self::from_parts(unit_freq, phases, length_scale, out_dim, weights)
    }

    /// Builds a function from explicit frequencies (already in unit-length-scale
    /// form) and phases.
    pub fn from_parts(
        unit_freq: DMatrix<f64>,
        phases: DVector<f64>,
        length_scale: f64,
        out_dim: usize,
        weights: Weights,
    ) -> Self {
        assert_eq!(unit_freq.nrows(), phases.len());
        assert!(length_scale > 0.0, "length scale must be positive");
        assert_eq!(weights.len(), phases.len() * out_dim);
        Self {
            in_dim: unit_freq.ncols(),
            out_dim,
            unit_freq,
            phases,
            length_scale,
            weights,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn features(&self) -> usize {
        self.phases.len()
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    fn scale(&self) -> f64 {
        (2.0 / self.features() as f64).sqrt()
    }

    fn arguments(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.unit_freq * x) / self.length_scale + &self.phases
    }

    /// Scalar feature vector `phi(x)` of length `D`.
    pub fn phi(&self, x: &DVector<f64>) -> DVector<f64> {
        let c = self.scale();
        self.arguments(x).map(|a| c * a.cos())
    }

    /// The `(D m) x m` feature matrix `phi(x) ⊗ I_m`.
    pub fn feature_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let phi = self.phi(x);
        let m = self.out_dim;
        let mut out = DMatrix::zeros(phi.len() * m, m);
        for (i, &p) in phi.iter().enumerate() {
            for j in 0..m {
                out[(i * m + j, j)] = p;
            }
        }
        out
    }

    /// `D x in_dim` matrix of feature gradients.
    pub fn phi_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let c = self.scale() / self.length_scale;
        let args = self.arguments(x);
        let mut jac = self.unit_freq.clone();
        for (i, a) in args.iter().enumerate() {
            let s = -c * a.sin();
            jac.row_mut(i).scale_mut(s);
        }
        jac
    }

    /// Directional feature derivatives `d phi_i . w` and the gradients of
    /// those with respect to `x` (`D x in_dim`).
    pub fn phi_directional(&self, x: &DVector<f64>, w: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let l = self.length_scale;
        let c = self.scale();
        let args = self.arguments(x);
        let proj = (&self.unit_freq * w) / l;
        let dphi = DVector::from_fn(args.len(), |i, _| -c * args[i].sin() * proj[i]);
        let mut hess = self.unit_freq.clone() / l;
        for i in 0..args.len() {
            let s = -c * args[i].cos() * proj[i];
            hess.row_mut(i).scale_mut(s);
        }
        (dphi, hess)
    }

    /// `theta` viewed as a `D x m` matrix.
    pub fn weight_matrix(&self, params: &ParamVector) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.features(), self.out_dim, self.weights.get(params))
    }

    pub fn value(&self, x: &DVector<f64>, params: &ParamVector) -> DVector<f64> {
        self.weight_matrix(params).tr_mul(&self.phi(x))
    }

    pub fn jacobian(&self, x: &DVector<f64>, params: &ParamVector) -> DMatrix<f64> {
        self.weight_matrix(params).tr_mul(&self.phi_jacobian(x))
    }

    /// Adds `feat ⊗ coeff` (outer product, row-major `D x m`) to the weight gradient.
    pub(crate) fn accumulate_outer(&self, grad: &mut [f64], feat: &DVector<f64>, coeff: &DVector<f64>) {
        if let Some(g) = self.weights.grad(grad) {
            let m = self.out_dim;
            for (i, &f) in feat.iter().enumerate() {
                for j in 0..m {
                    g[i * m + j] += f * coeff[j];
                }
            }
        }
    }
}
