use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamVector, Weights};

/// Which coordinate feeds a state-dependent metric: the leaf's own
/// coordinate (the latent space for latent leaves) or its parent node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpace {
    #[default]
    Latent,
    Subtask,
}

/// Initial bias of the hidden layers. Keeps pre-activations off the ReLU
/// kink when a whole layer below is inactive.
pub const HIDDEN_BIAS: f64 = 0.01;

/// Importance-weight matrix `M = L L^T` with `L` produced by a ReLU network.
///
/// A shared trunk feeds two linear heads: `l_d` (n outputs) gives the
/// diagonal through `|l_d| + epsilon` and `l_o` (n(n-1)/2 outputs) fills the
/// strictly lower triangle row by row. Positive diagonal entries make `M`
/// positive definite for every input and every weight value.
#[derive(Clone, Debug)]
pub struct CholeskyMetricNet {
    in_dim: usize,
    dim: usize,
    hidden: Vec<usize>,
    epsilon: f64,
    weights: Weights,
}

struct NetTrace {
    /// Layer inputs: `acts[0]` is the network input, `acts[k]` the k-th hidden activation.
    acts: Vec<DVector<f64>>,
    pre: Vec<DVector<f64>>,
    raw_diag: DVector<f64>,
    lower: DMatrix<f64>,
}

impl CholeskyMetricNet {
    pub fn param_count(in_dim: usize, dim: usize, hidden: &[usize]) -> usize {
        let mut prev = in_dim;
        let mut count = 0;
        for &h in hidden {
            count += h * prev + h;
            prev = h;
        }
        let off = dim * (dim - 1) / 2;
        count + (dim * prev + dim) + (off * prev + off)
    }

    /// He-initialized trunk with bias `HIDDEN_BIAS`, small heads, diagonal
    /// head bias `diag_init`.
    pub fn init_values(in_dim: usize, dim: usize, hidden: &[usize], diag_init: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(Self::param_count(in_dim, dim, hidden));
        let dense = |rng: &mut ChaCha8Rng, out: &mut Vec<f64>, n_in: usize, n_out: usize, std: f64, bias: f64| {
            for _ in 0..n_in * n_out {
                out.push(std * rng.sample::<f64, _>(StandardNormal));
            }
            out.extend(std::iter::repeat_n(bias, n_out));
        };
        let mut prev = in_dim;
        for &h in hidden {
            dense(&mut rng, &mut out, prev, h, (2.0 / prev as f64).sqrt(), HIDDEN_BIAS);
            prev = h;
        }
        let head_std = 0.1 / (prev as f64).sqrt();
        dense(&mut rng, &mut out, prev, dim, head_std, diag_init);
        dense(&mut rng, &mut out, prev, dim * (dim - 1) / 2, head_std, 0.0);
        out
    }

    pub fn new(in_dim: usize, dim: usize, hidden: Vec<usize>, epsilon: f64, weights: Weights) -> Self {
        assert!(epsilon > 0.0, "diagonal bias must be positive");
        assert_eq!(weights.len(), Self::param_count(in_dim, dim, &hidden));
        Self {
            in_dim,
            dim,
            hidden,
            epsilon,
            weights,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden.len() + 2);
        let mut prev = self.in_dim;
        for &h in &self.hidden {
            shapes.push((h, prev));
            prev = h;
        }
        shapes.push((self.dim, prev));
        shapes.push((self.dim * (self.dim - 1) / 2, prev));
        shapes
    }

    fn dense<'a>(theta: &'a [f64], offset: &mut usize, (rows, cols): (usize, usize)) -> (DMatrix<f64>, &'a [f64]) {
        let w = DMatrix::from_row_slice(rows, cols, &theta[*offset..*offset + rows * cols]);
        *offset += rows * cols;
        let b = &theta[*offset..*offset + rows];
        *offset += rows;
        (w, b)
    }

    /// Assembles `L` from raw head outputs.
    pub fn assemble(raw_diag: &DVector<f64>, raw_off: &DVector<f64>, epsilon: f64) -> DMatrix<f64> {
        let n = raw_diag.len();
        let mut l = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            l[(i, i)] = raw_diag[i].abs() + epsilon;
            for j in 0..i {
                l[(i, j)] = raw_off[k];
                k += 1;
            }
        }
        l
    }

    fn trace(&self, x: &DVector<f64>, params: &ParamVector) -> NetTrace {
        let theta = self.weights.get(params);
        let shapes = self.layer_shapes();
        let mut offset = 0;
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.hidden.len());
        for &shape in &shapes[..self.hidden.len()] {
            let (w, b) = Self::dense(theta, &mut offset, shape);
            let z = w * acts.last().unwrap() + DVector::from_column_slice(b);
            acts.push(z.map(|v| v.max(0.0)));
            pre.push(z);
        }
        let h = acts.last().unwrap();
        let (wd, bd) = Self::dense(theta, &mut offset, shapes[self.hidden.len()]);
        let (wo, bo) = Self::dense(theta, &mut offset, shapes[self.hidden.len() + 1]);
        let raw_diag = wd * h + DVector::from_column_slice(bd);
        let raw_off = wo * h + DVector::from_column_slice(bo);
        let lower = Self::assemble(&raw_diag, &raw_off, self.epsilon);
        NetTrace {
            acts,
            pre,
            raw_diag,
            lower,
        }
    }

    /// Returns `(L, M)`.
    pub fn factor(&self, x: &DVector<f64>, params: &ParamVector) -> (DMatrix<f64>, DMatrix<f64>) {
        let l = self.trace(x, params).lower;
        let m = &l * l.transpose();
        (l, m)
    }

    /// Given `G`, returns `grad_x <G, M(x)>` and adds the weight gradient.
    pub fn backprop(&self, x: &DVector<f64>, g: &DMatrix<f64>, params: &ParamVector, grad: &mut [f64]) -> DVector<f64> {
        let tr = self.trace(x, params);
        let n = self.dim;
        let l_bar = (g + g.transpose()) * &tr.lower;
        let raw_diag_bar = DVector::from_fn(n, |i, _| l_bar[(i, i)] * sign(tr.raw_diag[i]));
        let mut raw_off_bar = DVector::zeros(n * (n - 1) / 2);
        let mut k = 0;
        for i in 0..n {
            for j in 0..i {
                raw_off_bar[k] = l_bar[(i, j)];
                k += 1;
            }
        }

        let theta = self.weights.get(params);
        let shapes = self.layer_shapes();
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut off = 0;
        for &(r, c) in &shapes {
            offsets.push(off);
            off += r * c + r;
        }
        let mut g_theta = self.weights.grad(grad);
        let mut add_dense = |layer: usize, bar: &DVector<f64>, input: &DVector<f64>| {
            if let Some(gt) = g_theta.as_deref_mut() {
                let (r, c) = shapes[layer];
                let base = offsets[layer];
                for i in 0..r {
                    for j in 0..c {
                        gt[base + i * c + j] += bar[i] * input[j];
                    }
                    gt[base + r * c + i] += bar[i];
                }
            }
        };
        let weight = |layer: usize| {
            let (r, c) = shapes[layer];
            DMatrix::from_row_slice(r, c, &theta[offsets[layer]..offsets[layer] + r * c])
        };

        let nh = self.hidden.len();
        let h = &tr.acts[nh];
        add_dense(nh, &raw_diag_bar, h);
        add_dense(nh + 1, &raw_off_bar, h);
        let mut a_bar = weight(nh).tr_mul(&raw_diag_bar) + weight(nh + 1).tr_mul(&raw_off_bar);
        for layer in (0..nh).rev() {
            let z_bar = a_bar.zip_map(&tr.pre[layer], |ab, z| if z > 0.0 { ab } else { 0.0 });
            add_dense(layer, &z_bar, &tr.acts[layer]);
            a_bar = weight(layer).tr_mul(&z_bar);
        }
        a_bar
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub enum Metric {
    Constant(DMatrix<f64>),
    Cholesky(CholeskyMetricNet),
    /// `1 + gain * (max(0, margin - z) / z)^2` on a 1-D distance coordinate.
    BarrierWeight { margin: f64, gain: f64 },
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        Metric::Constant(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Metric::Constant(DMatrix::from_diagonal_element(n, n, c))
    }

    /// Output dimension when fixed by construction.
    pub fn dim(&self) -> usize {
        match self {
            Metric::Constant(m) => m.nrows(),
            Metric::Cholesky(net) => net.dim(),
            Metric::BarrierWeight { .. } => 1,
        }
    }

    /// Expected input dimension, when the metric reads its input.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Metric::Constant(_) => None,
            Metric::Cholesky(net) => Some(net.in_dim()),
            Metric::BarrierWeight { .. } => Some(1),
        }
    }

    pub fn is_learnable(&self) -> bool {
        matches!(self, Metric::Cholesky(net) if net.weights().is_learnable())
    }

    pub fn eval(&self, x: &DVector<f64>, params: &ParamVector) -> Result<DMatrix<f64>> {
        match self {
            Metric::Constant(m) => Ok(m.clone()),
            Metric::Cholesky(net) => Ok(net.factor(x, params).1),
            Metric::BarrierWeight { margin, gain } => {
                let z = barrier_coordinate(x)?;
                let r = (margin - z).max(0.0) / z;
                Ok(DMatrix::from_element(1, 1, 1.0 + gain * r * r))
            }
        }
    }

    /// `grad_x <G, M(x)>`; learnable weights receive their gradient in `grad`.
    pub fn backprop(&self, x: &DVector<f64>, g: &DMatrix<f64>, params: &ParamVector, grad: &mut [f64]) -> Result<DVector<f64>> {
        match self {
            Metric::Constant(_) => Ok(DVector::zeros(x.len())),
            Metric::Cholesky(net) => Ok(net.backprop(x, g, params, grad)),
            Metric::BarrierWeight { margin, gain } => {
                let z = barrier_coordinate(x)?;
                let d = if z < *margin {
                    // d/dz (margin/z - 1)^2 = -2 (margin/z - 1) margin / z^2
                    -2.0 * gain * (margin / z - 1.0) * margin / (z * z)
                } else {
                    0.0
                };
                Ok(DVector::from_element(1, g[(0, 0)] * d))
            }
        }
    }
}

pub(crate) fn barrier_coordinate(x: &DVector<f64>) -> Result<f64> {
    let z = x[0];
    if z <= 0.0 {
        return Err(Error::Domain {
            leaf: String::new(),
            msg: format!("barrier evaluated at distance {z}"),
        });
    }
    Ok(z)
}
