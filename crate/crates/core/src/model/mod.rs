//! L-layer decoupled functions `f(x) = W_L g_L(W_{L-1} ⋯ g_1(W_0 x))`.
//!
//! Layer numbering follows the weight matrices: `W_0 … W_L`, with nonlinear
//! layers numbered `1..=L`. Neuron `j` of layer `ℓ` holds a monomial
//! coefficient vector `(c_0, …, c_d)`.

mod bias;
mod factors;
mod json;
mod target;

pub use bias::remove_bias;
pub use factors::{
    apply_ambiguity, pt_reconstruct, true_pt_factors, AmbiguityTransform, PTFactors,
};
pub use target::{
    build_f_matrix, build_f_matrix_with, build_jacobian_tensor, build_jacobian_tensor_with,
    FnTarget, Target,
};

use crate::basis::{poly_derivative_eval, poly_eval, BasisSpec};
use crate::error::{Error, Result};
use crate::tensor::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledModel {
    weights: Vec<Mat>,
    coeffs: Vec<Vec<Vec<f64>>>,
}

impl DecoupledModel {
    /// `weights` holds `W_0..=W_L`; `coeffs[ℓ-1][j]` is neuron `j` of layer `ℓ`.
    pub fn new(weights: Vec<Mat>, coeffs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let l = coeffs.len();
        if l == 0 {
            return Err(Error::InvalidConfig(
                "a decoupled model needs at least one layer".into(),
            ));
        }
        if weights.len() != l + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} weight matrices for {l} layers",
                weights.len()
            )));
        }
        for (li, layer) in coeffs.iter().enumerate() {
            let r = weights[li].rows();
            if layer.len() != r {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} has {} neurons but W_{li} has {r} rows",
                    li + 1,
                    layer.len()
                )));
            }
            if weights[li + 1].cols() != r {
                return Err(Error::DimensionMismatch(format!(
                    "W_{} has {} columns, expected {r}",
                    li + 1,
                    weights[li + 1].cols()
                )));
            }
            let len = layer.first().map_or(0, Vec::len);
            if len < 2 || layer.iter().any(|c| c.len() != len) {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} coefficient vectors must share a length of at least 2",
                    li + 1
                )));
            }
            if layer.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("model coefficients"));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("model weights"));
        }
        Ok(DecoupledModel { weights, coeffs })
    }

    pub fn n_layers(&self) -> usize {
        self.coeffs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.n_layers()].rows()
    }

    /// Neuron counts `(r_1, …, r_L)`.
    pub fn ranks(&self) -> Vec<usize> {
        self.coeffs.iter().map(Vec::len).collect()
    }

    /// Polynomial degrees `(d_1, …, d_L)`.
    pub fn degrees(&self) -> Vec<usize> {
        self.coeffs.iter().map(|l| l[0].len() - 1).collect()
    }

    pub fn basis(&self, layer: usize) -> BasisSpec {
        BasisSpec::monomial(self.coeffs[layer - 1][0].len() - 1).expect("degree >= 1")
    }

    pub fn weights(&self) -> &[Mat] {
        &self.weights
    }

    pub fn coeffs(&self) -> &[Vec<Vec<f64>>] {
        &self.coeffs
    }

    /// Layer `ℓ` coefficients (`ℓ` in `1..=L`).
    pub fn layer_coeffs(&self, layer: usize) -> &[Vec<f64>] {
        &self.coeffs[layer - 1]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input of length {} for a model with {} inputs",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn apply_layer(&self, layer: usize, u: &[f64]) -> Vec<f64> {
        self.coeffs[layer - 1]
            .iter()
            .zip(u)
            .map(|(c, &v)| poly_eval(c, v))
            .collect()
    }

    /// Layer inputs `u_1 = W_0 x`, `u_ℓ = W_{ℓ-1} g_{ℓ-1}(u_{ℓ-1})`.
    pub fn internal_inputs(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut us = Vec::with_capacity(self.n_layers());
        let mut u = self.weights[0].matvec(x);
        for layer in 1..=self.n_layers() {
            let next = (layer < self.n_layers())
                .then(|| self.weights[layer].matvec(&self.apply_layer(layer, &u)));
            us.push(u);
            match next {
                Some(n) => u = n,
                None => break,
            }
        }
        Ok(us)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let us = self.internal_inputs(x)?;
        let l = self.n_layers();
        let last = self.apply_layer(l, &us[l - 1]);
        Ok(self.weights[l].matvec(&last))
    }

    /// Analytic Jacobian `W_L D_L W_{L-1} ⋯ D_1 W_0` with
    /// `D_ℓ = diag(g_ℓ'(u_ℓ))`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        let us = self.internal_inputs(x)?;
        let mut acc = self.weights[0].clone();
        for layer in 1..=self.n_layers() {
            let d = self.derivatives_at(layer, &us[layer - 1]);
            acc = self.weights[layer].matmul(&acc.scale_rows(&d));
        }
        Ok(acc)
    }

    /// `(g_ℓ^{(j)})'(u_j)` for every neuron of layer `ℓ`.
    pub fn derivatives_at(&self, layer: usize, u: &[f64]) -> Vec<f64> {
        self.coeffs[layer - 1]
            .iter()
            .zip(u)
            .map(|(c, &v)| poly_derivative_eval(c, v))
            .collect()
    }

    /// Reparameterizes neuron `j` of layer `ℓ` so that its polynomial takes
    /// `α·u` where it used to take `u`: row `j` of `W_{ℓ-1}` is divided by
    /// `α` and `c_i ← c_i α^i`. The function computed is unchanged.
    pub fn rescale_neuron_input(&self, layer: usize, j: usize, alpha: f64) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidConfig(
                "rescaling factor must be finite and nonzero".into(),
            ));
        }
        if layer == 0 || layer > self.n_layers() || j >= self.coeffs[layer - 1].len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.coeffs.get(layer.wrapping_sub(1)).map_or(0, Vec::len),
            });
        }
        let mut out = self.clone();
        let w = &mut out.weights[layer - 1];
        for col in 0..w.cols() {
            w[(j, col)] /= alpha;
        }
        let mut p = 1.0;
        for c in out.coeffs[layer - 1][j].iter_mut() {
            *c *= p;
            p *= alpha;
        }
        Ok(out)
    }
}
