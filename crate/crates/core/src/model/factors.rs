use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mat, Tensor3};

use super::DecoupledModel;

/// Factor matrices of a ParaTuck-L decomposition.
///
/// `weights` holds `W_0..=W_L`; `g[ℓ-1]` is the `K × r_ℓ` matrix `G^(ℓ)` whose
/// row `k` is the diagonal of `D_ℓ^(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PTFactors {
    pub weights: Vec<Mat>,
    pub g: Vec<Mat>,
}

impl PTFactors {
    pub fn n_layers(&self) -> usize {
        self.g.len()
    }

    pub fn n_slices(&self) -> usize {
        self.g.first().map_or(0, Mat::rows)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.g.iter().map(Mat::cols).collect()
    }

    /// `(I, J, K)` of the tensor these factors reconstruct.
    pub fn tensor_dims(&self) -> (usize, usize, usize) {
        (
            self.weights[self.n_layers()].rows(),
            self.weights[0].cols(),
            self.n_slices(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.g.len();
        if l == 0 || self.weights.len() != l + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {l} G factors",
                self.weights.len()
            )));
        }
        let k = self.g[0].rows();
        for (li, g) in self.g.iter().enumerate() {
            if g.rows() != k {
                return Err(Error::DimensionMismatch(
                    "G factors differ in row count".into(),
                ));
            }
            let r = g.cols();
            if self.weights[li].rows() != r || self.weights[li + 1].cols() != r {
                return Err(Error::DimensionMismatch(format!(
                    "rank {r} of G^({}) does not chain with W_{li} {:?} and W_{} {:?}",
                    li + 1,
                    self.weights[li].shape(),
                    li + 1,
                    self.weights[li + 1].shape()
                )));
            }
        }
        Ok(())
    }

    /// Frontal slice `k` of the reconstruction.
    pub fn slice(&self, k: usize) -> Mat {
        let mut acc = self.weights[0].clone();
        for (li, g) in self.g.iter().enumerate() {
            acc = self.weights[li + 1].matmul(&acc.scale_rows(&g.row(k)));
        }
        acc
    }
}

/// Slice `k` is `W_L diag(G^(L)_k) W_{L-1} ⋯ diag(G^(1)_k) W_0`.
pub fn pt_reconstruct(f: &PTFactors) -> Result<Tensor3> {
    f.validate()?;
    let slices: Vec<Mat> = (0..f.n_slices()).map(|k| f.slice(k)).collect();
    Tensor3::from_frontal_slices(&slices)
}

/// Exact factors of a model's Jacobian tensor: the model weights and
/// `G^(ℓ)[s, j] = (g_ℓ^{(j)})'(u_{ℓ,j}^{(s)})`.
pub fn true_pt_factors(model: &DecoupledModel, points: &[Vec<f64>]) -> Result<PTFactors> {
    let l = model.n_layers();
    let ranks = model.ranks();
    let mut g: Vec<Mat> = ranks.iter().map(|&r| Mat::zeros(points.len(), r)).collect();
    for (s, x) in points.iter().enumerate() {
        let us = model.internal_inputs(x)?;
        for layer in 1..=l {
            g[layer - 1].set_row(s, &model.derivatives_at(layer, &us[layer - 1]));
        }
    }
    Ok(PTFactors {
        weights: model.weights().to_vec(),
        g,
    })
}

/// Trivial ambiguities of a PT-L decomposition. All vectors are indexed by
/// nonlinear layer `ℓ = 1..=L` (position `ℓ-1`).
///
/// A permutation `p` encodes `Π` with `(A Π)[:, j] = A[:, p[j]]`. Diagonal
/// matrices are stored as their diagonals. The slice-wise scalings `Γ^(ℓ)`
/// (length `K`) must multiply to the identity across all layers, which for
/// `L = 1` forces `Γ^(1) = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityTransform {
    pub perms: Vec<Vec<usize>>,
    pub lambda1: Vec<Vec<f64>>,
    pub lambda2: Vec<Vec<f64>>,
    pub lambda3: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
}

impl AmbiguityTransform {
    pub fn identity(ranks: &[usize], n_slices: usize) -> Self {
        AmbiguityTransform {
            perms: ranks.iter().map(|&r| (0..r).collect()).collect(),
            lambda1: ranks.iter().map(|&r| vec![1.0; r]).collect(),
            lambda2: ranks.iter().map(|&r| vec![1.0; r]).collect(),
            lambda3: ranks.iter().map(|&r| vec![1.0; r]).collect(),
            gamma: ranks.iter().map(|_| vec![1.0; n_slices]).collect(),
        }
    }

    /// Random permutations, scalings with magnitudes in `[0.5, 2]` and random
    /// signs, and (for `L ≥ 2`) nontrivial slice-wise scalings.
    pub fn random<R: Rng + ?Sized>(ranks: &[usize], n_slices: usize, rng: &mut R) -> Self {
        let scale = |rng: &mut R| {
            let mag: f64 = rng.random_range(0.5..2.0);
            if rng.random_bool(0.5) {
                -mag
            } else {
                mag
            }
        };
        let l = ranks.len();
        let mut t = Self::identity(ranks, n_slices);
        for (li, &r) in ranks.iter().enumerate() {
            let mut p: Vec<usize> = (0..r).collect();
            for i in (1..r).rev() {
                p.swap(i, rng.random_range(0..=i));
            }
            t.perms[li] = p;
            for j in 0..r {
                let a = scale(rng);
                let b = scale(rng);
                t.lambda1[li][j] = a;
                t.lambda2[li][j] = b;
                t.lambda3[li][j] = 1.0 / (a * b);
            }
        }
        for k in 0..n_slices {
            let mut prod = 1.0;
            for li in 0..l.saturating_sub(1) {
                let v = scale(rng);
                t.gamma[li][k] = v;
                prod *= v;
            }
            t.gamma[l - 1][k] = 1.0 / prod;
        }
        t
    }

    fn validate(&self, f: &PTFactors) -> Result<()> {
        let ranks = f.ranks();
        let k = f.n_slices();
        let l = ranks.len();
        let lens_ok = [&self.lambda1, &self.lambda2, &self.lambda3]
            .iter()
            .all(|v| v.len() == l && v.iter().zip(&ranks).all(|(d, &r)| d.len() == r))
            && self.perms.len() == l
            && self.gamma.len() == l
            && self.gamma.iter().all(|g| g.len() == k);
        if !lens_ok {
            return Err(Error::InvalidTransform(
                "dimensions do not match the factors".into(),
            ));
        }
        for (li, p) in self.perms.iter().enumerate() {
            let mut seen = vec![false; ranks[li]];
            for &i in p {
                if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidTransform(format!(
                        "layer {} permutation invalid",
                        li + 1
                    )));
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidTransform(format!(
                    "layer {} permutation invalid",
                    li + 1
                )));
            }
        }
        for (li, &r) in ranks.iter().enumerate().take(l) {
            for j in 0..r {
                let prod = self.lambda1[li][j] * self.lambda2[li][j] * self.lambda3[li][j];
                if (prod - 1.0).abs() > 1e-14 {
                    return Err(Error::InvalidTransform(format!(
                        "Λ1Λ2Λ3 = {prod} for layer {} neuron {j}",
                        li + 1
                    )));
                }
            }
        }
        for s in 0..k {
            let prod: f64 = self.gamma.iter().map(|g| g[s]).product();
            if (prod - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidTransform(format!(
                    "Γ product {prod} at slice {s}"
                )));
            }
        }
        Ok(())
    }
}

fn permute_cols(m: &Mat, p: &[usize]) -> Mat {
    m.select_cols(p)
}

fn permute_rows(m: &Mat, p: &[usize]) -> Mat {
    Mat::from_fn(p.len(), m.cols(), |i, j| m[(p[i], j)])
}

/// `Ŵ_ℓ = Π_{ℓ+1}ᵀ Λ1^(ℓ+1) W_ℓ Λ2^(ℓ) Π_ℓ`, `Ĝ^(ℓ) = Γ^(ℓ) G^(ℓ) Λ3^(ℓ) Π_ℓ`
/// with identities at the outer boundaries.
pub fn apply_ambiguity(f: &PTFactors, t: &AmbiguityTransform) -> Result<PTFactors> {
    f.validate()?;
    t.validate(f)?;
    let l = f.n_layers();
    let weights = (0..=l)
        .map(|wi| {
            let mut w = f.weights[wi].clone();
            if wi >= 1 {
                // right side: layer wi
                w = permute_cols(&w.scale_cols(&t.lambda2[wi - 1]), &t.perms[wi - 1]);
            }
            if wi < l {
                // left side: layer wi + 1
                w = permute_rows(&w.scale_rows(&t.lambda1[wi]), &t.perms[wi]);
            }
            w
        })
        .collect();
    let g = (0..l)
        .map(|li| {
            let scaled = f.g[li].scale_rows(&t.gamma[li]).scale_cols(&t.lambda3[li]);
            permute_cols(&scaled, &t.perms[li])
        })
        .collect();
    Ok(PTFactors { weights, g })
}
