//! Monomial basis and the structure matrices that tie `G`/`R` factors to
//! polynomial coefficients.
//!
//! A coefficient vector for a neuron of degree `d` is always stored with its
//! constant term first: `(c_0, c_1, …, c_d)`. The derivative structure matrices
//! keep the constant column (all zeros) so that every layer shares the same
//! coefficient layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Monomial,
}

/// Basis `φ_i(u) = u^i`, `i = 1..=degree`, plus the implicit constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub degree: usize,
}

impl BasisSpec {
    pub fn monomial(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidConfig(
                "basis degree must be at least 1".into(),
            ));
        }
        Ok(BasisSpec {
            kind: BasisKind::Monomial,
            degree,
        })
    }

    /// Coefficient count including the constant.
    pub fn n_coeffs(&self) -> usize {
        self.degree + 1
    }

    /// `(1, u, u², …, u^d)`
    pub fn values(&self, u: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.degree + 1);
        let mut p = 1.0;
        for _ in 0..=self.degree {
            out.push(p);
            p *= u;
        }
        out
    }

    /// `(0, 1, 2u, …, d·u^{d-1})`
    pub fn derivatives(&self, u: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.degree + 1);
        out.push(0.0);
        let mut p = 1.0;
        for i in 1..=self.degree {
            out.push(i as f64 * p);
            p *= u;
        }
        out
    }
}

/// Horner evaluation of `Σ c_i u^i`.
pub fn poly_eval(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * u + ci)
}

/// Coefficients of the derivative polynomial.
pub fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &ci)| i as f64 * ci)
        .collect()
}

/// Horner evaluation of the derivative without materializing its coefficients.
pub fn poly_derivative_eval(c: &[f64], u: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &ci)| acc * u + i as f64 * ci)
}

/// Coefficients of `p(v + a)` by binomial expansion of each monomial.
pub fn poly_shift(c: &[f64], a: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    for (i, &ci) in c.iter().enumerate() {
        if ci == 0.0 {
            continue;
        }
        // (v + a)^i = Σ_k binom(i, k) a^{i-k} v^k
        let mut binom = 1.0;
        for k in (0..=i).rev() {
            // binom tracks C(i, i - k') while walking k downwards from i.
            out[k] += ci * binom * a.powi((i - k) as i32);
            if k > 0 {
                binom = binom * k as f64 / (i - k + 1) as f64;
            }
        }
    }
    out
}

fn check_finite(u: &Mat) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("basis inputs"))
    }
}

/// Per-neuron blocks plus their block-diagonal stack.
#[derive(Debug, Clone)]
pub struct StackedBlocks {
    /// One `S × (d+1)` matrix per neuron.
    pub blocks: Vec<Mat>,
}

impl StackedBlocks {
    /// Block-diagonal `S·r × r·(d+1)` matrix in neuron order.
    pub fn stacked(&self) -> Mat {
        Mat::block_diag(&self.blocks)
    }

    /// Applies each block to the matching coefficient vector, giving the
    /// `S × r` factor whose column `j` is `blocks[j] · coeffs[j]`.
    pub fn apply(&self, coeffs: &[Vec<f64>]) -> Mat {
        assert_eq!(coeffs.len(), self.blocks.len());
        let s = self.blocks.first().map_or(0, Mat::rows);
        let mut out = Mat::zeros(s, self.blocks.len());
        for (j, (b, c)) in self.blocks.iter().zip(coeffs).enumerate() {
            out.set_col(j, &b.matvec(c));
        }
        out
    }
}

/// Derivative structure `X_ℓ^j` for each neuron: row `s` is
/// `(0, φ'_1(u_sj), …, φ'_d(u_sj))`. `u` is `S × r` (row per sample).
pub fn build_x(u: &Mat, basis: &BasisSpec) -> Result<StackedBlocks> {
    check_finite(u)?;
    let blocks = (0..u.cols())
        .map(|j| {
            let mut x = Mat::zeros(u.rows(), basis.n_coeffs());
            for s in 0..u.rows() {
                x.set_row(s, &basis.derivatives(u[(s, j)]));
            }
            x
        })
        .collect();
    Ok(StackedBlocks { blocks })
}

/// Value structure `Y_L^j`: row `s` is `(1, φ_1(u_sj), …, φ_d(u_sj))`.
pub fn build_y(u: &Mat, basis: &BasisSpec) -> Result<StackedBlocks> {
    check_finite(u)?;
    let blocks = (0..u.cols())
        .map(|j| {
            let mut y = Mat::zeros(u.rows(), basis.n_coeffs());
            for s in 0..u.rows() {
                y.set_row(s, &basis.values(u[(s, j)]));
            }
            y
        })
        .collect();
    Ok(StackedBlocks { blocks })
}

/// Per-sample block `X_ℓ^(s)` (`r × r(d+1)`): row `j` holds the derivative
/// row of neuron `j` in column block `j`, so that `X_ℓ^(s) · C_ℓ = D_ℓ^(s)`.
pub fn build_per_slice_x(u_s: &[f64], basis: &BasisSpec) -> Result<Mat> {
    if u_s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("basis inputs"));
    }
    let r = u_s.len();
    let w = basis.n_coeffs();
    let mut x = Mat::zeros(r, r * w);
    for (j, &u) in u_s.iter().enumerate() {
        for (k, v) in basis.derivatives(u).into_iter().enumerate() {
            x[(j, j * w + k)] = v;
        }
    }
    Ok(x)
}

/// Block-diagonal coefficient matrix `C_ℓ` (`r(d+1) × r`) with column `j`
/// holding `c^j` in rows `j(d+1)..(j+1)(d+1)`.
pub fn coefficient_block(coeffs: &[Vec<f64>]) -> Mat {
    let blocks: Vec<Mat> = coeffs.iter().map(|c| Mat::column(c)).collect();
    Mat::block_diag(&blocks)
}
