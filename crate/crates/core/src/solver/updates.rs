//! Block updates. Each returns the number of singular values truncated in its
//! least-squares solves.
//!
//! A coefficient is solved for only when it affects the objective: constants
//! before the last layer never do, and the last-layer constants only through
//! the `λ`-weighted `F` term. Coefficients left out keep their current value.

use crate::basis::{build_x, build_y};
use crate::error::Result;
use crate::tensor::{lstsq, unvec, Mat, Tensor3};

use super::matrices::{build_mc, build_mg, build_mw, free_coefficients};
use super::{layer_inputs, SolverConfig, SolverState, Strategy};

/// Least-squares update of `W_layer` with everything else fixed. For the last
/// layer the `F ≈ W_L Rᵀ` block is stacked under the tensor block with weight
/// `√λ`.
pub fn update_w(
    cfg: &SolverConfig,
    state: &mut SolverState,
    layer: usize,
    j: &Tensor3,
    f: &Mat,
) -> Result<usize> {
    let l = state.n_layers();
    let m = build_mw(&state.factors, layer, cfg.execution)?;
    if layer == 0 {
        let sol = lstsq(&m, &j.unfold(2)?.transpose())?;
        state.factors.weights[0] = sol.x;
        Ok(sol.truncated)
    } else if layer == l {
        let (mut a, mut b) = (m.transpose(), j.unfold(1)?.transpose());
        if cfg.lambda > 0.0 {
            let w = cfg.lambda.sqrt();
            a = Mat::vstack(&[a, state.r.scaled(w)])?;
            b = Mat::vstack(&[b, f.transpose().scaled(w)])?;
        }
        let sol = lstsq(&a, &b)?;
        state.factors.weights[l] = sol.x.transpose();
        Ok(sol.truncated)
    } else {
        let sol = lstsq(&m, &Mat::column(j.as_slice()))?;
        let shape = state.factors.weights[layer].shape();
        state.factors.weights[layer] = unvec(sol.x.as_slice(), shape.0, shape.1)?;
        Ok(sol.truncated)
    }
}

pub fn update_c(
    cfg: &SolverConfig,
    state: &mut SolverState,
    layer: usize,
    j: &Tensor3,
    f: &Mat,
    points: &[Vec<f64>],
) -> Result<usize> {
    match cfg.strategy {
        Strategy::Proj => update_c_proj(cfg, state, layer, j, f, points),
        Strategy::Constr => update_c_constr(cfg, state, layer, j, f, points),
    }
}

fn solved_coefficients(
    cfg: &SolverConfig,
    layer: usize,
    l: usize,
    r: usize,
    d: usize,
) -> Vec<(usize, usize)> {
    let mut free = free_coefficients(layer, l, r, d);
    if layer == l && cfg.lambda == 0.0 {
        free.retain(|&(_, k)| k > 0);
    }
    free
}

/// Writes `G^(ℓ) = X_ℓ c_ℓ` (and `R = Y_L c_L` for the last layer) from the
/// current coefficients and layer inputs.
pub(super) fn apply_constraints(
    cfg: &SolverConfig,
    state: &mut SolverState,
    layer: usize,
    u: &Mat,
) -> Result<()> {
    let basis = cfg.basis(layer);
    let coeffs = &state.coeffs[layer - 1];
    state.factors.g[layer - 1] = build_x(u, &basis)?.apply(coeffs);
    if layer == state.n_layers() {
        state.r = build_y(u, &basis)?.apply(coeffs);
    }
    Ok(())
}

/// Free update of `G^(ℓ)` rows (and `R`), then projection onto the
/// constraint set by fitting `c_ℓ` and rewriting `G^(ℓ)` (and `R`) from it.
pub fn update_c_proj(
    cfg: &SolverConfig,
    state: &mut SolverState,
    layer: usize,
    j: &Tensor3,
    f: &Mat,
    points: &[Vec<f64>],
) -> Result<usize> {
    let l = state.n_layers();
    let mut truncated = 0;

    let rows = cfg.execution.try_map(state.factors.n_slices(), |s| {
        let mg = build_mg(&state.factors, layer, s)?;
        lstsq(&mg, &Mat::column(j.frontal_slice_data(s)))
    })?;
    let g = &mut state.factors.g[layer - 1];
    for (s, sol) in rows.into_iter().enumerate() {
        g.set_row(s, sol.x.as_slice());
        truncated += sol.truncated;
    }
    if layer == l {
        let sol = lstsq(&state.factors.weights[l], f)?;
        state.r = sol.x.transpose();
        truncated += sol.truncated;
    }

    let u = layer_inputs(&state.model()?, points)?.swap_remove(layer - 1);
    let basis = cfg.basis(layer);
    let x = build_x(&u, &basis)?;
    let y = (layer == l).then(|| build_y(&u, &basis)).transpose()?;
    let free = solved_coefficients(cfg, layer, l, u.cols(), basis.degree);
    let w = cfg.lambda.sqrt();
    for jn in 0..u.cols() {
        let ks: Vec<usize> = free
            .iter()
            .filter(|&&(a, _)| a == jn)
            .map(|&(_, k)| k)
            .collect();
        let mut a = x.blocks[jn].select_cols(&ks);
        let mut b = Mat::column(state.factors.g[layer - 1].col(jn));
        if let (Some(y), true) = (&y, cfg.lambda > 0.0) {
            a = Mat::vstack(&[a, y.blocks[jn].select_cols(&ks).scaled(w)])?;
            b = Mat::vstack(&[b, Mat::column(state.r.col(jn)).scaled(w)])?;
        }
        let sol = lstsq(&a, &b)?;
        truncated += sol.truncated;
        for (&k, &v) in ks.iter().zip(sol.x.as_slice()) {
            state.coeffs[layer - 1][jn][k] = v;
        }
    }
    apply_constraints(cfg, state, layer, &u)?;
    Ok(truncated)
}

/// Direct least-squares update of `c_ℓ` through the pruned coefficient design
/// matrix, then `G^(ℓ)` (and `R`) rewritten from it. The last layer adds the
/// `√λ`-weighted block `(W_L ⊗ I_S) Y_L c_L ≈ vec(Fᵀ)`.
pub fn update_c_constr(
    cfg: &SolverConfig,
    state: &mut SolverState,
    layer: usize,
    j: &Tensor3,
    f: &Mat,
    points: &[Vec<f64>],
) -> Result<usize> {
    let l = state.n_layers();
    let u = layer_inputs(&state.model()?, points)?.swap_remove(layer - 1);
    let basis = cfg.basis(layer);
    let (r, d) = (u.cols(), basis.degree);

    let all = free_coefficients(layer, l, r, d);
    let free = solved_coefficients(cfg, layer, l, r, d);
    let mut a = build_mc(&state.factors, layer, &u, &basis, cfg.execution)?;
    if free.len() != all.len() {
        let keep: Vec<usize> = (0..all.len()).filter(|&i| free.contains(&all[i])).collect();
        a = a.select_cols(&keep);
    }
    let mut b = Mat::column(j.as_slice());

    if layer == l && cfg.lambda > 0.0 {
        let w_l = &state.factors.weights[l];
        let y = build_y(&u, &basis)?;
        let (n, k) = (w_l.rows(), u.rows());
        let w = cfg.lambda.sqrt();
        let mut block = Mat::zeros(n * k, free.len());
        for (col, &(jn, p)) in free.iter().enumerate() {
            let ycol = y.blocks[jn].col(p);
            let dst = block.col_mut(col);
            for i in 0..n {
                let s = w * w_l[(i, jn)];
                for (dv, &v) in dst[i * k..(i + 1) * k].iter_mut().zip(ycol) {
                    *dv = s * v;
                }
            }
        }
        a = Mat::vstack(&[a, block])?;
        b = Mat::vstack(&[b, Mat::column(f.transpose().as_slice()).scaled(w)])?;
    }

    let sol = lstsq(&a, &b)?;
    for (&(jn, k), &v) in free.iter().zip(sol.x.as_slice()) {
        state.coeffs[layer - 1][jn][k] = v;
    }
    apply_constraints(cfg, state, layer, &u)?;
    Ok(sol.truncated)
}
