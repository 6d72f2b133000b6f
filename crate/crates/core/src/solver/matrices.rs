//! Coefficient matrices that turn each block update into a linear
//! least-squares problem.
//!
//! With `below(ℓ, s) = W_{ℓ-1} D_{ℓ-1}^(s) ⋯ D_1^(s) W_0` and
//! `above(ℓ, s) = W_L D_L^(s) ⋯ D_{ℓ+1}^(s) W_ℓ`, every slice factors as
//! `J_s = above(ℓ, s) · D_ℓ^(s) · below(ℓ, s)`.

use crate::basis::{build_per_slice_x, BasisSpec};
use crate::error::{Error, Result};
use crate::model::PTFactors;
use crate::par::Execution;
use crate::tensor::{khatri_rao, Mat};

/// `W_{ℓ-1} D_{ℓ-1} ⋯ D_1 W_0` (`r_ℓ × m`); `below(1) = W_0`.
pub fn below(f: &PTFactors, layer: usize, s: usize) -> Mat {
    let mut acc = f.weights[0].clone();
    for k in 1..layer {
        acc = f.weights[k].matmul(&acc.scale_rows(&f.g[k - 1].row(s)));
    }
    acc
}

/// `W_L D_L ⋯ D_{ℓ+1} W_ℓ` (`n × r_ℓ`); `above(L) = W_L`.
pub fn above(f: &PTFactors, layer: usize, s: usize) -> Mat {
    let l = f.n_layers();
    let mut acc = f.weights[l].clone();
    for k in (layer + 1..=l).rev() {
        acc = acc.scale_cols(&f.g[k - 1].row(s)).matmul(&f.weights[k - 1]);
    }
    acc
}

fn check_layer(f: &PTFactors, layer: usize, lo: usize) -> Result<()> {
    f.validate()?;
    if layer < lo || layer > f.n_layers() {
        return Err(Error::IndexOutOfRange {
            index: layer,
            len: f.n_layers() + 1,
        });
    }
    Ok(())
}

/// Design matrix of the `W_layer` subproblem.
///
/// * `layer = 0`: `nS × r_1`, `unfold₂(J)ᵀ ≈ M · W_0`
/// * `layer = L`: `r_L × mS`, `unfold₁(J) ≈ W_L · M`
/// * otherwise: `nmS × r_{ℓ+1} r_ℓ`, `vec(J) ≈ M · vec(W_ℓ)`
///
/// For `L = 1` the first two cases apply to `W_0` and `W_1`.
pub fn build_mw(f: &PTFactors, layer: usize, exec: Execution) -> Result<Mat> {
    check_layer(f, layer, 0)?;
    let l = f.n_layers();
    let k = f.n_slices();
    if layer == 0 {
        let blocks = exec.map(k, |s| above(f, 1, s).scale_cols(&f.g[0].row(s)));
        Mat::vstack(&blocks)
    } else if layer == l {
        let blocks = exec.map(k, |s| below(f, l, s).scale_rows(&f.g[l - 1].row(s)));
        Mat::hstack(&blocks)
    } else {
        // vec(A W B) = (Bᵀ ⊗ A) vec(W), A = above(ℓ+1) D_{ℓ+1}, B = D_ℓ below(ℓ)
        let blocks = exec.map(k, |s| {
            let a = above(f, layer + 1, s).scale_cols(&f.g[layer].row(s));
            let b = below(f, layer, s).scale_rows(&f.g[layer - 1].row(s));
            crate::tensor::kron(&b.transpose(), &a)
        });
        Mat::vstack(&blocks)
    }
}

/// `M_G^(ℓ,s) = below(ℓ, s)ᵀ ⊙ above(ℓ, s)` (`nm × r_ℓ`), so that
/// `vec(J_s) = M_G · G^(ℓ)_{s,:}ᵀ`.
pub fn build_mg(f: &PTFactors, layer: usize, s: usize) -> Result<Mat> {
    check_layer(f, layer, 1)?;
    if s >= f.n_slices() {
        return Err(Error::IndexOutOfRange {
            index: s,
            len: f.n_slices(),
        });
    }
    khatri_rao(&below(f, layer, s).transpose(), &above(f, layer, s))
}

/// Coefficients of layer `ℓ` that the coupled objective can identify, as
/// `(neuron, power)` pairs in solve order. Constant terms before the last layer
/// multiply an all-zero derivative column and are left out.
pub fn free_coefficients(
    layer: usize,
    n_layers: usize,
    rank: usize,
    degree: usize,
) -> Vec<(usize, usize)> {
    let first = if layer == n_layers { 0 } else { 1 };
    (0..rank)
        .flat_map(|j| (first..=degree).map(move |k| (j, k)))
        .collect()
}

/// Pruned coefficient design matrix `(M_C^(ℓ))₀` (`nmS × |free|`).
///
/// Slice `s` contributes `F_Riᵀ ⊗ F_Le` with `F_Le = above(ℓ, s) · X_ℓ^(s)` and
/// `F_Ri = below(ℓ, s)`, restricted to the columns of `vec(C_ℓ)` that hold a
/// free coefficient (see [`free_coefficients`]). `u` holds the current layer
/// inputs, one row per slice.
pub fn build_mc(
    f: &PTFactors,
    layer: usize,
    u: &Mat,
    basis: &BasisSpec,
    exec: Execution,
) -> Result<Mat> {
    check_layer(f, layer, 1)?;
    let r = f.g[layer - 1].cols();
    if u.shape() != (f.n_slices(), r) {
        return Err(Error::DimensionMismatch(format!(
            "layer inputs {:?}, expected {:?}",
            u.shape(),
            (f.n_slices(), r)
        )));
    }
    let w = basis.n_coeffs();
    let free = free_coefficients(layer, f.n_layers(), r, basis.degree);
    let blocks = exec.try_map(f.n_slices(), |s| -> Result<Mat> {
        let f_le = above(f, layer, s).matmul(&build_per_slice_x(&u.row(s), basis)?);
        let f_ri = below(f, layer, s);
        let (n, m) = (f_le.rows(), f_ri.cols());
        let mut out = Mat::zeros(n * m, free.len());
        for (col, &(j, k)) in free.iter().enumerate() {
            // column (j(d+1)+k) + r(d+1)·j of F_Riᵀ ⊗ F_Le
            let le = f_le.col(j * w + k);
            let dst = out.col_mut(col);
            for b in 0..m {
                let scale = f_ri[(j, b)];
                for (d, &v) in dst[b * n..(b + 1) * n].iter_mut().zip(le) {
                    *d = scale * v;
                }
            }
        }
        Ok(out)
    })?;
    Mat::vstack(&blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::coefficient_block;
    use crate::model::pt_reconstruct;
    use crate::tensor::{kron, vec, Tensor3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factors(seed: u64, n: usize, m: usize, ranks: &[usize], k: usize) -> PTFactors {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |r: usize, c: usize| Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let l = ranks.len();
        let mut weights = vec![mat(ranks[0], m)];
        for li in 1..l {
            weights.push(mat(ranks[li], ranks[li - 1]));
        }
        weights.push(mat(n, ranks[l - 1]));
        let g = ranks.iter().map(|&r| mat(k, r)).collect();
        PTFactors { weights, g }
    }

    fn unfold2t(j: &Tensor3) -> Mat {
        j.unfold(2).unwrap().transpose()
    }

    #[test]
    fn mw0_for_linear_single_layer_is_stacked_w1() {
        let mut f = random_factors(1, 3, 2, &[2], 4);
        f.g[0] = Mat::filled(4, 2, 1.0);
        let m = build_mw(&f, 0, Execution::Sequential).unwrap();
        let want = Mat::vstack(&vec![f.weights[1].clone(); 4]).unwrap();
        assert_eq!(m, want);
        let j = pt_reconstruct(&f).unwrap();
        let w0 = crate::tensor::lstsq(&m, &unfold2t(&j)).unwrap().x;
        assert!(w0.sub(&f.weights[0]).fro_norm() < 1e-12);
    }

    #[test]
    fn mw_identities() {
        for ranks in [vec![3], vec![2, 3], vec![3, 2, 2]] {
            let f = random_factors(2, 3, 4, &ranks, 5);
            let j = pt_reconstruct(&f).unwrap();
            let l = ranks.len();
            let tol = 1e-12 * j.fro_norm();
            let m0 = build_mw(&f, 0, Execution::Sequential).unwrap();
            assert!(unfold2t(&j).sub(&m0.matmul(&f.weights[0])).fro_norm() < tol);
            let ml = build_mw(&f, l, Execution::Sequential).unwrap();
            assert!(
                j.unfold(1)
                    .unwrap()
                    .sub(&f.weights[l].matmul(&ml))
                    .fro_norm()
                    < tol
            );
            for layer in 1..l {
                let m = build_mw(&f, layer, Execution::Sequential).unwrap();
                let r = m.matvec(&vec(&f.weights[layer]));
                let diff: f64 = r
                    .iter()
                    .zip(j.as_slice())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                assert!(diff.sqrt() < tol);
            }
        }
    }

    #[test]
    fn mg_identity_and_cpd_case() {
        let f = random_factors(3, 3, 2, &[4, 3], 6);
        let j = pt_reconstruct(&f).unwrap();
        for layer in 1..=2 {
            for s in 0..6 {
                let m = build_mg(&f, layer, s).unwrap();
                assert_eq!(m.cols(), f.g[layer - 1].cols());
                let r = m.matvec(&f.g[layer - 1].row(s));
                let want = j.frontal_slice_data(s);
                assert!(r.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
        let f = random_factors(4, 2, 3, &[2], 3);
        let m = build_mg(&f, 1, 0).unwrap();
        assert_eq!(
            m,
            khatri_rao(&f.weights[0].transpose(), &f.weights[1]).unwrap()
        );
        assert!(build_mg(&f, 2, 0).is_err());
        assert!(build_mg(&f, 1, 3).is_err());
    }

    #[test]
    fn pruned_mc_matches_literal_kron() {
        let f = random_factors(5, 2, 3, &[2, 3], 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = Mat::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let basis = BasisSpec::monomial(3).unwrap();
        let mc = build_mc(&f, 1, &u, &basis, Execution::Sequential).unwrap();
        assert_eq!(mc.cols(), 2 * 3);
        let free = free_coefficients(1, 2, 2, 3);
        let rows: Vec<Mat> = (0..4)
            .map(|s| {
                let le = above(&f, 1, s).matmul(&build_per_slice_x(&u.row(s), &basis).unwrap());
                kron(&below(&f, 1, s).transpose(), &le)
            })
            .collect();
        let full = Mat::vstack(&rows).unwrap();
        let cols: Vec<usize> = free.iter().map(|&(j, k)| (j * 4 + k) + 2 * 4 * j).collect();
        assert_eq!(mc, full.select_cols(&cols));
        let last = build_mc(&f, 2, &Mat::zeros(4, 3), &basis, Execution::Sequential).unwrap();
        assert_eq!(last.cols(), 3 * 4);
    }

    #[test]
    fn mc_identity_with_constrained_g() {
        let mut f = random_factors(6, 3, 2, &[2, 2], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let basis = BasisSpec::monomial(3).unwrap();
        let u = Mat::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let coeffs: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let cb = coefficient_block(&coeffs);
        for layer in 1..=2 {
            let mut g = Mat::zeros(5, 2);
            for s in 0..5 {
                let d = build_per_slice_x(&u.row(s), &basis).unwrap().matmul(&cb);
                g.set_row(s, &[d[(0, 0)], d[(1, 1)]]);
            }
            f.g[layer - 1] = g;
            let j = pt_reconstruct(&f).unwrap();
            let mc = build_mc(&f, layer, &u, &basis, Execution::Sequential).unwrap();
            let c: Vec<f64> = free_coefficients(layer, 2, 2, 3)
                .iter()
                .map(|&(jj, k)| coeffs[jj][k])
                .collect();
            let r = mc.matvec(&c);
            let diff: f64 = r
                .iter()
                .zip(j.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            assert!(diff.sqrt() < 1e-10 * j.fro_norm());
        }
    }

    #[test]
    fn execution_modes_agree() {
        let f = random_factors(7, 3, 3, &[3, 2, 2], 8);
        for layer in 0..=3 {
            assert_eq!(
                build_mw(&f, layer, Execution::Sequential).unwrap(),
                build_mw(&f, layer, Execution::Parallel).unwrap()
            );
        }
    }
}
