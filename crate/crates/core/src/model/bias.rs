use crate::basis::poly_shift;

use super::DecoupledModel;

/// Equivalent model whose layers `1..L-1` have zero constant terms.
///
/// Walking forward, the constant of every re-expanded polynomial is split off
/// as a bias `b_ℓ`, pushed through `W_ℓ`, and absorbed into the next layer by
/// re-expanding `g_{ℓ+1}^{(j)}(v + (W_ℓ b_ℓ)_j)` in powers of `v`. Degrees are
/// unchanged; the last layer keeps whatever constant accumulates.
pub fn remove_bias(model: &DecoupledModel) -> DecoupledModel {
    let l = model.n_layers();
    let mut coeffs = Vec::with_capacity(l);
    let mut shift = vec![0.0; model.ranks()[0]];
    for layer in 1..=l {
        let mut shifted: Vec<Vec<f64>> = model
            .layer_coeffs(layer)
            .iter()
            .zip(&shift)
            .map(|(c, &a)| {
                if a == 0.0 {
                    c.clone()
                } else {
                    poly_shift(c, a)
                }
            })
            .collect();
        if layer < l {
            let bias: Vec<f64> = shifted
                .iter_mut()
                .map(|c| std::mem::take(&mut c[0]))
                .collect();
            shift = model.weights()[layer].matvec(&bias);
        }
        coeffs.push(shifted);
    }
    DecoupledModel::new(model.weights().to_vec(), coeffs)
        .expect("re-expansion keeps the model shape")
}

impl DecoupledModel {
    /// Whether every layer before the last has zero constant terms.
    pub fn is_bias_free(&self) -> bool {
        self.coeffs()[..self.n_layers() - 1]
            .iter()
            .flatten()
            .all(|c| c[0] == 0.0)
    }
}
