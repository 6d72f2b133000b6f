#![allow(dead_code)]

use mldecouple::model::remove_bias;
use mldecouple::tensor::Mat;
use mldecouple::DecoupledModel;
use rand::Rng;

pub fn random_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize, half: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-half..half))
}

/// Random model with dims `[m, ranks.., n]`; bias-free when `bias_free`.
pub fn random_model<R: Rng>(
    rng: &mut R,
    m: usize,
    n: usize,
    ranks: &[usize],
    degrees: &[usize],
    bias_free: bool,
) -> DecoupledModel {
    let mut dims = vec![m];
    dims.extend_from_slice(ranks);
    dims.push(n);
    let weights = (0..=ranks.len())
        .map(|i| random_mat(rng, dims[i + 1], dims[i], 1.5))
        .collect();
    let coeffs = ranks
        .iter()
        .zip(degrees)
        .map(|(&r, &d)| {
            (0..r)
                .map(|_| (0..=d).map(|_| rng.random_range(-1.5..1.5)).collect())
                .collect()
        })
        .collect();
    let model = DecoupledModel::new(weights, coeffs).unwrap();
    if bias_free {
        remove_bias(&model)
    } else {
        model
    }
}

/// Random shape with `layers` layers, all dims in `1..=max_dim` and degrees in
/// `1..=max_degree`.
pub fn random_shape<R: Rng>(
    rng: &mut R,
    layers: usize,
    max_dim: usize,
    max_degree: usize,
) -> (usize, usize, Vec<usize>, Vec<usize>) {
    let m = rng.random_range(1..=max_dim);
    let n = rng.random_range(1..=max_dim);
    let ranks = (0..layers).map(|_| rng.random_range(1..=max_dim)).collect();
    let degrees = (0..layers)
        .map(|_| rng.random_range(1..=max_degree))
        .collect();
    (m, n, ranks, degrees)
}

pub fn points<R: Rng>(rng: &mut R, m: usize, s: usize) -> Vec<Vec<f64>> {
    (0..s)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Central-difference Jacobian with step `h`.
pub fn fd_jacobian(model: &DecoupledModel, x: &[f64], h: f64) -> Mat {
    let (n, m) = (model.output_dim(), model.input_dim());
    let mut jac = Mat::zeros(n, m);
    for j in 0..m {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (model.eval(&xp).unwrap(), model.eval(&xm).unwrap());
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        a / b
    }
}

/// `‖|f|(|x|)‖`, with every weight and coefficient replaced by its absolute
/// value. Bounds the size of every term summed while evaluating `f(x)`.
pub fn eval_magnitude(model: &DecoupledModel, x: &[f64]) -> f64 {
    let weights = model
        .weights()
        .iter()
        .map(|w| Mat::from_fn(w.rows(), w.cols(), |i, j| w[(i, j)].abs()))
        .collect();
    let coeffs = model
        .coeffs()
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|c| c.iter().map(|v| v.abs()).collect())
                .collect()
        })
        .collect();
    let abs_x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let y = DecoupledModel::new(weights, coeffs)
        .unwrap()
        .eval(&abs_x)
        .unwrap();
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}
