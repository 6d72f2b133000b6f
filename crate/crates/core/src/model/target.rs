use crate::error::{Error, Result};
use crate::par::Execution;
use crate::tensor::{Mat, Tensor3};

use super::DecoupledModel;

/// A function to decouple: anything that can report its value and Jacobian.
pub trait Target: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, x: &[f64]) -> Result<Mat>;
}

impl Target for DecoupledModel {
    fn input_dim(&self) -> usize {
        DecoupledModel::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        DecoupledModel::output_dim(self)
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        DecoupledModel::eval(self, x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        DecoupledModel::jacobian(self, x)
    }
}

/// Black-box target from a caller-supplied `(eval, jacobian)` pair.
pub struct FnTarget<E, J> {
    pub input_dim: usize,
    pub output_dim: usize,
    pub eval: E,
    pub jacobian: J,
}

impl<E, J> Target for FnTarget<E, J>
where
    E: Fn(&[f64]) -> Vec<f64> + Sync,
    J: Fn(&[f64]) -> Mat + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.eval)(x))
    }

    fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        Ok((self.jacobian)(x))
    }
}

fn check_points<T: Target + ?Sized>(target: &T, points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::DimensionMismatch(
            "at least one sample point is required".into(),
        ));
    }
    if let Some(p) = points.iter().find(|p| p.len() != target.input_dim()) {
        return Err(Error::DimensionMismatch(format!(
            "sample point of length {} for a target with {} inputs",
            p.len(),
            target.input_dim()
        )));
    }
    Ok(())
}

pub fn build_jacobian_tensor<T: Target + ?Sized>(
    target: &T,
    points: &[Vec<f64>],
) -> Result<Tensor3> {
    build_jacobian_tensor_with(target, points, Execution::default())
}

/// Stacks `J_f(x^(s))` as frontal slices of an `n × m × S` tensor.
pub fn build_jacobian_tensor_with<T: Target + ?Sized>(
    target: &T,
    points: &[Vec<f64>],
    exec: Execution,
) -> Result<Tensor3> {
    check_points(target, points)?;
    let slices = exec.try_map(points.len(), |s| target.jacobian(&points[s]))?;
    let expected = (target.output_dim(), target.input_dim());
    if let Some(bad) = slices.iter().find(|j| j.shape() != expected) {
        return Err(Error::DimensionMismatch(format!(
            "Jacobian of shape {:?}, expected {expected:?}",
            bad.shape()
        )));
    }
    Tensor3::from_frontal_slices(&slices)
}

pub fn build_f_matrix<T: Target + ?Sized>(target: &T, points: &[Vec<f64>]) -> Result<Mat> {
    build_f_matrix_with(target, points, Execution::default())
}

/// `n × S` matrix whose column `s` is `f(x^(s))`.
pub fn build_f_matrix_with<T: Target + ?Sized>(
    target: &T,
    points: &[Vec<f64>],
    exec: Execution,
) -> Result<Mat> {
    check_points(target, points)?;
    let cols = exec.try_map(points.len(), |s| target.eval(&points[s]))?;
    let n = target.output_dim();
    if cols.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "evaluation length differs from {n}"
        )));
    }
    Mat::from_col_major(n, points.len(), cols.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::bias_example;

    #[test]
    fn single_point_tensor_is_the_jacobian() {
        let m = bias_example();
        let x = vec![0.2, -0.4];
        let t = build_jacobian_tensor(&m, std::slice::from_ref(&x)).unwrap();
        assert_eq!(t.dims(), (2, 2, 1));
        assert_eq!(t.frontal_slice(0).unwrap(), m.jacobian(&x).unwrap());
    }

    #[test]
    fn oracle_matches_model() {
        let m = bias_example();
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|s| vec![0.1 * s as f64, -0.05 * s as f64])
            .collect();
        let oracle = FnTarget {
            input_dim: 2,
            output_dim: 2,
            eval: |x: &[f64]| m.eval(x).unwrap(),
            jacobian: |x: &[f64]| m.jacobian(x).unwrap(),
        };
        assert_eq!(
            build_jacobian_tensor(&m, &pts).unwrap(),
            build_jacobian_tensor(&oracle, &pts).unwrap()
        );
        assert_eq!(
            build_f_matrix(&m, &pts).unwrap(),
            build_f_matrix(&oracle, &pts).unwrap()
        );
    }

    #[test]
    fn f_matrix_cases() {
        let m = bias_example();
        let f = build_f_matrix(&m, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(f, Mat::from_rows(&[vec![8.0], vec![20.0]]));
        let zero = FnTarget {
            input_dim: 3,
            output_dim: 2,
            eval: |_: &[f64]| vec![0.0, 0.0],
            jacobian: |_: &[f64]| Mat::zeros(2, 3),
        };
        let pts = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 0.5]];
        assert_eq!(build_f_matrix(&zero, &pts).unwrap(), Mat::zeros(2, 2));
    }

    #[test]
    fn inconsistent_oracle_dims_are_rejected() {
        let bad = FnTarget {
            input_dim: 1,
            output_dim: 1,
            eval: |x: &[f64]| vec![x[0]],
            jacobian: |x: &[f64]| {
                if x[0] > 0.0 {
                    Mat::zeros(1, 1)
                } else {
                    Mat::zeros(2, 1)
                }
            },
        };
        assert!(build_jacobian_tensor(&bad, &[vec![1.0], vec![-1.0]]).is_err());
        assert!(build_jacobian_tensor(&bad, &[]).is_err());
        assert!(build_f_matrix(&bad, &[vec![1.0, 2.0]]).is_err());
    }
}
