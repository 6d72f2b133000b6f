//! Reference systems and the random system generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DecoupledModel;
use crate::tensor::Mat;

pub const BUILTIN_NAMES: [&str; 3] = ["f1", "f2", "f3"];

fn rows(r: &[&[f64]]) -> Mat {
    Mat::from_rows(&r.iter().map(|row| row.to_vec()).collect::<Vec<_>>())
}

/// The three two-layer reference systems `f1`, `f2`, `f3`.
pub fn builtin_system(name: &str) -> Result<DecoupledModel> {
    let (weights, coeffs) = match name {
        "f1" => (
            vec![
                rows(&[&[1.72, -0.73], &[-1.26, -1.18]]),
                rows(&[&[0.87, -0.99], &[-1.42, 0.9]]),
                rows(&[&[1.61, -1.9], &[-0.03, 0.11]]),
            ],
            vec![
                vec![
                    vec![0.0, 0.58, -2.69, 2.37, 1.37, 1.91],
                    vec![0.0, 0.0, 1.86, -2.42, -1.69, -1.45],
                ],
                vec![vec![-0.19, -0.24, 1.26], vec![-1.93, 0.19, -1.99]],
            ],
        ),
        "f2" => (
            vec![
                rows(&[&[1.08, 1.71, 0.44], &[-1.4, -0.04, -0.49]]),
                rows(&[&[0.21, -0.94], &[-1.12, 0.56]]),
                rows(&[&[-0.59, 0.86], &[0.02, -1.1], &[-1.02, 1.17]]),
            ],
            vec![
                vec![vec![0.0, -0.03, 2.49, 2.67], vec![0.0, 0.2, -1.49, 1.33]],
                vec![
                    vec![-0.8, -0.01, -1.64, -0.88],
                    vec![0.91, -1.12, -1.61, 1.69],
                ],
            ],
        ),
        "f3" => (
            vec![
                rows(&[
                    &[-1.43, 0.06, 0.76, 1.43],
                    &[0.59, 0.33, 0.84, -0.99],
                    &[1.6, -0.23, -1.92, 1.84],
                ]),
                rows(&[&[1.49, -1.05, -1.0], &[0.78, -1.29, 0.62]]),
                rows(&[&[1.05, -1.11], &[-0.95, -0.17], &[-1.0, 0.27]]),
            ],
            vec![
                vec![
                    vec![0.0, 2.08, -0.73, -0.41],
                    vec![0.0, 2.0, -0.77, -2.76],
                    vec![0.0, 0.33, -0.29, 1.35],
                ],
                vec![
                    vec![-0.73, 2.04, -0.18, 0.38, 0.97],
                    vec![-0.23, 0.74, -1.67, 1.4, -0.71],
                ],
            ],
        ),
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    DecoupledModel::new(weights, coeffs)
}

/// Largest normalized inner product between two distinct columns. Zero for
/// single-column matrices.
pub fn collinearity(w: &Mat) -> f64 {
    let norms: Vec<f64> = (0..w.cols())
        .map(|j| w.col(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..w.cols() {
        for j in i + 1..w.cols() {
            let dot: f64 = w.col(i).iter().zip(w.col(j)).map(|(a, b)| a * b).sum();
            worst = worst.max(dot / (norms[i] * norms[j]));
        }
    }
    if worst == f64::NEG_INFINITY {
        0.0
    } else {
        worst
    }
}

/// Recipe for a random decoupled system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub ranks: Vec<usize>,
    pub degrees: Vec<usize>,
    /// Half-width of the uniform range for `W_0` and `W_L`.
    #[serde(default = "defaults::outer")]
    pub outer_range: f64,
    /// Half-width for the middle weights `W_1..W_{L-1}`.
    #[serde(default = "defaults::middle")]
    pub middle_range: f64,
    #[serde(default = "defaults::coeff")]
    pub coeff_range: f64,
    /// Every weight matrix must have collinearity strictly below this.
    #[serde(default = "defaults::c_max")]
    pub c_max: f64,
    #[serde(default)]
    pub seed: u64,
    /// Draws allowed per weight matrix before giving up.
    #[serde(default = "defaults::max_attempts")]
    pub max_attempts: usize,
}

mod defaults {
    pub fn outer() -> f64 {
        2.0
    }
    pub fn middle() -> f64 {
        1.5
    }
    pub fn coeff() -> f64 {
        3.0
    }
    pub fn c_max() -> f64 {
        0.5
    }
    pub fn max_attempts() -> usize {
        10_000
    }
}

impl SyntheticSpec {
    pub fn new(
        inputs: usize,
        outputs: usize,
        ranks: Vec<usize>,
        degrees: Vec<usize>,
        seed: u64,
    ) -> Self {
        SyntheticSpec {
            inputs,
            outputs,
            ranks,
            degrees,
            outer_range: defaults::outer(),
            middle_range: defaults::middle(),
            coeff_range: defaults::coeff(),
            c_max: defaults::c_max(),
            seed,
            max_attempts: defaults::max_attempts(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 || self.ranks.is_empty() {
            return Err(Error::InvalidConfig(
                "inputs, outputs and ranks must be nonempty".into(),
            ));
        }
        if self.ranks.len() != self.degrees.len()
            || self.ranks.contains(&0)
            || self.degrees.contains(&0)
        {
            return Err(Error::InvalidConfig(format!(
                "ranks {:?} and degrees {:?} must be positive and of equal length",
                self.ranks, self.degrees
            )));
        }
        let ranges = [self.outer_range, self.middle_range, self.coeff_range];
        if ranges.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidConfig(
                "sampling ranges must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Random system with weights and coefficients drawn uniformly from the
/// spec's symmetric ranges. Each weight matrix is redrawn until its
/// collinearity is below `c_max`. Constant terms are zero except in the last
/// layer.
pub fn generate_system(spec: &SyntheticSpec) -> Result<DecoupledModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = spec.ranks.len();
    let mut dims = vec![spec.inputs];
    dims.extend_from_slice(&spec.ranks);
    dims.push(spec.outputs);
    let mut weights = Vec::with_capacity(l + 1);
    for i in 0..=l {
        let half = if i == 0 || i == l {
            spec.outer_range
        } else {
            spec.middle_range
        };
        let mut attempt = 0;
        let w = loop {
            if attempt == spec.max_attempts {
                return Err(Error::RejectionBudgetExceeded(spec.max_attempts));
            }
            attempt += 1;
            let w = Mat::from_fn(dims[i + 1], dims[i], |_, _| rng.random_range(-half..half));
            if collinearity(&w) < spec.c_max {
                break w;
            }
        };
        weights.push(w);
    }
    let c = spec.coeff_range;
    let coeffs = (0..l)
        .map(|li| {
            (0..spec.ranks[li])
                .map(|_| {
                    let mut v: Vec<f64> = (0..=spec.degrees[li])
                        .map(|_| rng.random_range(-c..c))
                        .collect();
                    if li + 1 < l {
                        v[0] = 0.0;
                    }
                    v
                })
                .collect()
        })
        .collect();
    DecoupledModel::new(weights, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shapes_and_entries() {
        let f1 = builtin_system("f1").unwrap();
        assert_eq!(f1.weights()[2].row(0), vec![1.61, -1.9]);
        assert_eq!((f1.ranks(), f1.degrees()), (vec![2, 2], vec![5, 2]));
        let f2 = builtin_system("f2").unwrap();
        assert_eq!(
            (f2.input_dim(), f2.output_dim(), f2.ranks()),
            (3, 3, vec![2, 2])
        );
        let f3 = builtin_system("f3").unwrap();
        assert_eq!(f3.layer_coeffs(2)[1].len() - 1, 4);
        assert_eq!(
            (f3.input_dim(), f3.output_dim(), f3.ranks()),
            (4, 3, vec![3, 2])
        );
        assert!(matches!(builtin_system("f4"), Err(Error::UnknownSystem(_))));
        for name in BUILTIN_NAMES {
            let m = builtin_system(name).unwrap();
            assert!(m.is_bias_free());
        }
    }

    #[test]
    fn builtins_round_trip_through_json() {
        for name in BUILTIN_NAMES {
            let m = builtin_system(name).unwrap();
            let back = DecoupledModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn collinearity_cases() {
        assert_eq!(collinearity(&Mat::identity(3)), 0.0);
        assert_eq!(collinearity(&Mat::from_rows(&[vec![1.0], vec![2.0]])), 0.0);
        let c = collinearity(&Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]));
        assert!((c - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn generated_systems_respect_the_cap() {
        for seed in 0..20 {
            let spec = SyntheticSpec::new(3, 2, vec![3, 2], vec![3, 2], seed);
            let m = generate_system(&spec).unwrap();
            assert!(m.weights().iter().all(|w| collinearity(w) < 0.5));
            assert!(m.weights()[0].as_slice().iter().all(|v| v.abs() <= 2.0));
            assert!(m.weights()[1].as_slice().iter().all(|v| v.abs() <= 1.5));
            assert!(m.is_bias_free());
            assert_eq!(generate_system(&spec).unwrap(), m);
        }
        let one = SyntheticSpec::new(1, 1, vec![1], vec![2], 3);
        assert!(generate_system(&one).is_ok());
    }

    #[test]
    fn infeasible_cap_exhausts_budget() {
        let mut spec = SyntheticSpec::new(2, 2, vec![5], vec![2], 0);
        spec.c_max = -0.9;
        spec.max_attempts = 50;
        assert!(matches!(
            generate_system(&spec),
            Err(Error::RejectionBudgetExceeded(50))
        ));
    }
}
