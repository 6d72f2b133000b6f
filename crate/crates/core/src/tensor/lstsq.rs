use crate::error::{Error, Result};

use super::svd::jacobi_svd;
use super::Mat;

/// Default relative singular-value cutoff.
pub const DEFAULT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: Mat,
    /// Numerical rank after truncation.
    pub rank: usize,
    /// Number of singular values discarded as below `rtol · σ_max`.
    pub truncated: usize,
}

/// Minimum-norm least-squares solution of `a · x ≈ b` with [`DEFAULT_RTOL`].
pub fn lstsq(a: &Mat, b: &Mat) -> Result<LstsqSolution> {
    lstsq_rtol(a, b, DEFAULT_RTOL)
}

/// Minimum-norm least-squares solution through a thin SVD; singular values
/// below `rtol · σ_max` are treated as zero.
pub fn lstsq_rtol(a: &Mat, b: &Mat, rtol: f64) -> Result<LstsqSolution> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch(
            "lstsq with an empty system matrix".into(),
        ));
    }
    if b.rows() != m {
        return Err(Error::DimensionMismatch(format!(
            "lstsq: a has {m} rows but b has {}",
            b.rows()
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("lstsq inputs"));
    }

    // For wide systems a = v·diag(s)·uᵀ comes from the SVD of aᵀ.
    let wide = m < n;
    let svd = jacobi_svd(&if wide { a.transpose() } else { a.clone() })?;
    let (left, right) = if wide {
        (&svd.v, &svd.u)
    } else {
        (&svd.u, &svd.v)
    };
    let sigma = &svd.s;

    let smax = sigma.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let cutoff = rtol * smax;
    let keep: Vec<usize> = (0..sigma.len())
        .filter(|&i| sigma[i] > cutoff && sigma[i] > 0.0)
        .collect();

    let mut x = Mat::zeros(n, b.cols());
    for c in 0..b.cols() {
        let bc = b.col(c);
        let xc = x.col_mut(c);
        for &i in &keep {
            let coef = dot(left.col(i), bc) / sigma[i];
            for (xv, &rv) in xc.iter_mut().zip(right.col(i)) {
                *xv += rv * coef;
            }
        }
    }
    Ok(LstsqSolution {
        x,
        rank: keep.len(),
        truncated: sigma.len() - keep.len(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut s = seed;
        Mat::from_fn(rows, cols, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn identity_system() {
        let b = lcg_mat(3, 2, 5);
        let sol = lstsq(&Mat::identity(3), &b).unwrap();
        assert!(sol.x.sub(&b).fro_norm() < 1e-15);
        assert_eq!(sol.rank, 3);
    }

    #[test]
    fn overdetermined_mean() {
        let a = Mat::from_rows(&[vec![1.0], vec![1.0]]);
        let b = Mat::from_rows(&[vec![0.0], vec![2.0]]);
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol.x[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_orthogonal_to_column_space() {
        let a = lcg_mat(20, 5, 7);
        let b = lcg_mat(20, 1, 8);
        let x = lstsq(&a, &b).unwrap().x;
        let r = a.matmul(&x).sub(&b);
        let g = a.transpose().matmul(&r);
        assert!(g.fro_norm() < 1e-10 * a.fro_norm() * b.fro_norm());
    }

    #[test]
    fn consistent_system_reproduces_solution() {
        let a = lcg_mat(12, 4, 9);
        let x0 = lcg_mat(4, 3, 10);
        let b = a.matmul(&x0);
        let x = lstsq(&a, &b).unwrap().x;
        assert!(x.sub(&x0).fro_norm() <= 1e-10 * x0.fro_norm());
    }

    #[test]
    fn close_singular_values_solve_to_full_precision() {
        // Singular values 1.750, 1.741, 1.136.
        let a = Mat::from_col_major(
            8,
            3,
            vec![
                1.2681558326275801,
                -0.18700973278742444,
                0.2286532825046263,
                -0.45525377199728423,
                -0.24929177906644018,
                -0.1597998632246913,
                -0.5521676160291618,
                -0.8560952038859675,
                -0.017346005642082385,
                1.0606636910530098,
                0.00538894714173771,
                0.482077422367833,
                0.41717237078482583,
                -0.47237118309417436,
                -0.13486873963181134,
                -0.2621035619645329,
                -0.07772178249530545,
                0.07994082962950466,
                0.875553877371979,
                0.5609423948622547,
                0.8978937250195536,
                0.14078752760878688,
                -0.7637554844410057,
                -0.10068808064223544,
            ],
        )
        .unwrap();
        let x0 = Mat::column(&[1.8196455938704732, -1.5565946012382348, -1.6043316530992495]);
        let x = lstsq(&a, &a.matmul(&x0)).unwrap().x;
        assert!(x.sub(&x0).fro_norm() <= 1e-14 * x0.fro_norm());
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // Duplicate columns: the min-norm solution splits the weight equally.
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let b = Mat::from_rows(&[vec![2.0], vec![4.0]]);
        let sol = lstsq(&a, &b).unwrap();
        assert_eq!(sol.truncated, 1);
        assert!((sol.x[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((sol.x[(1, 0)] - 1.0).abs() < 1e-12);
        // zero column gets a zero coefficient
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 2.0], vec![0.0, 3.0]]);
        let b = Mat::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let sol = lstsq(&a, &b).unwrap();
        assert_eq!(sol.x[(0, 0)], 0.0);
        assert!((sol.x[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn underdetermined_minimum_norm() {
        let a = Mat::from_rows(&[vec![1.0, 1.0]]);
        let b = Mat::from_rows(&[vec![2.0]]);
        let x = lstsq(&a, &b).unwrap().x;
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14 && (x[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            lstsq(&Mat::zeros(3, 2), &Mat::zeros(2, 1)),
            Err(Error::DimensionMismatch(_))
        ));
        let mut a = Mat::identity(2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(
            lstsq(&a, &Mat::zeros(2, 1)),
            Err(Error::NonFinite(_))
        ));
        assert!(lstsq(&Mat::zeros(0, 1), &Mat::zeros(0, 1)).is_err());
    }
}
