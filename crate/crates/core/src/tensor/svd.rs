use crate::error::{Error, Result};

use super::Mat;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `a = u · diag(s) · vᵀ` of a matrix with at least as many rows as
/// columns. Singular values are not sorted; columns of `u` belonging to zero
/// singular values are zero.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

/// One-sided (Hestenes) Jacobi SVD. Columns are rotated pairwise until all are
/// mutually orthogonal to working precision. Columns whose norm drops below
/// `ε·‖a‖_F` are pure rounding noise and are no longer rotated, so their
/// singular values are only meaningful at that level.
pub fn jacobi_svd(a: &Mat) -> Result<ThinSvd> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "jacobi_svd needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut u = a.as_slice().to_vec();
    let mut v = Mat::identity(n).as_slice().to_vec();
    let tol = (m as f64).sqrt() * f64::EPSILON;
    let floor = (f64::EPSILON * a.fro_norm()).powi(2);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..n {
            for q in p + 1..n {
                let (up, uq) = column_pair(&mut u, m, p, q);
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (x, y) in up.iter().zip(uq.iter()) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(up, uq, c, s);
                let (vp, vq) = column_pair(&mut v, n, p, q);
                rotate(vp, vq, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::SvdFailed);
    }

    let mut s = vec![0.0; n];
    for (j, sj) in s.iter_mut().enumerate() {
        let col = &mut u[j * m..(j + 1) * m];
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        *sj = norm;
        let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        col.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(ThinSvd {
        u: Mat::from_col_major(m, n, u)?,
        s,
        v: Mat::from_col_major(n, n, v)?,
    })
}

fn column_pair(data: &mut [f64], rows: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    let (head, tail) = data.split_at_mut(q * rows);
    (&mut head[p * rows..(p + 1) * rows], &mut tail[..rows])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
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

    fn reconstruct(svd: &ThinSvd) -> Mat {
        svd.u.scale_cols(&svd.s).matmul(&svd.v.transpose())
    }

    #[test]
    fn reconstructs_and_is_orthogonal() {
        for (seed, (m, n)) in [(8, 3), (30, 3), (12, 12), (120, 12), (5, 1), (1, 1)]
            .into_iter()
            .enumerate()
        {
            for k in 0..50 {
                let a = lcg_mat(m, n, (seed * 1000 + k) as u64);
                let svd = jacobi_svd(&a).unwrap();
                assert!(reconstruct(&svd).sub(&a).fro_norm() <= 1e-14 * a.fro_norm());
                let vtv = svd.v.transpose().matmul(&svd.v);
                assert!(vtv.sub(&Mat::identity(n)).fro_norm() < 1e-14);
                let utu = svd.u.transpose().matmul(&svd.u);
                assert!(utu.sub(&Mat::identity(n)).fro_norm() < 1e-14);
            }
        }
    }

    #[test]
    fn clustered_singular_values() {
        // Columns with nearly equal norms and small mutual angles.
        let a = Mat::from_rows(&[
            vec![1.0, 1.0 + 1e-9, 0.0],
            vec![1e-8, 0.0, 1.0],
            vec![0.0, 1e-8, 1.0],
            vec![1.0, 1.0, 1e-9],
        ]);
        let svd = jacobi_svd(&a).unwrap();
        assert!(reconstruct(&svd).sub(&a).fro_norm() <= 1e-15 * a.fro_norm());
    }

    #[test]
    fn known_singular_values() {
        let a = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, -4.0], vec![0.0, 0.0]]);
        let mut s = jacobi_svd(&a).unwrap().s;
        s.sort_by(f64::total_cmp);
        assert_eq!(s, vec![3.0, 4.0]);
    }

    #[test]
    fn zero_and_dependent_columns() {
        let a = Mat::from_rows(&[
            vec![0.0, 1.0, 2.0],
            vec![0.0, 2.0, 4.0],
            vec![0.0, 3.0, 6.0],
        ]);
        let svd = jacobi_svd(&a).unwrap();
        let zeros = svd.s.iter().filter(|&&s| s < 1e-15 * 10.0).count();
        assert_eq!(zeros, 2);
        assert!(reconstruct(&svd).sub(&a).fro_norm() < 1e-14);
    }

    #[test]
    fn rank_one_with_rounding_noise_converges() {
        let a = Mat::from_fn(12, 2, |i, j| (i as f64 + 0.3) * [1.7, 0.47][j]);
        let svd = jacobi_svd(&a).unwrap();
        let mut s = svd.s.clone();
        s.sort_by(f64::total_cmp);
        assert!(s[0] <= 1e-14 * s[1]);
        assert!(reconstruct(&svd).sub(&a).fro_norm() <= 1e-14 * a.fro_norm());
    }

    #[test]
    fn wide_input_rejected() {
        assert!(jacobi_svd(&Mat::zeros(2, 3)).is_err());
    }
}
