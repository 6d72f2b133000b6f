use crate::error::{Error, Result};

use super::{Mat, Tensor3};

/// Column-major vectorization, consistent with `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
pub fn vec(m: &Mat) -> Vec<f64> {
    m.as_slice().to_vec()
}

pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Mat> {
    Mat::from_col_major(rows, cols, v.to_vec())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(ar * br, ac * bc);
    for ja in 0..ac {
        for jb in 0..bc {
            let dst = out.col_mut(ja * bc + jb);
            for ia in 0..ar {
                let s = a[(ia, ja)];
                if s == 0.0 {
                    continue;
                }
                for (d, &v) in dst[ia * br..(ia + 1) * br].iter_mut().zip(b.col(jb)) {
                    *d = s * v;
                }
            }
        }
    }
    out
}

/// Column-wise Khatri–Rao product `a ⊙ b`: column `j` is `a[:, j] ⊗ b[:, j]`.
pub fn khatri_rao(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "khatri_rao needs equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    let (ar, br) = (a.rows(), b.rows());
    let mut out = Mat::zeros(ar * br, a.cols());
    for j in 0..a.cols() {
        let (ac, bcol) = (a.col(j), b.col(j));
        let dst = out.col_mut(j);
        for (ia, &s) in ac.iter().enumerate() {
            for (d, &v) in dst[ia * br..(ia + 1) * br].iter_mut().zip(bcol) {
                *d = s * v;
            }
        }
    }
    Ok(out)
}

/// CPD tensor with frontal slices `A · diag(C[k, :]) · Bᵀ`.
pub fn cpd_reconstruct(a: &Mat, b: &Mat, c: &Mat) -> Result<Tensor3> {
    if a.cols() != b.cols() || a.cols() != c.cols() {
        return Err(Error::DimensionMismatch(format!(
            "CPD factors with {}, {} and {} columns",
            a.cols(),
            b.cols(),
            c.cols()
        )));
    }
    let bt = b.transpose();
    let slices: Vec<Mat> = (0..c.rows())
        .map(|k| a.matmul(&bt.scale_rows(&c.row(k))))
        .collect();
    Tensor3::from_frontal_slices(&slices)
}
