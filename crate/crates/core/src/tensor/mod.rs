//! Dense matrix and third-order tensor primitives.
//!
//! All indices are 0-based.

mod io;
mod lstsq;
mod mat;
mod products;
mod svd;
mod tensor3;

pub use io::{
    read_mat, read_tensor, write_mat, write_mat_csv, write_tensor, write_tensor_csv, MAT_MAGIC,
    TENSOR_MAGIC,
};
pub use lstsq::{lstsq, lstsq_rtol, LstsqSolution, DEFAULT_RTOL};
pub use mat::Mat;
pub use products::{cpd_reconstruct, khatri_rao, kron, unvec, vec};
pub use svd::{jacobi_svd, ThinSvd};
pub use tensor3::Tensor3;
