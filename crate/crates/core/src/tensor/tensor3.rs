use crate::error::{Error, Result};

use super::Mat;

/// Dense third-order tensor of shape `I × J × K`.
///
/// Layout is column-major by mode 1: entry `(i, j, k)` lives at
/// `i + I * (j + J * k)`. Consequences relied on elsewhere:
///
/// * frontal slice `k` is a contiguous column-major `I × J` block,
/// * the storage equals `vec(unfold(1))`, so `vec3(t)` is the storage itself
///   and also the concatenation of `vec(frontal_slice(t, k))` over `k`.
///
/// Unfoldings follow the Kolda–Bader convention (column index of mode `n`
/// enumerates the remaining indices with the lowest mode varying fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Tensor3 {
            dims,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_data(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{}x{} tensor",
                data.len(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { dims, data }
    }

    /// Stacks equally-shaped matrices as frontal slices.
    pub fn from_frontal_slices(slices: &[Mat]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::DimensionMismatch("no frontal slices".into()));
        };
        let (i, j) = first.shape();
        let mut data = Vec::with_capacity(i * j * slices.len());
        for s in slices {
            if s.shape() != (i, j) {
                return Err(Error::DimensionMismatch(format!(
                    "frontal slice {:?} differs from {:?}",
                    s.shape(),
                    (i, j)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Tensor3 {
            dims: (i, j, slices.len()),
            data,
        })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (ni, nj, _) = self.dims;
        self.data[i + ni * (j + nj * k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let (ni, nj, _) = self.dims;
        self.data[i + ni * (j + nj * k)] = v;
    }

    /// Contiguous view of frontal slice `k` in column-major order.
    pub fn frontal_slice_data(&self, k: usize) -> &[f64] {
        let len = self.dims.0 * self.dims.1;
        &self.data[k * len..(k + 1) * len]
    }

    pub fn frontal_slice(&self, k: usize) -> Result<Mat> {
        if k >= self.dims.2 {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.dims.2,
            });
        }
        Mat::from_col_major(
            self.dims.0,
            self.dims.1,
            self.frontal_slice_data(k).to_vec(),
        )
    }

    pub fn frontal_slices(&self) -> Vec<Mat> {
        (0..self.dims.2)
            .map(|k| self.frontal_slice(k).expect("in range"))
            .collect()
    }

    /// Mode-`n` unfolding, `n ∈ {1, 2, 3}`:
    /// mode 1 is `I × JK` (column `j + J k`), mode 2 is `J × IK` (column
    /// `i + I k`), mode 3 is `K × IJ` (column `i + I j`).
    pub fn unfold(&self, mode: usize) -> Result<Mat> {
        let (ni, nj, nk) = self.dims;
        match mode {
            1 => Mat::from_col_major(ni, nj * nk, self.data.clone()),
            2 => Ok(Mat::from_fn(nj, ni * nk, |j, c| {
                self.get(c % ni, j, c / ni)
            })),
            3 => Ok(Mat::from_fn(nk, ni * nj, |k, c| {
                self.get(c % ni, c / ni, k)
            })),
            m => Err(Error::InvalidMode(m)),
        }
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(m: &Mat, mode: usize, dims: (usize, usize, usize)) -> Result<Self> {
        let (ni, nj, nk) = dims;
        let expected = match mode {
            1 => (ni, nj * nk),
            2 => (nj, ni * nk),
            3 => (nk, ni * nj),
            other => return Err(Error::InvalidMode(other)),
        };
        if m.shape() != expected {
            return Err(Error::DimensionMismatch(format!(
                "mode-{mode} unfolding of {dims:?} must be {expected:?}, got {:?}",
                m.shape()
            )));
        }
        Ok(match mode {
            1 => Tensor3 {
                dims,
                data: m.as_slice().to_vec(),
            },
            2 => Tensor3::from_fn(dims, |i, j, k| m[(j, i + ni * k)]),
            _ => Tensor3::from_fn(dims, |i, j, k| m[(k, i + ni * j)]),
        })
    }

    /// `vec` of the tensor: equal to `vec(unfold(1))`, i.e. the storage.
    pub fn vec3(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Tensor3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
