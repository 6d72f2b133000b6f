//! Binary and CSV encodings for [`Mat`] and [`Tensor3`].
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic   8 bytes   b"MLDTNS3\0" (tensor) or b"MLDMAT2\0" (matrix)
//! dims    u64 × 3   (I, J, K)     or u64 × 2 (rows, cols)
//! data    f64 × N   storage order (column-major by mode 1)
//! ```
//!
//! CSV is write-only and meant for inspection: one block per frontal slice,
//! headed by `# slice k`, rows comma-separated, blocks separated by a blank line.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Mat, Tensor3};

pub const TENSOR_MAGIC: &[u8; 8] = b"MLDTNS3\0";
pub const MAT_MAGIC: &[u8; 8] = b"MLDMAT2\0";

fn write_f64s<W: Write>(w: &mut W, data: &[f64]) -> Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(Error::Format(format!("bad magic bytes {b:?}")));
    }
    Ok(())
}

fn dim(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("dimension {v} too large")))
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("dimension product overflows".into()))
}

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor3) -> Result<()> {
    let (i, j, k) = t.dims();
    w.write_all(TENSOR_MAGIC)?;
    for d in [i, j, k] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    write_f64s(w, t.as_slice())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor3> {
    expect_magic(r, TENSOR_MAGIC)?;
    let dims = (dim(read_u64(r)?)?, dim(read_u64(r)?)?, dim(read_u64(r)?)?);
    let n = checked_len(&[dims.0, dims.1, dims.2])?;
    Tensor3::from_data(dims, read_f64s(r, n)?)
}

pub fn write_mat<W: Write>(w: &mut W, m: &Mat) -> Result<()> {
    w.write_all(MAT_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    write_f64s(w, m.as_slice())
}

pub fn read_mat<R: Read>(r: &mut R) -> Result<Mat> {
    expect_magic(r, MAT_MAGIC)?;
    let (rows, cols) = (dim(read_u64(r)?)?, dim(read_u64(r)?)?);
    let n = checked_len(&[rows, cols])?;
    Mat::from_col_major(rows, cols, read_f64s(r, n)?)
}

fn write_mat_rows<W: Write>(w: &mut W, m: &Mat) -> Result<()> {
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_mat_csv<W: Write>(w: &mut W, m: &Mat) -> Result<()> {
    write_mat_rows(w, m)
}

pub fn write_tensor_csv<W: Write>(w: &mut W, t: &Tensor3) -> Result<()> {
    for (k, slice) in t.frontal_slices().iter().enumerate() {
        if k > 0 {
            writeln!(w)?;
        }
        writeln!(w, "# slice {k}")?;
        write_mat_rows(w, slice)?;
    }
    Ok(())
}
