//! Reading and writing the `TNS1` binary tensor format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! bytes 0..8   magic  "TNS1\0\0\0\0"
//! byte  8      dtype  0 = real f64, 1 = complex f64 (re, im interleaved)
//! bytes 9..33  extents n1, n2, n3 as u64
//! bytes 33..   payload, column-major within each frontal slice,
//!              slices contiguous in k
//! ```
//!
//! Matrices travel as `rows x cols x 1` tensors. Files with an unknown magic
//! or dtype are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{C64, Matrix, Tensor3};

pub const MAGIC: [u8; 8] = *b"TNS1\0\0\0\0";

const DTYPE_REAL: u8 = 0;
const DTYPE_COMPLEX: u8 = 1;

/// Writes a tensor, using the compact real layout when every imaginary part
/// is exactly zero.
pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor3) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let real = t.max_imag_abs() == 0.0;
    let (n1, n2, n3) = t.dims();
    w.write_all(&MAGIC)?;
    w.write_all(&[if real { DTYPE_REAL } else { DTYPE_COMPLEX }])?;
    for extent in [n1, n2, n3] {
        w.write_all(&(extent as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.re.to_le_bytes())?;
        if !real {
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    let mut r = BufReader::new(File::open(&path)?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::BadFile("truncated header".into()))?;
    if magic != MAGIC {
        return Err(Error::BadFile(format!("unknown magic {magic:?}")));
    }

    let mut dtype = [0u8; 1];
    r.read_exact(&mut dtype).map_err(|_| Error::BadFile("truncated header".into()))?;
    let complex = match dtype[0] {
        DTYPE_REAL => false,
        DTYPE_COMPLEX => true,
        other => return Err(Error::BadFile(format!("unknown dtype {other}"))),
    };

    let mut extents = [0usize; 3];
    for e in &mut extents {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(|_| Error::BadFile("truncated extents".into()))?;
        *e = u64::from_le_bytes(buf)
            .try_into()
            .map_err(|_| Error::BadFile("extent too large for this platform".into()))?;
    }
    let [n1, n2, n3] = extents;
    let count = n1
        .checked_mul(n2)
        .and_then(|p| p.checked_mul(n3))
        .ok_or_else(|| Error::BadFile("extent product overflows".into()))?;

    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|_| Error::BadFile("truncated payload".into()))?;
        let re = f64::from_le_bytes(buf);
        let im = if complex {
            r.read_exact(&mut buf).map_err(|_| Error::BadFile("truncated payload".into()))?;
            f64::from_le_bytes(buf)
        } else {
            0.0
        };
        data.push(C64::new(re, im));
    }
    if r.read(&mut buf[..1])? != 0 {
        return Err(Error::BadFile("trailing bytes after payload".into()));
    }
    Tensor3::from_data(n1, n2, n3, data)
}

/// Writes a matrix as a `rows x cols x 1` tensor.
pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    write_tensor(path, &Tensor3::from_data(m.rows(), m.cols(), 1, m.data().to_vec())?)
}

/// Reads a matrix stored as a `rows x cols x 1` tensor.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let t = read_tensor(path)?;
    let (n1, n2, n3) = t.dims();
    if n3 != 1 {
        return Err(Error::BadFile(format!("expected a rows x cols x 1 file, got {n1}x{n2}x{n3}")));
    }
    Matrix::from_col_major(n1, n2, t.data().to_vec())
}
