//! Matrix-free application of Kronecker-structured operators.
//!
//! Every large operator in the SINR expressions has the form `B^T (x) A`
//! acting on `vec(X)`. The identity `(B^T (x) A) vec(X) = vec(A X B)` lets us
//! apply it through the matrix reshape without ever materializing the
//! `(rows*cols)^2` Kronecker product.

use crate::{CMat, CVec, Error, Result};

/// Apply `(B^T (x) A)` to `vec(X)` as `vec(A X B)`.
///
/// `x` must have length `A.ncols() * B.nrows()`; the result has length
/// `A.nrows() * B.ncols()`.
pub fn kron_apply(a: &CMat, b: &CMat, x: &CVec) -> Result<CVec> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    if x.len() != ac * br {
        return Err(Error::DimensionMismatch(format!(
            "kron_apply: vector length {} does not match {}x{} reshape",
            x.len(),
            ac,
            br
        )));
    }
    let xm = CMat::from_column_slice(ac, br, x.as_slice());
    let ym = a * xm * b;
    let _ = (ar, bc);
    Ok(CVec::from_column_slice(ym.as_slice()))
}

/// Dense materialization `B^T (x) A` (test oracle and small-instance checks).
pub fn kron_dense(a: &CMat, b: &CMat) -> CMat {
    b.transpose().kronecker(a)
}

/// `vec(X)` with column-major stacking.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`]: reshape a vector into a `rows x cols` matrix.
pub fn mat_of(v: &CVec, rows: usize, cols: usize) -> CMat {
    debug_assert_eq!(v.len(), rows * cols);
    CMat::from_column_slice(rows, cols, v.as_slice())
}
