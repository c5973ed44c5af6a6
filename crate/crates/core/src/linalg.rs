//! Dense Hermitian diagonalisation.
//!
//! nalgebra's `symmetric_eigen` loses accuracy on clustered spectra (residuals
//! near 1e-6 for the ring at loop phase π), so exact propagation goes through
//! faer's divide-and-conquer solver instead.

use faer::{c64, Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Complex64;

/// Eigenvalues (ascending) and orthonormal eigenvectors as columns.
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    let a = Mat::<c64>::from_fn(n, n, |r, c| {
        let z = m[(r, c)];
        c64::new(z.re, z.im)
    });
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Unsupported(format!("Hermitian eigendecomposition failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..n).map(|k| s[k].re).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| {
        let z = u[(r, c)];
        Complex64::new(z.re, z.im)
    });
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustered_spectrum_reconstructs() {
        // three-site ring with a tiny splitting of a doubly degenerate level
        let w = Complex64::from_polar(1.0, (std::f64::consts::PI + 0.005) / 3.0);
        let m = DMatrix::from_fn(3, 3, |r, c| match (c + 3 - r) % 3 {
            1 => w,
            2 => w.conj(),
            _ => Complex64::new(0.0, 0.0),
        });
        let (e, v) = hermitian_eigen(&m).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(3, |k, _| {
            Complex64::new(e[k], 0.0)
        }));
        assert!((&v * d * v.adjoint() - &m).norm() < 1e-13);
        assert!((v.adjoint() * &v - DMatrix::identity(3, 3)).norm() < 1e-13);
        assert!(e.windows(2).all(|p| p[0] <= p[1]));
    }
}
