//! Small dense-matrix helpers shared across the crate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m).max(1.0);
    max_abs(&(m - m.transpose())) <= tol * scale
}

/// Eigenvalues of the symmetrized matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut evs: Vec<f64> = symmetrize(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    evs.sort_by(f64::total_cmp);
    evs
}

pub fn sym_eigmin(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

/// Smallest eigenvalue of a Hermitian complex matrix.
pub fn herm_eigmin(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_hermitian(m: &DMatrix<Complex64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    (m - m.adjoint()).iter().all(|z| z.norm() <= tol * scale)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, with an
/// eigenvalue diagnostic on rejection.
pub fn cholesky_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{context}: expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_symmetric(m, 1e-10) {
        return Err(Error::NotSpd {
            context: context.to_string(),
            detail: format!("asymmetry {:.3e}", max_abs(&(m - m.transpose()))),
        });
    }
    let sym = symmetrize(m);
    match sym.clone().cholesky() {
        Some(chol) => Ok(chol.l()),
        None => Err(Error::NotSpd {
            context: context.to_string(),
            detail: format!("smallest eigenvalue {:.6e}", sym_eigmin(&sym)),
        }),
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn inv_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if !is_symmetric(m, 1e-10) {
        return Err(Error::NotSpd {
            context: context.to_string(),
            detail: format!("asymmetry {:.3e}", max_abs(&(m - m.transpose()))),
        });
    }
    let sym = symmetrize(m);
    sym.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotSpd {
            context: context.to_string(),
            detail: format!("smallest eigenvalue {:.6e}", sym_eigmin(&sym)),
        })
}

/// Symmetric inverse square root of an SPD matrix.
pub fn inverse_sqrt_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= 0.0 {
            return Err(Error::NotSpd {
                context: context.to_string(),
                detail: format!("smallest eigenvalue {ev:.6e}"),
            });
        }
        let f = ev.sqrt().recip();
        scaled.column_mut(j).scale_mut(f);
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Factor `F` with `F Fᵀ = m` for a symmetric PSD matrix; tiny negative
/// eigenvalues are clamped to zero so exactly-singular inputs are accepted.
pub fn psd_factor(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    let scale = max_abs(&sym).max(1.0);
    let eig = sym.symmetric_eigen();
    let mut scaled = eig.eigenvectors;
    for (j, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < -1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "{context}: negative eigenvalue {ev:.6e}"
            )));
        }
        scaled.column_mut(j).scale_mut(ev.max(0.0).sqrt());
    }
    Ok(scaled)
}

/// log-determinant of an SPD matrix.
pub fn log_det_spd(m: &DMatrix<f64>, context: &str) -> Result<f64> {
    let l = cholesky_spd(m, context)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigmin_of_known_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(sym_eigmin(&m), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite_with_diagnostic() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_spd(&m, "test") {
            Err(Error::NotSpd { detail, .. }) => assert!(detail.contains("eigenvalue")),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn inverse_sqrt_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let t = inverse_sqrt_spd(&m, "test").unwrap();
        let should_be_eye = &t * &m * &t;
        assert!(max_abs(&(should_be_eye - DMatrix::identity(2, 2))) < 1e-12);
    }
}
