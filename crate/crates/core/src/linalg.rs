//! Small dense helpers over nalgebra shared by the ridge and hybrid models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` of a symmetric positive-definite matrix, `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct SpdFactor {
    l: DMatrix<f64>,
}

impl SpdFactor {
    pub(crate) fn new(a: &DMatrix<f64>, what: &'static str) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite(what))?;
        Ok(SpdFactor { l: chol.unpack() })
    }

    /// `A⁻¹ b`.
    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.l.solve_lower_triangular(b).expect("cholesky factor has a positive diagonal");
        self.l.tr_solve_lower_triangular(&y).expect("cholesky factor has a positive diagonal")
    }

    /// `xᵀ A⁻¹ x = ‖L⁻¹ x‖²`.
    pub(crate) fn inv_quad(&self, x: &DVector<f64>) -> f64 {
        self.l.solve_lower_triangular(x).expect("cholesky factor has a positive diagonal").norm_squared()
    }
}

/// `a ← a + sign · x xᵀ`.
pub(crate) fn rank1_update(a: &mut DMatrix<f64>, x: &DVector<f64>, sign: f64) {
    a.ger(sign, x, x, 1.0);
}

/// `Bᵀ A⁻¹ B` and `Bᵀ A⁻¹ b` for an arm's coupling block, formed as `WᵀW` with
/// `W = L⁻¹ B` so the matrix term is symmetric.
pub(crate) fn coupling(factor: &SpdFactor, big_b: &DMatrix<f64>, b: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let w = factor.l.solve_lower_triangular(big_b).expect("cholesky factor has a positive diagonal");
    let v = factor.l.solve_lower_triangular(b).expect("cholesky factor has a positive diagonal");
    (w.tr_mul(&w), w.tr_mul(&v))
}

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
