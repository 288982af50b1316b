//! Incremental ridge-regression statistics for one disjoint arm model.
//!
//! A state holds `A = λI + Σ x xᵀ` and `b = Σ r x`. The Cholesky factor of `A`
//! and the estimate `θ̂ = A⁻¹ b` are refreshed after every update, so reads are
//! cheap and never observe a stale factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, rank1_update, SpdFactor};

/// Direction of an incremental update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Add an observation.
    Add,
    /// Remove an observation previously added.
    Remove,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Add => 1.0,
            Sign::Remove => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RidgeState {
    a: DMatrix<f64>,
    b: DVector<f64>,
    n_obs: usize,
    lambda: f64,
    factor: SpdFactor,
    theta: DVector<f64>,
}

impl RidgeState {
    /// Fresh state `A = λI_d`, `b = 0`.
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Dimension("ridge dimension must be positive".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("ridge regularizer must be positive, got {lambda}")));
        }
        let a = DMatrix::identity(d, d) * lambda;
        let factor = SpdFactor::new(&a, "ridge design matrix")?;
        Ok(RidgeState { a, b: DVector::zeros(d), n_obs: 0, lambda, factor, theta: DVector::zeros(d) })
    }

    /// Add (or remove) one observation `(x, r)`.
    pub fn update(&mut self, x: &DVector<f64>, r: f64, sign: Sign) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("expected {}-dim context, got {}", self.dim(), x.len())));
        }
        ensure_finite(x.as_slice(), "ridge context")?;
        ensure_finite(&[r], "ridge reward")?;
        let n_obs = match sign {
            Sign::Add => self.n_obs + 1,
            Sign::Remove => self
                .n_obs
                .checked_sub(1)
                .ok_or_else(|| Error::ContractViolation("downdate of an empty ridge state".into()))?,
        };
        let mut a = self.a.clone();
        rank1_update(&mut a, x, sign.factor());
        let b = &self.b + x * (sign.factor() * r);
        let factor = SpdFactor::new(&a, "ridge design matrix")?;
        self.theta = factor.solve(&b);
        self.a = a;
        self.b = b;
        self.factor = factor;
        self.n_obs = n_obs;
        Ok(())
    }

    /// Ridge estimate `θ̂ = A⁻¹ b`.
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// `xᵀ A⁻¹ x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        self.factor.inv_quad(x).max(0.0)
    }

    /// `A⁻¹ v` for an arbitrary right-hand side.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(v)
    }

    /// `xᵀθ̂ + α √(xᵀA⁻¹x)`.
    pub fn ucb_index(&self, x: &DVector<f64>, alpha: f64) -> f64 {
        x.dot(&self.theta) + alpha * self.quad_form(x).sqrt()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub(crate) fn hash_into(&self, h: &mut impl std::hash::Hasher) {
        crate::policy::hash_floats(h, self.a.as_slice());
        crate::policy::hash_floats(h, self.b.as_slice());
        h.write_usize(self.n_obs);
    }
}

/// Closed-form ridge fit over a batch; `lambda = 0` gives ordinary least squares
/// and fails when the design is singular.
pub fn fit_batch<'a>(
    observations: impl IntoIterator<Item = (&'a DVector<f64>, f64)>,
    d: usize,
    lambda: f64,
) -> Result<DVector<f64>> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("regularizer must be non-negative, got {lambda}")));
    }
    let mut a = DMatrix::identity(d, d) * lambda;
    let mut b = DVector::zeros(d);
    for (x, r) in observations {
        rank1_update(&mut a, x, 1.0);
        b.axpy(r, x, 1.0);
    }
    Ok(SpdFactor::new(&a, "batch ridge design")?.solve(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn init_is_identity() {
        let s = RidgeState::new(2, 1.0).unwrap();
        assert_eq!(s.a(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(s.b(), &DVector::<f64>::zeros(2));
        assert_eq!(RidgeState::new(3, 1.0).unwrap().theta(), &DVector::<f64>::zeros(3));
        let s5 = RidgeState::new(5, 1.0).unwrap();
        let mut e = DVector::zeros(5);
        e[3] = 1.0;
        assert_eq!(s5.quad_form(&e), 1.0);
        let u = v(&[0.6, 0.0, 0.8, 0.0, 0.0]);
        assert!((s5.quad_form(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn init_rejects_bad_parameters() {
        assert!(RidgeState::new(0, 1.0).is_err());
        assert!(RidgeState::new(2, 0.0).is_err());
        assert!(RidgeState::new(2, -1.0).is_err());
    }

    #[test]
    fn single_update_examples() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        let x = v(&[1.0, 0.0]);
        s.update(&x, 1.0, Sign::Add).unwrap();
        assert_eq!(s.a(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert_eq!(s.b(), &v(&[1.0, 0.0]));
        assert!((s.theta() - v(&[0.5, 0.0])).amax() < 1e-15);
        assert!((s.quad_form(&x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn remove_undoes_add_exactly() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        let x = v(&[1.0, 0.0]);
        s.update(&x, 1.0, Sign::Add).unwrap();
        s.update(&x, 1.0, Sign::Remove).unwrap();
        assert_eq!(s.a(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(s.b(), &DVector::<f64>::zeros(2));
        assert_eq!(s.n_obs(), 0);
    }

    #[test]
    fn downdate_of_empty_state_is_rejected() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        let err = s.update(&v(&[1.0, 0.0]), 1.0, Sign::Remove).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        assert!(matches!(s.update(&v(&[f64::NAN, 0.0]), 1.0, Sign::Add), Err(Error::NonFinite(_))));
        assert!(matches!(s.update(&v(&[1.0, 0.0]), f64::INFINITY, Sign::Add), Err(Error::NonFinite(_))));
        assert!(s.update(&v(&[1.0]), 1.0, Sign::Add).is_err());
        assert_eq!(s.n_obs(), 0);
    }

    #[test]
    fn fit_batch_ols_needs_full_rank() {
        let x = v(&[1.0, 0.0]);
        assert!(fit_batch([(&x, 1.0)], 2, 0.0).is_err());
        let theta = fit_batch([(&x, 1.0)], 2, 1.0).unwrap();
        assert!((theta - v(&[0.5, 0.0])).amax() < 1e-15);
    }

    proptest! {
        #[test]
        fn exploration_never_grows_and_is_bounded(
            xs in prop::collection::vec(prop::collection::vec(-0.5f64..0.5, 3), 1..20),
            probe in prop::collection::vec(-0.5f64..0.5, 3),
            lambda in 0.1f64..3.0,
        ) {
            let probe = v(&probe);
            let mut s = RidgeState::new(3, lambda).unwrap();
            let mut last = s.quad_form(&probe);
            prop_assert!(last <= probe.norm_squared() / lambda + 1e-12);
            for x in &xs {
                s.update(&v(x), 0.3, Sign::Add).unwrap();
                let q = s.quad_form(&probe);
                prop_assert!(q <= last + 1e-12);
                prop_assert!(q <= probe.norm_squared() / lambda + 1e-12);
                last = q;
            }
        }
    }
}
