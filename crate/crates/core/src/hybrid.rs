//! Coupled statistics for the hybrid payoff model.
//!
//! The reward model is `xᵀθ_a + zᵀβ` with `β` shared by every arm. The global
//! matrix `A₀` is the Schur complement of the joint ridge normal equations:
//! `A₀ = λI + Σ zzᵀ − Σ_a B_aᵀ A_a⁻¹ B_a`, so `β̂ = A₀⁻¹ b₀` and
//! `θ̂_a = A_a⁻¹ (b_a − B_a β̂)` are exactly the joint ridge solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{coupling, ensure_finite, rank1_update, SpdFactor};
use crate::ridge::Sign;

/// Numerical slack below zero tolerated for the exploration term.
pub const CONFIDENCE_NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Global statistics `(A₀, b₀)` and the cached estimate `β̂`.
#[derive(Debug, Clone)]
pub struct HybridGlobalState {
    a0: DMatrix<f64>,
    b0: DVector<f64>,
    factor: SpdFactor,
    beta: DVector<f64>,
}

impl HybridGlobalState {
    pub fn new(k: usize, lambda: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Dimension("shared dimension must be positive".into()));
        }
        check_lambda(lambda)?;
        let a0 = DMatrix::identity(k, k) * lambda;
        let factor = SpdFactor::new(&a0, "hybrid global matrix")?;
        Ok(HybridGlobalState { a0, b0: DVector::zeros(k), factor, beta: DVector::zeros(k) })
    }

    fn commit(&mut self, a0: DMatrix<f64>, b0: DVector<f64>) -> Result<()> {
        let factor = SpdFactor::new(&a0, "hybrid global matrix")?;
        self.beta = factor.solve(&b0);
        self.a0 = a0;
        self.b0 = b0;
        self.factor = factor;
        Ok(())
    }

    /// `β̂ = A₀⁻¹ b₀`.
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn b0(&self) -> &DVector<f64> {
        &self.b0
    }

    pub fn dim(&self) -> usize {
        self.b0.len()
    }

    pub(crate) fn hash_into(&self, h: &mut impl std::hash::Hasher) {
        crate::policy::hash_floats(h, self.a0.as_slice());
        crate::policy::hash_floats(h, self.b0.as_slice());
    }
}

/// Per-arm statistics `(A_a, B_a, b_a)`.
#[derive(Debug, Clone)]
pub struct HybridArmState {
    a: DMatrix<f64>,
    big_b: DMatrix<f64>,
    b: DVector<f64>,
    n_obs: usize,
    factor: SpdFactor,
}

impl HybridArmState {
    pub fn new(d: usize, k: usize, lambda: f64) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::Dimension("hybrid arm dimensions must be positive".into()));
        }
        check_lambda(lambda)?;
        let a = DMatrix::identity(d, d) * lambda;
        let factor = SpdFactor::new(&a, "hybrid arm matrix")?;
        Ok(HybridArmState { a, big_b: DMatrix::zeros(d, k), b: DVector::zeros(d), n_obs: 0, factor })
    }

    /// Arm-only update: `A ± xxᵀ`, `B ± xzᵀ`, `b ± r x`. This is the whole
    /// update for models that are not coupled to a global state.
    pub fn local_update(&mut self, x: &DVector<f64>, z: &DVector<f64>, r: f64, sign: Sign) -> Result<()> {
        self.check_inputs(x, z, r)?;
        let next = self.updated(x, z, r, sign)?;
        *self = next;
        Ok(())
    }

    fn check_inputs(&self, x: &DVector<f64>, z: &DVector<f64>, r: f64) -> Result<()> {
        if x.len() != self.a.nrows() || z.len() != self.big_b.ncols() {
            return Err(Error::Dimension(format!(
                "expected (d, k) = ({}, {}), got ({}, {})",
                self.a.nrows(),
                self.big_b.ncols(),
                x.len(),
                z.len()
            )));
        }
        ensure_finite(x.as_slice(), "hybrid context")?;
        ensure_finite(z.as_slice(), "hybrid cross feature")?;
        ensure_finite(&[r], "hybrid reward")
    }

    fn updated(&self, x: &DVector<f64>, z: &DVector<f64>, r: f64, sign: Sign) -> Result<Self> {
        let n_obs = match sign {
            Sign::Add => self.n_obs + 1,
            Sign::Remove => self
                .n_obs
                .checked_sub(1)
                .ok_or_else(|| Error::ContractViolation("downdate of an empty hybrid arm".into()))?,
        };
        let s = sign.factor();
        let mut a = self.a.clone();
        rank1_update(&mut a, x, s);
        let mut big_b = self.big_b.clone();
        big_b.ger(s, x, z, 1.0);
        let b = &self.b + x * (s * r);
        let factor = SpdFactor::new(&a, "hybrid arm matrix")?;
        Ok(HybridArmState { a, big_b, b, n_obs, factor })
    }

    /// `Bᵀ A⁻¹ B` and `Bᵀ A⁻¹ b`.
    fn coupling(&self) -> (DMatrix<f64>, DVector<f64>) {
        coupling(&self.factor, &self.big_b, &self.b)
    }

    /// `θ̂_a = A⁻¹ (b − B β̂)`.
    pub fn theta(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(&(&self.b - &self.big_b * beta))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn big_b(&self) -> &DMatrix<f64> {
        &self.big_b
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub(crate) fn hash_into(&self, h: &mut impl std::hash::Hasher) {
        crate::policy::hash_floats(h, self.a.as_slice());
        crate::policy::hash_floats(h, self.big_b.as_slice());
        crate::policy::hash_floats(h, self.b.as_slice());
        h.write_usize(self.n_obs);
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("regularizer must be positive, got {lambda}")))
    }
}

/// Add or remove one observation of `arm`, keeping `global` coupled.
///
/// The old coupling `BᵀA⁻¹B` is added back to `A₀` before the arm changes and
/// the new one subtracted afterwards, together with `± zzᵀ` and `± r z`. Both
/// states are left untouched if any step fails.
pub fn hybrid_observe(
    global: &mut HybridGlobalState,
    arm: &mut HybridArmState,
    x: &DVector<f64>,
    z: &DVector<f64>,
    r: f64,
    sign: Sign,
) -> Result<()> {
    if z.len() != global.dim() {
        return Err(Error::Dimension(format!("expected {}-dim cross feature, got {}", global.dim(), z.len())));
    }
    arm.check_inputs(x, z, r)?;
    let s = sign.factor();

    let (old_bb, old_bb_vec) = arm.coupling();
    let mut a0 = &global.a0 + old_bb;
    let mut b0 = &global.b0 + old_bb_vec;

    let next = arm.updated(x, z, r, sign)?;

    let (new_bb, new_bb_vec) = next.coupling();
    rank1_update(&mut a0, z, s);
    a0 -= new_bb;
    b0.axpy(s * r, z, 1.0);
    b0 -= new_bb_vec;

    global.commit(a0, b0)?;
    *arm = next;
    Ok(())
}

/// `(β̂, θ̂_a)`.
pub fn hybrid_solve(global: &HybridGlobalState, arm: &HybridArmState) -> (DVector<f64>, DVector<f64>) {
    let beta = global.beta().clone();
    let theta = arm.theta(&beta);
    (beta, theta)
}

/// The three parts of the hybrid exploration term; callers take `α √total`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceTerms {
    /// `zᵀA₀⁻¹z + xᵀA⁻¹x`.
    pub first: f64,
    /// `−2 zᵀA₀⁻¹BᵀA⁻¹x`.
    pub second: f64,
    /// `xᵀP A₀⁻¹ Pᵀx` with `P = A⁻¹B`.
    pub third: f64,
}

impl ConfidenceTerms {
    pub fn total(&self) -> f64 {
        self.first + self.second + self.third
    }
}

pub fn confidence_parts(
    global: &HybridGlobalState,
    arm: &HybridArmState,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> ConfidenceTerms {
    let a0_inv_z = global.factor.solve(z);
    let first = z.dot(&a0_inv_z) + arm.factor.inv_quad(x);
    let a_inv_x = arm.factor.solve(x);
    let pt_x = arm.big_b.tr_mul(&a_inv_x);
    let second = -2.0 * a0_inv_z.dot(&pt_x);
    let third = global.factor.inv_quad(&pt_x);
    ConfidenceTerms { first, second, third }
}

/// Exploration term `s = s⁽¹⁾ + s⁽²⁾ + s⁽³⁾`, with tiny negative rounding clamped to 0.
pub fn confidence_terms(
    global: &HybridGlobalState,
    arm: &HybridArmState,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<f64> {
    let s = confidence_parts(global, arm, x, z).total();
    if !s.is_finite() {
        return Err(Error::NonFinite("hybrid confidence term"));
    }
    if s < -CONFIDENCE_NEGATIVE_TOLERANCE {
        return Err(Error::NotPositiveDefinite("hybrid confidence term is negative"));
    }
    Ok(s.max(0.0))
}

/// Replace the coupling of `cum` in `global` by the couplings of `pre` (the arm
/// before the change) and `cur` (the arm after it).
pub fn detach_arm(
    global: &mut HybridGlobalState,
    cum: &HybridArmState,
    pre: &HybridArmState,
    cur: &HybridArmState,
) -> Result<()> {
    let (cum_bb, cum_vec) = cum.coupling();
    let (pre_bb, pre_vec) = pre.coupling();
    let (cur_bb, cur_vec) = cur.coupling();
    let a0 = &global.a0 + cum_bb - pre_bb - cur_bb;
    let b0 = &global.b0 + cum_vec - pre_vec - cur_vec;
    global.commit(a0, b0)
}
