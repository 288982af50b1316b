//! Sliding windows and change-detection statistics.
//!
//! Two tests are provided. The residual test compares the mean prediction error
//! of a model fitted before the window against a fixed threshold `δ`. The
//! split-window test fits on the first half of the window, measures the mean
//! error on the second half, and compares it to `b + c` where both thresholds
//! can be derived from the window contents and the horizon.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank1_update, SpdFactor};
use crate::ridge::fit_batch;

/// Ridge applied to the split-window fit and its threshold matrix by default.
pub const DEFAULT_SPLIT_LAMBDA: f64 = 1e-6;

/// One observation held in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEntry {
    pub x: DVector<f64>,
    pub z: Option<DVector<f64>>,
    pub r: f64,
}

/// Bounded FIFO of the most recent observations of one arm.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    capacity: usize,
    entries: VecDeque<WindowEntry>,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("window length must be at least 1".into()));
        }
        Ok(SlidingWindow { capacity, entries: VecDeque::with_capacity(capacity) })
    }

    /// Append at the back. When already full the oldest entry is evicted and returned.
    pub fn push(&mut self, entry: WindowEntry) -> Option<WindowEntry> {
        let evicted = if self.entries.len() == self.capacity { self.entries.pop_front() } else { None };
        self.entries.push_back(entry);
        evicted
    }

    pub fn pop_front(&mut self) -> Option<WindowEntry> {
        self.entries.pop_front()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &WindowEntry> {
        self.entries.iter()
    }

    /// Entries `1..=⌊ω/2⌋` and `⌊ω/2⌋+1..=ω` of a full window.
    pub fn halves(&self) -> (impl Iterator<Item = &WindowEntry>, impl Iterator<Item = &WindowEntry>) {
        let half = self.capacity / 2;
        (self.entries.iter().take(half), self.entries.iter().skip(half))
    }

    pub(crate) fn hash_into(&self, h: &mut impl std::hash::Hasher) {
        h.write_usize(self.entries.len());
        for e in &self.entries {
            crate::policy::hash_floats(h, e.x.as_slice());
            if let Some(z) = &e.z {
                crate::policy::hash_floats(h, z.as_slice());
            }
            crate::policy::hash_floats(h, &[e.r]);
        }
    }
}

fn require_full(window: &SlidingWindow) -> Result<()> {
    if window.is_full() {
        Ok(())
    } else {
        Err(Error::ContractViolation(format!(
            "window holds {} of {} entries",
            window.len(),
            window.capacity()
        )))
    }
}

/// `|(1/ω) Σ (predict(s) − r_s)|` over a full window.
pub fn residual_statistic(window: &SlidingWindow, predict: impl Fn(&WindowEntry) -> f64) -> Result<f64> {
    require_full(window)?;
    let sum: f64 = window.iter().map(|e| predict(e) - e.r).sum();
    Ok((sum / window.capacity() as f64).abs())
}

/// Fit on the first half of a full window, test on the second half.
/// Returns `(|(2/ω) Σ_{second half} (xᵀθ̂ − r)|, θ̂)`.
pub fn split_window_statistic(window: &SlidingWindow, lambda_pre: f64) -> Result<(f64, DVector<f64>)> {
    require_full(window)?;
    if window.capacity() < 2 {
        return Err(Error::InvalidParameter("split-window test needs ω ≥ 2".into()));
    }
    let d = window.iter().next().map(|e| e.x.len()).unwrap_or(0);
    let (first, second) = window.halves();
    let theta = fit_batch(first.map(|e| (&e.x, e.r)), d, lambda_pre)?;
    let sum: f64 = second.map(|e| e.x.dot(&theta) - e.r).sum();
    Ok((((2.0 / window.capacity() as f64) * sum).abs(), theta))
}

/// Which half of the window the `‖x‖_{Ã⁻¹}` sum of the `b` threshold runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormHalf {
    /// Points the fitted model is tested on.
    #[default]
    Test,
    /// Points the model was fitted on.
    Estimation,
}

/// `√(2d·log(ω/δ₁)) · (2/ω) · Σ_{i ∈ points} ‖x_i‖_{Ã⁻¹}` with
/// `Ã = λ_pre I + Σ_{estimation} x xᵀ`.
pub fn threshold_b<'a>(
    estimation: impl IntoIterator<Item = &'a DVector<f64>>,
    points: impl IntoIterator<Item = &'a DVector<f64>>,
    d: usize,
    omega: usize,
    delta1: f64,
    lambda_pre: f64,
) -> Result<f64> {
    if !(delta1 > 0.0 && delta1 < 1.0) {
        return Err(Error::InvalidParameter(format!("δ₁ must lie in (0, 1), got {delta1}")));
    }
    if omega == 0 || d == 0 {
        return Err(Error::InvalidParameter("b threshold needs ω ≥ 1 and d ≥ 1".into()));
    }
    if lambda_pre < 0.0 {
        return Err(Error::InvalidParameter("λ_pre must be non-negative".into()));
    }
    let mut a_tilde = DMatrix::identity(d, d) * lambda_pre;
    for x in estimation {
        rank1_update(&mut a_tilde, x, 1.0);
    }
    let points: Vec<&DVector<f64>> = points.into_iter().collect();
    if points.iter().all(|x| x.iter().all(|&v| v == 0.0)) {
        return Ok(0.0);
    }
    let factor = SpdFactor::new(&a_tilde, "b-threshold design")?;
    let norm_sum: f64 = points.iter().map(|x| factor.inv_quad(x).max(0.0).sqrt()).sum();
    let scale = (2.0 * d as f64 * (omega as f64 / delta1).ln()).sqrt();
    Ok(scale * (2.0 / omega as f64) * norm_sum)
}

/// `b` evaluated on a full window.
pub fn threshold_b_for_window(window: &SlidingWindow, delta1: f64, lambda_pre: f64, half: NormHalf) -> Result<f64> {
    require_full(window)?;
    let d = window.iter().next().map(|e| e.x.len()).unwrap_or(0);
    let (first, second) = window.halves();
    let estimation = first.map(|e| &e.x);
    match half {
        NormHalf::Test => threshold_b(estimation, second.map(|e| &e.x), d, window.capacity(), delta1, lambda_pre),
        NormHalf::Estimation => {
            let (again, _) = window.halves();
            threshold_b(estimation, again.map(|e| &e.x), d, window.capacity(), delta1, lambda_pre)
        }
    }
}

/// `c = √((2/ω)·log(2T))`.
pub fn threshold_c(omega: usize, horizon: u64) -> Result<f64> {
    if omega == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("c threshold needs ω ≥ 1 and T ≥ 1".into()));
    }
    Ok(((2.0 / omega as f64) * (2.0 * horizon as f64).ln()).sqrt())
}

/// `δ₁ = 1/(2T²)`.
pub fn default_delta1(horizon: u64) -> f64 {
    1.0 / (2.0 * (horizon as f64).powi(2))
}

/// A threshold that is either given or derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threshold {
    Auto,
    Fixed(f64),
}

/// Detection parameters for either test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DetectionConfig {
    /// Residual test against `δ`.
    Residual { delta: f64 },
    /// Split-window test against `b + c`.
    SplitWindow {
        b: Threshold,
        c: Threshold,
        /// `None` means `1/(2T²)`.
        delta1: Option<f64>,
        horizon: u64,
        lambda_pre: f64,
        norm_half: NormHalf,
    },
}

impl DetectionConfig {
    pub fn validate(&self, omega: usize) -> Result<()> {
        match self {
            DetectionConfig::Residual { delta } => {
                if !(*delta > 0.0) {
                    return Err(Error::InvalidParameter(format!("δ must be positive, got {delta}")));
                }
            }
            DetectionConfig::SplitWindow { b, c, delta1, horizon, lambda_pre, .. } => {
                if omega % 2 != 0 {
                    return Err(Error::InvalidParameter(format!("split-window test needs an even ω, got {omega}")));
                }
                if *horizon == 0 {
                    return Err(Error::InvalidParameter("horizon must be positive".into()));
                }
                if let Some(d1) = delta1 {
                    if !(*d1 > 0.0 && *d1 < 1.0) {
                        return Err(Error::InvalidParameter(format!("δ₁ must lie in (0, 1), got {d1}")));
                    }
                }
                for t in [b, c] {
                    if let Threshold::Fixed(v) = t {
                        if !(*v >= 0.0) {
                            return Err(Error::InvalidParameter(format!("thresholds must be non-negative, got {v}")));
                        }
                    }
                }
                if !(*lambda_pre >= 0.0) {
                    return Err(Error::InvalidParameter("λ_pre must be non-negative".into()));
                }
            }
        }
        Ok(())
    }
}

/// Result of one split-window test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitTest {
    pub statistic: f64,
    pub b: f64,
    pub c: f64,
}

impl SplitTest {
    pub fn detected(&self) -> bool {
        self.statistic >= self.b + self.c
    }
}

/// Run the split-window test on a full window with thresholds resolved from `config`.
pub fn split_window_test(window: &SlidingWindow, config: &DetectionConfig) -> Result<SplitTest> {
    let DetectionConfig::SplitWindow { b, c, delta1, horizon, lambda_pre, norm_half } = config else {
        return Err(Error::InvalidParameter("split-window test needs a split-window configuration".into()));
    };
    let (statistic, _) = split_window_statistic(window, *lambda_pre)?;
    let delta1 = delta1.unwrap_or_else(|| default_delta1(*horizon));
    let b = match b {
        Threshold::Fixed(v) => *v,
        Threshold::Auto => threshold_b_for_window(window, delta1, *lambda_pre, *norm_half)?,
    };
    let c = match c {
        Threshold::Fixed(v) => *v,
        Threshold::Auto => threshold_c(window.capacity(), *horizon)?,
    };
    Ok(SplitTest { statistic, b, c })
}
