//! Arm-selection policies behind one select/observe contract.
//!
//! `select` never mutates the policy; `observe` consumes the [`Selection`] it
//! answers, so a reward can only be fed back for the arm that was chosen at the
//! policy's next step. Replay evaluation relies on this to discard unmatched
//! events without touching policy state.

mod baselines;
mod linucb;
mod modified;
mod pslinucb;

use std::hash::Hasher;

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::detect::{DetectionConfig, NormHalf, Threshold, DEFAULT_SPLIT_LAMBDA};
use crate::error::{Error, Result};
use crate::model::{ArmId, ContextEvent};

pub use baselines::{RandomPolicy, Ucb1};
pub use linucb::{LinUcbDisjoint, LinUcbHybrid, LinUcbUniform};
pub use modified::ModifiedPsLinUcb;
pub use pslinucb::{DisjointArmModels, HybridArmModels, PsLinUcbDisjoint, PsLinUcbHybrid};

/// Index value computed for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmIndex {
    pub arm: ArmId,
    pub value: f64,
}

/// A policy's choice at one step.
#[derive(Debug, PartialEq)]
pub struct Selection {
    step: u64,
    arm: ArmId,
    indices: Vec<ArmIndex>,
    forced: bool,
}

impl Selection {
    pub fn new(step: u64, arm: ArmId, indices: Vec<ArmIndex>, forced: bool) -> Self {
        Selection { step, arm, indices, forced }
    }

    pub fn arm(&self) -> ArmId {
        self.arm
    }

    /// 1-based step this selection belongs to.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Index values of every candidate (empty for policies without indices).
    pub fn indices(&self) -> &[ArmIndex] {
        &self.indices
    }

    /// True when the arm was played by a forced exploration schedule.
    pub fn forced(&self) -> bool {
        self.forced
    }
}

/// What a restart reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restart {
    /// Models of one arm were rebuilt from its window.
    Arm(ArmId),
    /// Every arm was reset.
    Global,
}

/// Per-step diagnostics returned by `observe`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    pub statistic: Option<f64>,
    pub threshold: Option<f64>,
    pub restart: Option<Restart>,
}

impl Observation {
    pub fn tested(&self) -> bool {
        self.statistic.is_some()
    }

    pub fn detected(&self) -> bool {
        self.restart.is_some()
    }
}

pub trait Policy: Send {
    fn label(&self) -> &str;

    fn select(&self, event: &ContextEvent, rng: &mut dyn RngCore) -> Result<Selection>;

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation>;

    /// Number of observed rewards so far.
    fn steps(&self) -> u64;

    /// Hash of the learned state, for checking that state did not change.
    fn state_digest(&self) -> u64;
}

/// Feature dimensions and arm count a policy is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// User feature dimension `d`.
    pub d: usize,
    /// Arm feature dimension `m`.
    pub m: usize,
    /// Number of arms `K`.
    pub arms: usize,
}

impl Dims {
    /// Cross feature dimension `k = d·m`.
    pub fn k(&self) -> usize {
        self.d * self.m
    }
}

/// Parameters of the split-window test used by the modified policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub b: Threshold,
    pub c: Threshold,
    pub delta1: Option<f64>,
    pub lambda_pre: f64,
    pub norm_half: NormHalf,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            b: Threshold::Auto,
            c: Threshold::Auto,
            delta1: None,
            lambda_pre: DEFAULT_SPLIT_LAMBDA,
            norm_half: NormHalf::Test,
        }
    }
}

/// Hyper-parameters shared by all policies; each policy reads the fields it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Exploration weight `α`.
    pub alpha: f64,
    /// Window length `ω`.
    pub window: usize,
    /// Residual threshold `δ`.
    pub delta: f64,
    /// Forced-exploration rate `γ` of the modified policy.
    pub gamma: Option<f64>,
    /// Ridge regularizer `λ`.
    pub lambda: f64,
    pub rng_seed: u64,
    /// Horizon `T` used by derived thresholds.
    pub horizon: Option<u64>,
    pub split: SplitParams,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            alpha: 1.0,
            window: 100,
            delta: 0.35,
            gamma: None,
            lambda: 1.0,
            rng_seed: 0,
            horizon: None,
            split: SplitParams::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("α must be a finite non-negative number, got {}", self.alpha)));
        }
        if self.window == 0 {
            return Err(Error::Config("ω must be at least 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("δ must be positive, got {}", self.delta)));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("λ must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    pub(crate) fn split_detection(&self) -> Result<DetectionConfig> {
        let horizon = self
            .horizon
            .ok_or_else(|| Error::Config("the split-window test needs the horizon T".into()))?;
        let cfg = DetectionConfig::SplitWindow {
            b: self.split.b,
            c: self.split.c,
            delta1: self.split.delta1,
            horizon,
            lambda_pre: self.split.lambda_pre,
            norm_half: self.split.norm_half,
        };
        cfg.validate(self.window).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

/// `α = √(2d·log(T/δ₀))` with `δ₀ = 1/T`.
pub fn theory_alpha(d: usize, horizon: u64) -> f64 {
    let t = horizon as f64;
    (2.0 * d as f64 * (t * t).ln()).sqrt()
}

/// `γ = √(K·M·ω/T)`.
pub fn theory_gamma(arms: usize, segments: usize, window: usize, horizon: u64) -> f64 {
    ((arms * segments * window) as f64 / horizon as f64).sqrt()
}

/// Every policy the library provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Random,
    Ucb1,
    LinucbUniform,
    LinucbDisjoint,
    LinucbHybrid,
    PslinucbDisjoint,
    PslinucbHybrid,
    ModifiedPslinucb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::Random,
        PolicyKind::Ucb1,
        PolicyKind::LinucbUniform,
        PolicyKind::LinucbDisjoint,
        PolicyKind::LinucbHybrid,
        PolicyKind::PslinucbDisjoint,
        PolicyKind::PslinucbHybrid,
        PolicyKind::ModifiedPslinucb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::LinucbUniform => "linucb-uniform",
            PolicyKind::LinucbDisjoint => "linucb-disjoint",
            PolicyKind::LinucbHybrid => "linucb-hybrid",
            PolicyKind::PslinucbDisjoint => "pslinucb-disjoint",
            PolicyKind::PslinucbHybrid => "pslinucb-hybrid",
            PolicyKind::ModifiedPslinucb => "modified-pslinucb",
        }
    }

    pub fn uses_alpha(self) -> bool {
        !matches!(self, PolicyKind::Random | PolicyKind::Ucb1)
    }

    pub fn uses_window(self) -> bool {
        matches!(self, PolicyKind::PslinucbDisjoint | PolicyKind::PslinucbHybrid | PolicyKind::ModifiedPslinucb)
    }

    pub fn uses_delta(self) -> bool {
        matches!(self, PolicyKind::PslinucbDisjoint | PolicyKind::PslinucbHybrid)
    }

    /// Policies that assume the same fixed arm set at every step.
    pub fn needs_fixed_arms(self) -> bool {
        matches!(self, PolicyKind::ModifiedPslinucb)
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// Build a boxed policy of the given kind.
pub fn build_policy(kind: PolicyKind, label: &str, dims: Dims, config: &PolicyConfig) -> Result<Box<dyn Policy>> {
    config.validate()?;
    Ok(match kind {
        PolicyKind::Random => Box::new(RandomPolicy::new(label)),
        PolicyKind::Ucb1 => Box::new(Ucb1::new(label)),
        PolicyKind::LinucbUniform => Box::new(LinUcbUniform::new(label, dims, config)?),
        PolicyKind::LinucbDisjoint => Box::new(LinUcbDisjoint::new(label, dims, config)?),
        PolicyKind::LinucbHybrid => Box::new(LinUcbHybrid::new(label, dims, config)?),
        PolicyKind::PslinucbDisjoint => Box::new(PsLinUcbDisjoint::new(label, dims, config)?),
        PolicyKind::PslinucbHybrid => Box::new(PsLinUcbHybrid::new(label, dims, config)?),
        PolicyKind::ModifiedPslinucb => Box::new(ModifiedPsLinUcb::new(label, dims, config)?),
    })
}

/// Highest index wins; ties go to the lowest arm id.
pub(crate) fn argmax(indices: &[ArmIndex]) -> Result<ArmId> {
    let mut best: Option<ArmIndex> = None;
    for candidate in indices {
        if candidate.value.is_nan() {
            return Err(Error::NonFinite("arm index"));
        }
        best = match best {
            None => Some(*candidate),
            Some(b) if candidate.value > b.value || (candidate.value == b.value && candidate.arm < b.arm) => {
                Some(*candidate)
            }
            keep => keep,
        };
    }
    best.map(|b| b.arm)
        .ok_or_else(|| Error::InvalidParameter("no candidate arms to choose from".into()))
}

/// Confirm that `selection` answers `event` at the policy's next step.
pub(crate) fn check_selection(steps: u64, event: &ContextEvent, selection: &Selection, reward: f64) -> Result<()> {
    if selection.step != steps + 1 {
        return Err(Error::ContractViolation(format!(
            "selection for step {} observed at step {}",
            selection.step,
            steps + 1
        )));
    }
    if !event.contains(selection.arm) {
        return Err(Error::ContractViolation(format!("arm {} is not a candidate of this event", selection.arm)));
    }
    if !reward.is_finite() {
        return Err(Error::NonFinite("reward"));
    }
    Ok(())
}

pub(crate) fn hash_floats(h: &mut impl Hasher, values: &[f64]) {
    for v in values {
        h.write_u64(v.to_bits());
    }
}

pub(crate) fn hasher() -> std::collections::hash_map::DefaultHasher {
    std::collections::hash_map::DefaultHasher::new()
}

pub(crate) fn user_vector(event: &ContextEvent) -> &DVector<f64> {
    event.user.as_vector()
}

pub(crate) fn check_user_dim(event: &ContextEvent, d: usize) -> Result<()> {
    if event.user.dim() != d {
        return Err(Error::Dimension(format!("policy expects {d}-dim users, event has {}", event.user.dim())));
    }
    Ok(())
}

/// Grow a per-arm table so `arm` has a slot.
pub(crate) fn slot<T>(table: &mut Vec<Option<T>>, arm: ArmId) -> &mut Option<T> {
    if table.len() <= arm.index() {
        table.resize_with(arm.index() + 1, || None);
    }
    &mut table[arm.index()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx(arm: u32, value: f64) -> ArmIndex {
        ArmIndex { arm: ArmId::new(arm).unwrap(), value }
    }

    #[test]
    fn argmax_breaks_ties_by_lowest_id() {
        assert_eq!(argmax(&[idx(3, 1.0), idx(2, 1.0), idx(5, 0.5)]).unwrap().get(), 2);
        assert_eq!(argmax(&[idx(1, 0.0), idx(2, 0.1)]).unwrap().get(), 2);
        assert!(argmax(&[]).is_err());
        assert!(argmax(&[idx(1, f64::NAN)]).is_err());
    }

    #[test]
    fn theory_parameters() {
        let alpha = theory_alpha(5, 100);
        assert!((alpha - (10.0 * 10000f64.ln()).sqrt()).abs() < 1e-12);
        assert!((theory_gamma(10, 2, 100, 5000) - 0.4f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn policy_kind_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.name().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("thompson".parse::<PolicyKind>().is_err());
    }

    proptest! {
        #[test]
        fn argmax_is_shift_invariant(
            values in prop::collection::vec(-8i32..8, 1..12),
            shift in -1000i32..1000,
        ) {
            let base: Vec<ArmIndex> = values.iter().enumerate()
                .map(|(i, v)| idx(i as u32 + 1, *v as f64 * 0.25)).collect();
            let shifted: Vec<ArmIndex> = base.iter()
                .map(|a| ArmIndex { arm: a.arm, value: a.value + shift as f64 }).collect();
            prop_assert_eq!(argmax(&base).unwrap(), argmax(&shifted).unwrap());
        }
    }
}
