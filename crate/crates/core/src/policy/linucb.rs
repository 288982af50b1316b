//! Stationary LinUCB baselines under the uniform, disjoint and hybrid payoff models.

use std::hash::Hasher;

use rand::RngCore;

use super::{
    argmax, check_selection, check_user_dim, hasher, slot, user_vector, ArmIndex, Dims, Observation, Policy,
    PolicyConfig, Selection,
};
use crate::error::{Error, Result};
use crate::hybrid::{confidence_terms, hybrid_observe, HybridArmState, HybridGlobalState};
use crate::model::{cross_feature, ArmId, ContextEvent};
use crate::ridge::{RidgeState, Sign};

/// UCB selection over per-arm ridge models; arms without a model use `fresh`.
pub(crate) fn disjoint_select<'a>(
    step: u64,
    event: &ContextEvent,
    alpha: f64,
    fresh: &'a RidgeState,
    model: impl Fn(ArmId) -> Option<&'a RidgeState>,
) -> Result<Selection> {
    let x = user_vector(event);
    let indices: Vec<ArmIndex> = event
        .candidates
        .iter()
        .map(|c| ArmIndex { arm: c.arm, value: model(c.arm).unwrap_or(fresh).ucb_index(x, alpha) })
        .collect();
    let arm = argmax(&indices)?;
    Ok(Selection::new(step, arm, indices, false))
}

/// UCB selection for the hybrid model: `xᵀθ̂_a + zᵀβ̂ + α√s`.
pub(crate) fn hybrid_select<'a>(
    step: u64,
    event: &ContextEvent,
    alpha: f64,
    global: &HybridGlobalState,
    fresh: &'a HybridArmState,
    model: impl Fn(ArmId) -> Option<&'a HybridArmState>,
) -> Result<Selection> {
    let x = user_vector(event);
    let beta = global.beta();
    let mut indices = Vec::with_capacity(event.candidates.len());
    for c in &event.candidates {
        let arm = model(c.arm).unwrap_or(fresh);
        let z = cross_feature(&event.user, &c.feature);
        let z = z.as_vector();
        let theta = arm.theta(beta);
        let s = confidence_terms(global, arm, x, z)?;
        indices.push(ArmIndex { arm: c.arm, value: x.dot(&theta) + z.dot(beta) + alpha * s.sqrt() });
    }
    let arm = argmax(&indices)?;
    Ok(Selection::new(step, arm, indices, false))
}

pub(crate) fn check_arm_dim(event: &ContextEvent, m: usize) -> Result<()> {
    match event.candidates.iter().find(|c| c.feature.dim() != m) {
        Some(c) => Err(Error::Dimension(format!(
            "policy expects {m}-dim arm features, arm {} has {}",
            c.arm,
            c.feature.dim()
        ))),
        None => Ok(()),
    }
}

/// LinUCB with one ridge model per arm.
#[derive(Debug, Clone)]
pub struct LinUcbDisjoint {
    label: String,
    alpha: f64,
    d: usize,
    fresh: RidgeState,
    arms: Vec<Option<RidgeState>>,
    steps: u64,
}

impl LinUcbDisjoint {
    pub fn new(label: &str, dims: Dims, config: &PolicyConfig) -> Result<Self> {
        Ok(LinUcbDisjoint {
            label: label.to_string(),
            alpha: config.alpha,
            d: dims.d,
            fresh: RidgeState::new(dims.d, config.lambda)?,
            arms: Vec::new(),
            steps: 0,
        })
    }

    pub fn model(&self, arm: ArmId) -> Option<&RidgeState> {
        self.arms.get(arm.index()).and_then(Option::as_ref)
    }
}

impl Policy for LinUcbDisjoint {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, _rng: &mut dyn RngCore) -> Result<Selection> {
        check_user_dim(event, self.d)?;
        disjoint_select(self.steps + 1, event, self.alpha, &self.fresh, |a| self.model(a))
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        let fresh = &self.fresh;
        slot(&mut self.arms, selection.arm())
            .get_or_insert_with(|| fresh.clone())
            .update(user_vector(event), reward, Sign::Add)?;
        self.steps += 1;
        Ok(Observation::default())
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn state_digest(&self) -> u64 {
        let mut h = hasher();
        h.write_u64(self.steps);
        for (i, arm) in self.arms.iter().enumerate() {
            if let Some(model) = arm {
                h.write_usize(i);
                model.hash_into(&mut h);
            }
        }
        h.finish()
    }
}

/// LinUCB with a single preference vector over arm features.
#[derive(Debug, Clone)]
pub struct LinUcbUniform {
    label: String,
    alpha: f64,
    m: usize,
    shared: RidgeState,
    steps: u64,
}

impl LinUcbUniform {
    pub fn new(label: &str, dims: Dims, config: &PolicyConfig) -> Result<Self> {
        Ok(LinUcbUniform {
            label: label.to_string(),
            alpha: config.alpha,
            m: dims.m,
            shared: RidgeState::new(dims.m, config.lambda)?,
            steps: 0,
        })
    }

    pub fn model(&self) -> &RidgeState {
        &self.shared
    }
}

impl Policy for LinUcbUniform {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, _rng: &mut dyn RngCore) -> Result<Selection> {
        check_arm_dim(event, self.m)?;
        let indices: Vec<ArmIndex> = event
            .candidates
            .iter()
            .map(|c| ArmIndex { arm: c.arm, value: self.shared.ucb_index(c.feature.as_vector(), self.alpha) })
            .collect();
        let arm = argmax(&indices)?;
        Ok(Selection::new(self.steps + 1, arm, indices, false))
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        let y = &event.candidate(selection.arm()).expect("checked above").feature;
        self.shared.update(y.as_vector(), reward, Sign::Add)?;
        self.steps += 1;
        Ok(Observation::default())
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn state_digest(&self) -> u64 {
        let mut h = hasher();
        h.write_u64(self.steps);
        self.shared.hash_into(&mut h);
        h.finish()
    }
}

/// LinUCB under the hybrid payoff model.
#[derive(Debug, Clone)]
pub struct LinUcbHybrid {
    label: String,
    alpha: f64,
    dims: Dims,
    global: HybridGlobalState,
    fresh: HybridArmState,
    arms: Vec<Option<HybridArmState>>,
    steps: u64,
}

impl LinUcbHybrid {
    pub fn new(label: &str, dims: Dims, config: &PolicyConfig) -> Result<Self> {
        Ok(LinUcbHybrid {
            label: label.to_string(),
            alpha: config.alpha,
            dims,
            global: HybridGlobalState::new(dims.k(), config.lambda)?,
            fresh: HybridArmState::new(dims.d, dims.k(), config.lambda)?,
            arms: Vec::new(),
            steps: 0,
        })
    }

    pub fn global(&self) -> &HybridGlobalState {
        &self.global
    }

    pub fn model(&self, arm: ArmId) -> Option<&HybridArmState> {
        self.arms.get(arm.index()).and_then(Option::as_ref)
    }
}

impl Policy for LinUcbHybrid {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, _rng: &mut dyn RngCore) -> Result<Selection> {
        check_user_dim(event, self.dims.d)?;
        check_arm_dim(event, self.dims.m)?;
        hybrid_select(self.steps + 1, event, self.alpha, &self.global, &self.fresh, |a| self.model(a))
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        let candidate = event.candidate(selection.arm()).expect("checked above");
        let z = cross_feature(&event.user, &candidate.feature);
        let fresh = &self.fresh;
        let arm = slot(&mut self.arms, selection.arm()).get_or_insert_with(|| fresh.clone());
        hybrid_observe(&mut self.global, arm, user_vector(event), z.as_vector(), reward, Sign::Add)?;
        self.steps += 1;
        Ok(Observation::default())
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn state_digest(&self) -> u64 {
        let mut h = hasher();
        h.write_u64(self.steps);
        self.global.hash_into(&mut h);
        for (i, arm) in self.arms.iter().enumerate() {
            if let Some(model) = arm {
                h.write_usize(i);
                model.hash_into(&mut h);
            }
        }
        h.finish()
    }
}
