//! Piecewise-stationary LinUCB under the disjoint and hybrid payoff models.
//!
//! Each arm keeps three models: `pre` (observations after the last restart and
//! before the window), `cur` (the window) and `cum` (everything since the last
//! restart). Arms are selected with `cum`. Once an arm's window is full, `pre`
//! predicts the window's rewards; a mean residual of at least `δ` restarts the
//! arm from `cur`, otherwise the window slides by one observation.

use std::hash::Hasher;

use rand::RngCore;

use super::linucb::{check_arm_dim, disjoint_select, hybrid_select};
use super::{
    check_selection, check_user_dim, hasher, slot, user_vector, Dims, Observation, Policy, PolicyConfig, Restart,
    Selection,
};
use crate::detect::{residual_statistic, SlidingWindow, WindowEntry};
use crate::error::{Error, Result};
use crate::hybrid::{detach_arm, hybrid_observe, HybridArmState, HybridGlobalState};
use crate::model::{cross_feature, ArmId, ContextEvent};
use crate::ridge::{RidgeState, Sign};

/// The `pre`/`cur`/`cum` models and window of one disjoint arm.
#[derive(Debug, Clone)]
pub struct DisjointArmModels {
    pub pre: RidgeState,
    pub cur: RidgeState,
    pub cum: RidgeState,
    pub window: SlidingWindow,
}

#[derive(Debug, Clone)]
pub struct PsLinUcbDisjoint {
    label: String,
    alpha: f64,
    delta: f64,
    d: usize,
    fresh: RidgeState,
    fresh_window: SlidingWindow,
    arms: Vec<Option<DisjointArmModels>>,
    steps: u64,
}

impl PsLinUcbDisjoint {
    pub fn new(label: &str, dims: Dims, config: &PolicyConfig) -> Result<Self> {
        config.validate()?;
        Ok(PsLinUcbDisjoint {
            label: label.to_string(),
            alpha: config.alpha,
            delta: config.delta,
            d: dims.d,
            fresh: RidgeState::new(dims.d, config.lambda)?,
            fresh_window: SlidingWindow::new(config.window)?,
            arms: Vec::new(),
            steps: 0,
        })
    }

    pub fn models(&self, arm: ArmId) -> Option<&DisjointArmModels> {
        self.arms.get(arm.index()).and_then(Option::as_ref)
    }

    pub fn lambda(&self) -> f64 {
        self.fresh.lambda()
    }
}

impl Policy for PsLinUcbDisjoint {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, _rng: &mut dyn RngCore) -> Result<Selection> {
        check_user_dim(event, self.d)?;
        disjoint_select(self.steps + 1, event, self.alpha, &self.fresh, |a| self.models(a).map(|m| &m.cum))
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        let arm = selection.arm();
        let x = user_vector(event);
        let (fresh, fresh_window) = (&self.fresh, &self.fresh_window);
        let models = slot(&mut self.arms, arm).get_or_insert_with(|| DisjointArmModels {
            pre: fresh.clone(),
            cur: fresh.clone(),
            cum: fresh.clone(),
            window: fresh_window.clone(),
        });

        models.window.push(WindowEntry { x: x.clone(), z: None, r: reward });
        models.cur.update(x, reward, Sign::Add)?;
        models.cum.update(x, reward, Sign::Add)?;

        let mut outcome = Observation::default();
        if models.window.is_full() {
            let theta_pre = models.pre.theta();
            let statistic = residual_statistic(&models.window, |e| e.x.dot(theta_pre))?;
            outcome.statistic = Some(statistic);
            outcome.threshold = Some(self.delta);
            if statistic >= self.delta {
                models.pre = models.cur.clone();
                models.cum = models.cur.clone();
                models.cur = self.fresh.clone();
                models.window.clear();
                outcome.restart = Some(Restart::Arm(arm));
            } else {
                let oldest = models.window.pop_front().expect("window is full");
                models.pre.update(&oldest.x, oldest.r, Sign::Add)?;
                models.cur.update(&oldest.x, oldest.r, Sign::Remove)?;
            }
        }
        self.steps += 1;
        Ok(outcome)
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn state_digest(&self) -> u64 {
        let mut h = hasher();
        h.write_u64(self.steps);
        for (i, arm) in self.arms.iter().enumerate() {
            if let Some(m) = arm {
                h.write_usize(i);
                m.pre.hash_into(&mut h);
                m.cur.hash_into(&mut h);
                m.cum.hash_into(&mut h);
                m.window.hash_into(&mut h);
            }
        }
        h.finish()
    }
}

/// The `pre`/`cur`/`cum` arm statistics and window of one hybrid arm.
#[derive(Debug, Clone)]
pub struct HybridArmModels {
    pub pre: HybridArmState,
    pub cur: HybridArmState,
    pub cum: HybridArmState,
    pub window: SlidingWindow,
}

#[derive(Debug, Clone)]
pub struct PsLinUcbHybrid {
    label: String,
    alpha: f64,
    delta: f64,
    dims: Dims,
    global_pre: HybridGlobalState,
    global_cum: HybridGlobalState,
    fresh: HybridArmState,
    fresh_window: SlidingWindow,
    arms: Vec<Option<HybridArmModels>>,
    steps: u64,
}

impl PsLinUcbHybrid {
    pub fn new(label: &str, dims: Dims, config: &PolicyConfig) -> Result<Self> {
        config.validate()?;
        let global = HybridGlobalState::new(dims.k(), config.lambda)?;
        Ok(PsLinUcbHybrid {
            label: label.to_string(),
            alpha: config.alpha,
            delta: config.delta,
            dims,
            global_pre: global.clone(),
            global_cum: global,
            fresh: HybridArmState::new(dims.d, dims.k(), config.lambda)?,
            fresh_window: SlidingWindow::new(config.window)?,
            arms: Vec::new(),
            steps: 0,
        })
    }

    pub fn models(&self, arm: ArmId) -> Option<&HybridArmModels> {
        self.arms.get(arm.index()).and_then(Option::as_ref)
    }

    pub fn global_cum(&self) -> &HybridGlobalState {
        &self.global_cum
    }

    pub fn global_pre(&self) -> &HybridGlobalState {
        &self.global_pre
    }
}

impl Policy for PsLinUcbHybrid {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, _rng: &mut dyn RngCore) -> Result<Selection> {
        check_user_dim(event, self.dims.d)?;
        check_arm_dim(event, self.dims.m)?;
        hybrid_select(self.steps + 1, event, self.alpha, &self.global_cum, &self.fresh, |a| {
            self.models(a).map(|m| &m.cum)
        })
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        let arm = selection.arm();
        let x = user_vector(event);
        let candidate = event.candidate(arm).expect("checked above");
        let z = cross_feature(&event.user, &candidate.feature).as_vector().clone();
        let (fresh, fresh_window) = (&self.fresh, &self.fresh_window);
        let models = slot(&mut self.arms, arm).get_or_insert_with(|| HybridArmModels {
            pre: fresh.clone(),
            cur: fresh.clone(),
            cum: fresh.clone(),
            window: fresh_window.clone(),
        });

        models.window.push(WindowEntry { x: x.clone(), z: Some(z.clone()), r: reward });
        hybrid_observe(&mut self.global_cum, &mut models.cum, x, &z, reward, Sign::Add)?;
        models.cur.local_update(x, &z, reward, Sign::Add)?;

        let mut outcome = Observation::default();
        if models.window.is_full() {
            let beta_pre = self.global_pre.beta();
            let theta_pre = models.pre.theta(beta_pre);
            let statistic = residual_statistic(&models.window, |e| {
                let z = e.z.as_ref().expect("hybrid windows carry cross features");
                e.x.dot(&theta_pre) + z.dot(beta_pre)
            })?;
            outcome.statistic = Some(statistic);
            outcome.threshold = Some(self.delta);
            if statistic >= self.delta {
                detach_arm(&mut self.global_cum, &models.cum, &models.pre, &models.cur)?;
                self.global_pre = self.global_cum.clone();
                models.pre = models.cur.clone();
                models.cum = models.cur.clone();
                models.cur = self.fresh.clone();
                models.window.clear();
                outcome.restart = Some(Restart::Arm(arm));
            } else {
                let oldest = models.window.pop_front().expect("window is full");
                let oz = oldest
                    .z
                    .as_ref()
                    .ok_or_else(|| Error::ContractViolation("hybrid window entry without a cross feature".into()))?;
                hybrid_observe(&mut self.global_pre, &mut models.pre, &oldest.x, oz, oldest.r, Sign::Add)?;
                models.cur.local_update(&oldest.x, oz, oldest.r, Sign::Remove)?;
            }
        }
        self.steps += 1;
        Ok(outcome)
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn state_digest(&self) -> u64 {
        let mut h = hasher();
        h.write_u64(self.steps);
        self.global_pre.hash_into(&mut h);
        self.global_cum.hash_into(&mut h);
        for (i, arm) in self.arms.iter().enumerate() {
            if let Some(m) = arm {
                h.write_usize(i);
                m.pre.hash_into(&mut h);
                m.cur.hash_into(&mut h);
                m.cum.hash_into(&mut h);
                m.window.hash_into(&mut h);
            }
        }
        h.finish()
    }
}
