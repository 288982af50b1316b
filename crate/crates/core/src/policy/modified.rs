//! PSLinUCB with round-robin forced exploration and a split-window test.
//!
//! Step `t` computes `a = (t − τ) mod ⌊K/γ⌋`. For `1 ≤ a ≤ K` arm `a` is played;
//! otherwise the cum-model UCB index decides. A detection on any arm resets
//! every arm and sets `τ = t`.

use std::hash::Hasher;

use rand::RngCore;

use super::linucb::disjoint_select;
use super::{
    check_selection, check_user_dim, hasher, slot, user_vector, ArmIndex, Dims, Observation, Policy, PolicyConfig,
    Restart, Selection,
};
use crate::detect::{split_window_test, DetectionConfig, SlidingWindow, WindowEntry};
use crate::error::{Error, Result};
use crate::model::{ArmId, ContextEvent};
use crate::ridge::{RidgeState, Sign};

#[derive(Debug, Clone)]
pub struct ModifiedPsLinUcb {
    label: String,
    alpha: f64,
    d: usize,
    arms: usize,
    period: u64,
    detection: DetectionConfig,
    fresh: RidgeState,
    fresh_window: SlidingWindow,
    cum: Vec<Option<RidgeState>>,
    windows: Vec<Option<SlidingWindow>>,
    tau: u64,
    steps: u64,
    restarts: Vec<u64>,
    warnings: Vec<String>,
}

impl ModifiedPsLinUcb {
    pub fn new(label: &str, dims: Dims, config: &PolicyConfig) -> Result<Self> {
        config.validate()?;
        if dims.arms == 0 {
            return Err(Error::Config("the forced-exploration schedule needs K ≥ 1 arms".into()));
        }
        let gamma = config
            .gamma
            .ok_or_else(|| Error::Config("the modified policy needs an exploration rate γ".into()))?;
        let k = dims.arms as f64;
        if !(gamma > 0.0 && gamma <= k) {
            return Err(Error::Config(format!("γ must lie in (0, K] = (0, {}], got {gamma}", dims.arms)));
        }
        let period = (k / gamma).floor() as u64;
        if period < dims.arms as u64 {
            return Err(Error::Config(format!(
                "⌊K/γ⌋ = {period} is below K = {}; raise K/γ so every arm gets an exploration slot",
                dims.arms
            )));
        }
        let mut warnings = Vec::new();
        if period == dims.arms as u64 {
            warnings.push(format!(
                "⌊K/γ⌋ = K = {period}: slot a = 0 coincides with arm {period}, which is never forced"
            ));
        }
        let detection = config.split_detection()?;
        Ok(ModifiedPsLinUcb {
            label: label.to_string(),
            alpha: config.alpha,
            d: dims.d,
            arms: dims.arms,
            period,
            detection,
            fresh: RidgeState::new(dims.d, config.lambda)?,
            fresh_window: SlidingWindow::new(config.window)?,
            cum: Vec::new(),
            windows: Vec::new(),
            tau: 0,
            steps: 0,
            restarts: Vec::new(),
            warnings,
        })
    }

    /// Exploration period `⌊K/γ⌋`.
    pub fn period(&self) -> u64 {
        self.period
    }

    /// Step of the last global restart (0 before any).
    pub fn tau(&self) -> u64 {
        self.tau
    }

    /// Steps at which a global restart happened.
    pub fn restarts(&self) -> &[u64] {
        &self.restarts
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn model(&self, arm: ArmId) -> Option<&RidgeState> {
        self.cum.get(arm.index()).and_then(Option::as_ref)
    }

    pub fn window(&self, arm: ArmId) -> Option<&SlidingWindow> {
        self.windows.get(arm.index()).and_then(Option::as_ref)
    }

    /// Arm forced at step `t`, if any.
    pub fn forced_arm(&self, t: u64) -> Option<ArmId> {
        let a = (t - self.tau) % self.period;
        (1..=self.arms as u64).contains(&a).then(|| ArmId::from_index(a as usize - 1))
    }
}

impl Policy for ModifiedPsLinUcb {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, _rng: &mut dyn RngCore) -> Result<Selection> {
        check_user_dim(event, self.d)?;
        let step = self.steps + 1;
        match self.forced_arm(step) {
            Some(arm) => {
                if !event.contains(arm) {
                    return Err(Error::ContractViolation(format!(
                        "forced arm {arm} is not a candidate at step {step}; this policy needs a fixed arm set"
                    )));
                }
                let x = user_vector(event);
                let indices = event
                    .candidates
                    .iter()
                    .map(|c| ArmIndex { arm: c.arm, value: self.model(c.arm).unwrap_or(&self.fresh).ucb_index(x, self.alpha) })
                    .collect();
                Ok(Selection::new(step, arm, indices, true))
            }
            None => disjoint_select(step, event, self.alpha, &self.fresh, |a| self.model(a)),
        }
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        let arm = selection.arm();
        let x = user_vector(event);
        let fresh = &self.fresh;
        slot(&mut self.cum, arm).get_or_insert_with(|| fresh.clone()).update(x, reward, Sign::Add)?;
        let fresh_window = &self.fresh_window;
        let window = slot(&mut self.windows, arm).get_or_insert_with(|| fresh_window.clone());
        window.push(WindowEntry { x: x.clone(), z: None, r: reward });

        let mut outcome = Observation::default();
        if window.is_full() {
            let test = split_window_test(window, &self.detection)?;
            outcome.statistic = Some(test.statistic);
            outcome.threshold = Some(test.b + test.c);
            if test.detected() {
                self.cum.clear();
                self.windows.clear();
                self.tau = selection.step();
                self.restarts.push(self.tau);
                outcome.restart = Some(Restart::Global);
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
        h.write_u64(self.tau);
        for (i, arm) in self.cum.iter().enumerate() {
            if let Some(model) = arm {
                h.write_usize(i);
                model.hash_into(&mut h);
            }
        }
        for (i, w) in self.windows.iter().enumerate() {
            if let Some(w) = w {
                h.write_usize(i);
                w.hash_into(&mut h);
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Threshold;
    use crate::model::{ArmFeature, Candidate, UserFeature};
    use rand::SeedableRng;

    fn config(gamma: f64) -> PolicyConfig {
        PolicyConfig { gamma: Some(gamma), window: 4, horizon: Some(1000), ..PolicyConfig::default() }
    }

    fn dims(arms: usize) -> Dims {
        Dims { d: 1, m: 1, arms }
    }

    fn event(t: u64, arms: u32) -> ContextEvent {
        let candidates = (1..=arms)
            .map(|a| Candidate { arm: ArmId::new(a).unwrap(), feature: ArmFeature::new(vec![1.0]).unwrap() })
            .collect();
        ContextEvent::new(t, UserFeature::new(vec![1.0]).unwrap(), candidates).unwrap()
    }

    #[test]
    fn schedule_arithmetic() {
        let p = ModifiedPsLinUcb::new("m", dims(10), &config(1.0)).unwrap();
        assert_eq!(p.period(), 10);
        assert_eq!(p.forced_arm(3).unwrap().get(), 3);
        assert_eq!(p.forced_arm(10), None);
        assert_eq!(p.warnings().len(), 1);

        let p = ModifiedPsLinUcb::new("m", dims(4), &config(0.5)).unwrap();
        assert_eq!(p.period(), 8);
        assert!(p.warnings().is_empty());
        let forced: Vec<_> = (1..=8).map(|t| p.forced_arm(t).map(ArmId::get)).collect();
        assert_eq!(forced, vec![Some(1), Some(2), Some(3), Some(4), None, None, None, None]);
    }

    #[test]
    fn bad_schedules_are_config_errors() {
        assert!(matches!(ModifiedPsLinUcb::new("m", dims(10), &config(2.0)), Err(Error::Config(_))));
        assert!(matches!(ModifiedPsLinUcb::new("m", dims(10), &config(0.0)), Err(Error::Config(_))));
        let no_gamma = PolicyConfig { horizon: Some(10), window: 4, ..PolicyConfig::default() };
        assert!(matches!(ModifiedPsLinUcb::new("m", dims(3), &no_gamma), Err(Error::Config(_))));
        let odd = PolicyConfig { window: 5, ..config(0.5) };
        assert!(matches!(ModifiedPsLinUcb::new("m", dims(3), &odd), Err(Error::Config(_))));
        let no_horizon = PolicyConfig { horizon: None, ..config(0.5) };
        assert!(matches!(ModifiedPsLinUcb::new("m", dims(3), &no_horizon), Err(Error::Config(_))));
    }

    #[test]
    fn detection_resets_every_arm() {
        let mut cfg = config(0.5);
        cfg.split.b = Threshold::Fixed(0.0);
        cfg.split.c = Threshold::Fixed(0.5);
        let mut p = ModifiedPsLinUcb::new("m", dims(2), &cfg).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut restart_at = None;
        for t in 1..=40 {
            let e = event(t, 2);
            let sel = p.select(&e, &mut rng).unwrap();
            let r = if t <= 20 { 0.0 } else { 1.0 };
            let obs = p.observe(&e, sel, r).unwrap();
            if obs.restart.is_some() {
                restart_at = Some(t);
                break;
            }
        }
        let t = restart_at.expect("a unit mean shift crosses a threshold of 0.5");
        assert!(t > 20);
        assert_eq!(p.tau(), t);
        for a in 1..=2 {
            let arm = ArmId::new(a).unwrap();
            assert!(p.model(arm).is_none_or(|m| m.n_obs() == 0));
            assert!(p.window(arm).is_none_or(|w| w.is_empty()));
        }
    }
}
