//! Context-free baselines.

use std::hash::Hasher;

use rand::{Rng, RngCore};

use super::{argmax, check_selection, hash_floats, hasher, slot, ArmIndex, Observation, Policy, Selection};
use crate::error::Result;
use crate::model::ContextEvent;

/// UCB1: sample mean plus `√(2 ln t / n_a)`, after one pull of every arm.
#[derive(Debug, Clone)]
pub struct Ucb1 {
    label: String,
    counts: Vec<Option<(u64, f64)>>,
    steps: u64,
}

impl Ucb1 {
    pub fn new(label: &str) -> Self {
        Ucb1 { label: label.to_string(), counts: Vec::new(), steps: 0 }
    }

    /// Pull count and reward sum of an arm.
    pub fn stats(&self, arm: crate::model::ArmId) -> (u64, f64) {
        self.counts.get(arm.index()).copied().flatten().unwrap_or((0, 0.0))
    }
}

impl Policy for Ucb1 {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, _rng: &mut dyn RngCore) -> Result<Selection> {
        let step = self.steps + 1;
        let unseen = event.candidates.iter().map(|c| c.arm).filter(|a| self.stats(*a).0 == 0).min();
        if let Some(arm) = unseen {
            return Ok(Selection::new(step, arm, Vec::new(), false));
        }
        let log_t = (step as f64).ln();
        let indices: Vec<ArmIndex> = event
            .candidates
            .iter()
            .map(|c| {
                let (n, sum) = self.stats(c.arm);
                let n = n as f64;
                ArmIndex { arm: c.arm, value: sum / n + (2.0 * log_t / n).sqrt() }
            })
            .collect();
        let arm = argmax(&indices)?;
        Ok(Selection::new(step, arm, indices, false))
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        let entry = slot(&mut self.counts, selection.arm()).get_or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += reward;
        self.steps += 1;
        Ok(Observation::default())
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn state_digest(&self) -> u64 {
        let mut h = hasher();
        h.write_u64(self.steps);
        for (i, c) in self.counts.iter().enumerate() {
            if let Some((n, sum)) = c {
                h.write_usize(i);
                h.write_u64(*n);
                hash_floats(&mut h, &[*sum]);
            }
        }
        h.finish()
    }
}

/// Uniformly random arm choice.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    label: String,
    steps: u64,
}

impl RandomPolicy {
    pub fn new(label: &str) -> Self {
        RandomPolicy { label: label.to_string(), steps: 0 }
    }
}

impl Policy for RandomPolicy {
    fn label(&self) -> &str {
        &self.label
    }

    fn select(&self, event: &ContextEvent, rng: &mut dyn RngCore) -> Result<Selection> {
        event.validate()?;
        let i = rng.random_range(0..event.candidates.len());
        Ok(Selection::new(self.steps + 1, event.candidates[i].arm, Vec::new(), false))
    }

    fn observe(&mut self, event: &ContextEvent, selection: Selection, reward: f64) -> Result<Observation> {
        check_selection(self.steps, event, &selection, reward)?;
        self.steps += 1;
        Ok(Observation::default())
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn state_digest(&self) -> u64 {
        let mut h = hasher();
        h.write_u64(self.steps);
        h.finish()
    }
}
