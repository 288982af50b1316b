//! Synthetic piecewise-stationary environments and the online run loop.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cross_feature, ArmFeature, ArmId, Candidate, ContextEvent, UserFeature};
use crate::policy::{Policy, Restart};
use crate::replay::{write_header, write_record, LoggedEvent};
use crate::seed::derive_rng;

/// When arm parameters change. A change instant `ν` means `θ(t)` differs for `t > ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChangeSchedule {
    Stationary,
    /// Every arm changes at `every, 2·every, …` below the horizon.
    Synchronized { every: u64 },
    /// One strictly increasing list of change instants per arm.
    PerArm { times: Vec<Vec<u64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserMode {
    /// One user feature for the whole run.
    #[default]
    FixedSingle,
    /// A fresh user feature at every step.
    PerStepRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisjointEnvSpec {
    pub horizon: u64,
    pub arms: usize,
    pub d: usize,
    pub m: usize,
    pub schedule: ChangeSchedule,
    pub noise_sigma: f64,
    #[serde(default)]
    pub user_mode: UserMode,
    #[serde(default)]
    pub seed: u64,
}

impl DisjointEnvSpec {
    /// `T = 20000`, `K = 10`, `d = m = 5`, synchronized changes every 2000 steps, `σ = 0.2`.
    pub fn reference(seed: u64) -> Self {
        DisjointEnvSpec {
            horizon: 20_000,
            arms: 10,
            d: 5,
            m: 5,
            schedule: ChangeSchedule::Synchronized { every: 2000 },
            noise_sigma: 0.2,
            user_mode: UserMode::FixedSingle,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.arms == 0 || self.d == 0 || self.m == 0 {
            return Err(Error::Config("T, K, d and m must all be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Config(format!("σ must be finite and non-negative, got {}", self.noise_sigma)));
        }
        self.change_times().map(|_| ())
    }

    /// Per-arm change instants, validated against the horizon.
    pub fn change_times(&self) -> Result<Vec<Vec<u64>>> {
        match &self.schedule {
            ChangeSchedule::Stationary => Ok(vec![Vec::new(); self.arms]),
            ChangeSchedule::Synchronized { every } => {
                if *every == 0 {
                    return Err(Error::Config("change period must be positive".into()));
                }
                let times: Vec<u64> = (1..).map(|i| i * every).take_while(|v| *v < self.horizon).collect();
                Ok(vec![times; self.arms])
            }
            ChangeSchedule::PerArm { times } => {
                if times.len() != self.arms {
                    return Err(Error::Config(format!(
                        "schedule lists {} arms, environment has {}",
                        times.len(),
                        self.arms
                    )));
                }
                for (a, list) in times.iter().enumerate() {
                    let mut last = 0;
                    for &v in list {
                        if v <= last || v >= self.horizon {
                            return Err(Error::Config(format!(
                                "arm {}: change instants must increase strictly within (0, T), got {v}",
                                a + 1
                            )));
                        }
                        last = v;
                    }
                }
                Ok(times.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridEnvSpec {
    pub base: DisjointEnvSpec,
    /// Shared coefficient of length `d·m`; drawn in the unit ball when absent.
    pub beta: Option<Vec<f64>>,
    /// Force every `θ_a` to zero so rewards come from the shared term only.
    pub zero_theta: bool,
}

/// One parameter change and its size for the user active right after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeMagnitude {
    pub arm: ArmId,
    pub at: u64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
enum Users {
    Fixed(UserFeature),
    PerStep(Vec<UserFeature>),
}

/// Uniform draw from the closed unit ball in `n` dimensions.
pub fn sample_unit_ball(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm: f64 = v.norm();
        if norm > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / n as f64);
            return v * (radius / norm);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticEnvironment {
    horizon: u64,
    d: usize,
    m: usize,
    change_times: Vec<Vec<u64>>,
    thetas: Vec<Vec<DVector<f64>>>,
    arm_features: Vec<ArmFeature>,
    beta: Option<DVector<f64>>,
    users: Users,
    noise: Vec<f64>,
}

impl SyntheticEnvironment {
    pub fn disjoint(spec: &DisjointEnvSpec) -> Result<Self> {
        spec.validate()?;
        let change_times = spec.change_times()?;
        let mut theta_rng = derive_rng(spec.seed, "env.theta", 0);
        let thetas = change_times
            .iter()
            .map(|times| (0..=times.len()).map(|_| sample_unit_ball(spec.d, &mut theta_rng)).collect())
            .collect();
        let mut arm_rng = derive_rng(spec.seed, "env.arms", 0);
        let arm_features = (0..spec.arms)
            .map(|_| ArmFeature::from_vector(sample_unit_ball(spec.m, &mut arm_rng)))
            .collect::<Result<_>>()?;
        let mut user_rng = derive_rng(spec.seed, "env.users", 0);
        let users = match spec.user_mode {
            UserMode::FixedSingle => Users::Fixed(UserFeature::from_vector(sample_unit_ball(spec.d, &mut user_rng))?),
            UserMode::PerStepRandom => Users::PerStep(
                (0..spec.horizon)
                    .map(|_| UserFeature::from_vector(sample_unit_ball(spec.d, &mut user_rng)))
                    .collect::<Result<_>>()?,
            ),
        };
        let mut noise_rng = derive_rng(spec.seed, "env.noise", 0);
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        let noise = (0..spec.horizon).map(|_| normal.sample(&mut noise_rng)).collect();
        Ok(SyntheticEnvironment {
            horizon: spec.horizon,
            d: spec.d,
            m: spec.m,
            change_times,
            thetas,
            arm_features,
            beta: None,
            users,
            noise,
        })
    }

    pub fn hybrid(spec: &HybridEnvSpec) -> Result<Self> {
        let mut env = Self::disjoint(&spec.base)?;
        let k = env.d * env.m;
        let beta = match &spec.beta {
            Some(values) => {
                if values.len() != k {
                    return Err(Error::Config(format!("β needs d·m = {k} entries, got {}", values.len())));
                }
                let beta = DVector::from_column_slice(values);
                if !beta.iter().all(|v| v.is_finite()) || beta.norm() > 1.0 + 1e-12 {
                    return Err(Error::Config("β must be finite with ‖β‖ ≤ 1".into()));
                }
                beta
            }
            None => sample_unit_ball(k, &mut derive_rng(spec.base.seed, "env.beta", 0)),
        };
        if spec.zero_theta {
            for segments in &mut env.thetas {
                for theta in segments.iter_mut() {
                    theta.fill(0.0);
                }
            }
        }
        env.beta = Some(beta);
        Ok(env)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn arms(&self) -> usize {
        self.arm_features.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn beta(&self) -> Option<&DVector<f64>> {
        self.beta.as_ref()
    }

    pub fn change_times(&self) -> &[Vec<u64>] {
        &self.change_times
    }

    pub fn arm_feature(&self, arm: ArmId) -> Option<&ArmFeature> {
        self.arm_features.get(arm.index())
    }

    /// `θ_a(t)`.
    pub fn theta(&self, arm: ArmId, t: u64) -> Result<&DVector<f64>> {
        let times = self
            .change_times
            .get(arm.index())
            .ok_or_else(|| Error::InvalidParameter(format!("arm {arm} is not part of this environment")))?;
        let segment = times.partition_point(|&v| v < t);
        Ok(&self.thetas[arm.index()][segment])
    }

    pub fn user(&self, t: u64) -> Result<&UserFeature> {
        if t == 0 || t > self.horizon {
            return Err(Error::InvalidParameter(format!("step {t} outside 1..={}", self.horizon)));
        }
        Ok(match &self.users {
            Users::Fixed(x) => x,
            Users::PerStep(xs) => &xs[(t - 1) as usize],
        })
    }

    /// Noise added to every arm's reward at step `t`.
    pub fn noise(&self, t: u64) -> Result<f64> {
        self.user(t)?;
        Ok(self.noise[(t - 1) as usize])
    }

    /// The event at step `t`: the step's user and every arm.
    pub fn event(&self, t: u64) -> Result<ContextEvent> {
        let user = self.user(t)?.clone();
        let candidates = self
            .arm_features
            .iter()
            .enumerate()
            .map(|(i, y)| Candidate { arm: ArmId::from_index(i), feature: y.clone() })
            .collect();
        ContextEvent::new(t, user, candidates)
    }

    /// Expected reward of `arm` for the user and candidate feature carried by `event`.
    pub fn expected_reward(&self, event: &ContextEvent, arm: ArmId) -> Result<f64> {
        let candidate = event
            .candidate(arm)
            .ok_or_else(|| Error::InvalidParameter(format!("arm {arm} is not a candidate")))?;
        let x = event.user.as_vector();
        let mut mean = x.dot(self.theta(arm, event.t)?);
        if let Some(beta) = &self.beta {
            mean += cross_feature(&event.user, &candidate.feature).as_vector().dot(beta);
        }
        Ok(mean)
    }

    /// Observed reward: expected reward plus the step's noise.
    pub fn reward(&self, event: &ContextEvent, arm: ArmId) -> Result<f64> {
        Ok(self.expected_reward(event, arm)? + self.noise(event.t)?)
    }

    /// Candidate with the largest expected reward; ties go to the lowest id.
    pub fn oracle_best(&self, event: &ContextEvent) -> Result<(ArmId, f64)> {
        let mut best: Option<(ArmId, f64)> = None;
        for c in &event.candidates {
            let value = self.expected_reward(event, c.arm)?;
            best = match best {
                Some((arm, v)) if v > value || (v == value && arm < c.arm) => Some((arm, v)),
                _ => Some((c.arm, value)),
            };
        }
        best.ok_or_else(|| Error::InvalidParameter("event has no candidates".into()))
    }

    /// `M = 1 + |⋃_a {ν_a}|`.
    pub fn segment_count(&self) -> usize {
        let mut all: Vec<u64> = self.change_times.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        1 + all.len()
    }

    /// `|xᵀθ_a(ν+1) − xᵀθ_a(ν)|` for every change, with `x` the user at `ν + 1`.
    pub fn change_magnitudes(&self) -> Result<Vec<ChangeMagnitude>> {
        let mut out = Vec::new();
        for (i, times) in self.change_times.iter().enumerate() {
            for (l, &at) in times.iter().enumerate() {
                let x = self.user(at + 1)?.as_vector();
                let before = x.dot(&self.thetas[i][l]);
                let after = x.dot(&self.thetas[i][l + 1]);
                out.push(ChangeMagnitude { arm: ArmId::from_index(i), at, delta: (after - before).abs() });
            }
        }
        Ok(out)
    }

    /// Write the whole trajectory as a replay log with a uniform-random logger.
    pub fn export_log(&self, out: &mut impl Write, logger: &mut dyn RngCore) -> Result<u64> {
        write_header(out, self.d, self.m)?;
        for t in 1..=self.horizon {
            let event = self.event(t)?;
            let i = logger.random_range(0..event.candidates.len());
            let arm = event.candidates[i].arm;
            let reward = self.reward(&event, arm)?;
            write_record(out, &LoggedEvent { event, logged_arm: arm, reward })?;
        }
        Ok(self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub arm: ArmId,
    pub reward: f64,
    pub expected_reward: f64,
    pub oracle_reward: f64,
    pub regret: f64,
    pub forced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub t: u64,
    pub restart: Restart,
    pub statistic: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub steps: Vec<StepRecord>,
    pub cumulative_regret: Vec<f64>,
    pub detections: Vec<DetectionRecord>,
    /// Segment count `M` of the environment.
    pub segments: usize,
}

impl RunRecord {
    pub fn total_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn arms(&self) -> Vec<ArmId> {
        self.steps.iter().map(|s| s.arm).collect()
    }
}

/// Run `policy` for the environment's horizon.
pub fn run_policy(env: &SyntheticEnvironment, policy: &mut dyn Policy, rng: &mut dyn RngCore) -> Result<RunRecord> {
    run_policy_for(env, policy, rng, env.horizon)
}

/// Run `policy` for the first `steps` steps.
pub fn run_policy_for(
    env: &SyntheticEnvironment,
    policy: &mut dyn Policy,
    rng: &mut dyn RngCore,
    steps: u64,
) -> Result<RunRecord> {
    if steps > env.horizon {
        return Err(Error::InvalidParameter(format!("cannot run {steps} steps of a {}-step environment", env.horizon)));
    }
    let mut record = RunRecord {
        label: policy.label().to_string(),
        steps: Vec::with_capacity(steps as usize),
        cumulative_regret: Vec::with_capacity(steps as usize),
        detections: Vec::new(),
        segments: env.segment_count(),
    };
    let mut total = 0.0;
    for t in 1..=steps {
        let event = env.event(t)?;
        let selection = policy.select(&event, rng)?;
        let arm = selection.arm();
        let forced = selection.forced();
        let expected = env.expected_reward(&event, arm)?;
        let reward = expected + env.noise(t)?;
        let (_, oracle) = env.oracle_best(&event)?;
        let regret = oracle - expected;
        let obs = policy.observe(&event, selection, reward)?;
        if let (Some(restart), Some(statistic), Some(threshold)) = (obs.restart, obs.statistic, obs.threshold) {
            record.detections.push(DetectionRecord { t, restart, statistic, threshold });
        }
        total += regret;
        record.steps.push(StepRecord { t, arm, reward, expected_reward: expected, oracle_reward: oracle, regret, forced });
        record.cumulative_regret.push(total);
    }
    Ok(record)
}
