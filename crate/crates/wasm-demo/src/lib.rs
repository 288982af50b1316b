//! Browser bindings for three small experiments. The plain functions are usable natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use pslinucb::detect::{split_window_test, DetectionConfig, SlidingWindow, Threshold, WindowEntry};
use pslinucb::env::{run_policy, ChangeSchedule, DisjointEnvSpec, HybridEnvSpec, SyntheticEnvironment, UserMode};
use pslinucb::policy::{build_policy, Dims, PolicyConfig, PolicyKind, SplitParams};
use pslinucb::seed::derive_rng;
use pslinucb::{ArmId, Result};
use wasm_bindgen::prelude::*;

const ARMS: usize = 10;
const DIM: usize = 5;

/// Cumulative regret of a stationary baseline and its piecewise-stationary counterpart on one environment.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    baseline: Vec<f64>,
    piecewise: Vec<f64>,
    detections: Vec<f64>,
    changes: Vec<f64>,
}

#[wasm_bindgen]
impl Curves {
    #[wasm_bindgen(getter)]
    pub fn baseline(&self) -> Vec<f64> {
        self.baseline.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn piecewise(&self) -> Vec<f64> {
        self.piecewise.clone()
    }

    /// Steps at which the piecewise policy restarted an arm.
    #[wasm_bindgen(getter)]
    pub fn detections(&self) -> Vec<f64> {
        self.detections.clone()
    }

    /// Change instants of the environment.
    #[wasm_bindgen(getter)]
    pub fn changes(&self) -> Vec<f64> {
        self.changes.clone()
    }
}

impl Curves {
    pub fn final_baseline(&self) -> f64 {
        self.baseline.last().copied().unwrap_or(0.0)
    }

    pub fn final_piecewise(&self) -> f64 {
        self.piecewise.last().copied().unwrap_or(0.0)
    }

    pub fn detection_steps(&self) -> &[f64] {
        &self.detections
    }
}

fn spec(horizon: u64, every: u64, seed: u64) -> DisjointEnvSpec {
    DisjointEnvSpec {
        horizon,
        arms: ARMS,
        d: DIM,
        m: DIM,
        schedule: ChangeSchedule::Synchronized { every },
        noise_sigma: 0.2,
        user_mode: UserMode::FixedSingle,
        seed,
    }
}

fn compare(env: &SyntheticEnvironment, baseline: PolicyKind, piecewise: PolicyKind, cfg: &PolicyConfig) -> Result<Curves> {
    let dims = Dims { d: env.d(), m: env.m(), arms: env.arms() };
    let mut base = build_policy(baseline, baseline.name(), dims, cfg)?;
    let mut ps = build_policy(piecewise, piecewise.name(), dims, cfg)?;
    let a = run_policy(env, base.as_mut(), &mut derive_rng(0, baseline.name(), 0))?;
    let b = run_policy(env, ps.as_mut(), &mut derive_rng(0, piecewise.name(), 0))?;
    let mut changes: Vec<f64> = env.change_times().iter().flatten().map(|&t| t as f64).collect();
    changes.sort_by(f64::total_cmp);
    changes.dedup();
    Ok(Curves {
        baseline: a.cumulative_regret,
        piecewise: b.cumulative_regret,
        detections: b.detections.iter().map(|d| d.t as f64).collect(),
        changes,
    })
}

/// LinUCB-Disjoint against PSLinUCB-Disjoint on a 10-arm, 5-dimensional environment.
pub fn disjoint_curves(alpha: f64, window: usize, delta: f64, horizon: u64, every: u64, seed: u64) -> Result<Curves> {
    let env = SyntheticEnvironment::disjoint(&spec(horizon, every, seed))?;
    let cfg = PolicyConfig { alpha, window, delta, ..PolicyConfig::default() };
    compare(&env, PolicyKind::LinucbDisjoint, PolicyKind::PslinucbDisjoint, &cfg)
}

/// LinUCB-Hybrid against PSLinUCB-Hybrid when rewards share a coefficient across arms.
pub fn hybrid_curves(alpha: f64, window: usize, delta: f64, horizon: u64, every: u64, seed: u64) -> Result<Curves> {
    let env = SyntheticEnvironment::hybrid(&HybridEnvSpec { base: spec(horizon, every, seed), beta: None, zero_theta: false })?;
    let cfg = PolicyConfig { alpha, window, delta, ..PolicyConfig::default() };
    compare(&env, PolicyKind::LinucbHybrid, PolicyKind::PslinucbHybrid, &cfg)
}

/// Split-window statistic against its threshold `b + c` on one arm whose parameter jumps halfway.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    steps: Vec<f64>,
    statistic: Vec<f64>,
    threshold: Vec<f64>,
    change_at: f64,
    c: f64,
}

#[wasm_bindgen]
impl Trace {
    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> Vec<f64> {
        self.steps.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn statistic(&self) -> Vec<f64> {
        self.statistic.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn threshold(&self) -> Vec<f64> {
        self.threshold.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn change_at(&self) -> f64 {
        self.change_at
    }

    /// The data-independent part of the threshold.
    #[wasm_bindgen(getter)]
    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Trace {
    pub fn first_crossing(&self) -> Option<f64> {
        self.statistic.iter().zip(&self.threshold).zip(&self.steps).find(|((s, b), _)| s > b).map(|(_, t)| *t)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Slide a window of length `window` over `steps` rewards and run the split test at every full position.
/// `horizon` only enters the derived thresholds. A negative or NaN `b` means derive it from the window.
/// With `per_step_users` the contexts are zero-mean, so the averaged residual largely cancels.
pub fn split_trace(window: usize, noise: f64, b: f64, per_step_users: bool, steps: u64, horizon: u64, seed: u64) -> Result<Trace> {
    let change_at = steps / 2;
    let env = SyntheticEnvironment::disjoint(&DisjointEnvSpec {
        horizon: steps,
        arms: 1,
        d: 2,
        m: 1,
        schedule: ChangeSchedule::PerArm { times: vec![vec![change_at]] },
        noise_sigma: noise,
        user_mode: if per_step_users { UserMode::PerStepRandom } else { UserMode::FixedSingle },
        seed,
    })?;
    let split = SplitParams::default();
    let cfg = DetectionConfig::SplitWindow {
        b: if b >= 0.0 { Threshold::Fixed(b) } else { Threshold::Auto },
        c: Threshold::Auto,
        delta1: None,
        horizon,
        lambda_pre: split.lambda_pre,
        norm_half: split.norm_half,
    };
    cfg.validate(window)?;
    let mut sliding = SlidingWindow::new(window)?;
    let arm = ArmId::from_index(0);
    let mut trace = Trace { steps: Vec::new(), statistic: Vec::new(), threshold: Vec::new(), change_at: change_at as f64, c: 0.0 };
    for t in 1..=steps {
        let event = env.event(t)?;
        let reward = env.reward(&event, arm)?;
        sliding.push(WindowEntry { x: event.user.as_vector().clone(), z: None, r: reward });
        if sliding.is_full() {
            let test = split_window_test(&sliding, &cfg)?;
            trace.steps.push(t as f64);
            trace.statistic.push(test.statistic);
            trace.threshold.push(test.b + test.c);
            trace.c = test.c;
        }
    }
    Ok(trace)
}

fn js(err: pslinucb::Error) -> JsError {
    JsError::new(&err.to_string())
}

#[wasm_bindgen(js_name = disjointCurves)]
pub fn disjoint_curves_js(alpha: f64, window: usize, delta: f64, horizon: u32, every: u32, seed: u32) -> Result<Curves, JsError> {
    disjoint_curves(alpha, window, delta, horizon.into(), every.into(), seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = hybridCurves)]
pub fn hybrid_curves_js(alpha: f64, window: usize, delta: f64, horizon: u32, every: u32, seed: u32) -> Result<Curves, JsError> {
    hybrid_curves(alpha, window, delta, horizon.into(), every.into(), seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = splitTrace)]
pub fn split_trace_js(
    window: usize,
    noise: f64,
    b: f64,
    per_step_users: bool,
    steps: u32,
    horizon: u32,
    seed: u32,
) -> Result<Trace, JsError> {
    split_trace(window, noise, b, per_step_users, steps.into(), horizon.into(), seed.into()).map_err(js)
}
