//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use pslinucb::env::{ChangeSchedule, DisjointEnvSpec, HybridEnvSpec, UserMode};
use pslinucb::policy::{PolicyConfig, PolicyKind};
use pslinucb::replay::LoadOptions;
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SynthDisjoint,
    SynthHybrid,
    Replay,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SynthDisjoint => "synth-disjoint",
            Mode::SynthHybrid => "synth-hybrid",
            Mode::Replay => "replay",
        }
    }
}

/// Environment section; the per-run seed is derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub horizon: u64,
    pub arms: usize,
    pub d: usize,
    pub m: usize,
    pub schedule: ChangeSchedule,
    pub noise_sigma: f64,
    #[serde(default)]
    pub user_mode: UserMode,
}

impl EnvironmentSection {
    pub fn spec(&self, seed: u64) -> DisjointEnvSpec {
        DisjointEnvSpec {
            horizon: self.horizon,
            arms: self.arms,
            d: self.d,
            m: self.m,
            schedule: self.schedule.clone(),
            noise_sigma: self.noise_sigma,
            user_mode: self.user_mode,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridSection {
    pub beta: Option<Vec<f64>>,
    pub zero_theta: bool,
}

impl HybridSection {
    pub fn spec(&self, base: DisjointEnvSpec) -> HybridEnvSpec {
        HybridEnvSpec { base, beta: self.beta.clone(), zero_theta: self.zero_theta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySection {
    pub log: PathBuf,
    /// Arm count `K`, needed only by policies with a fixed arm set.
    #[serde(default)]
    pub arms: Option<usize>,
    #[serde(default)]
    pub load: LoadOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub kind: PolicyKind,
    /// Defaults to the kind's name.
    #[serde(default)]
    pub label: Option<String>,
    /// Replace `α`, `γ` and `T` by their theoretical values.
    #[serde(default)]
    pub theory: bool,
    #[serde(default)]
    pub params: PolicyConfig,
}

impl PolicyEntry {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Alpha,
    Window,
    Delta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Window => "window",
            SweepAxis::Delta => "delta",
        }
    }

    pub fn applies_to(self, kind: PolicyKind) -> bool {
        match self {
            SweepAxis::Alpha => kind.uses_alpha(),
            SweepAxis::Window => kind.uses_window(),
            SweepAxis::Delta => kind.uses_delta(),
        }
    }

    /// Copy of `params` with this axis set to `value`.
    pub fn apply(self, params: &PolicyConfig, value: f64) -> Result<PolicyConfig, BenchError> {
        let mut p = params.clone();
        match self {
            SweepAxis::Alpha => p.alpha = value,
            SweepAxis::Delta => p.delta = value,
            SweepAxis::Window => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(BenchError::Config(format!("window values must be positive integers, got {value}")));
                }
                p.window = value as usize;
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub environment: Option<EnvironmentSection>,
    #[serde(default)]
    pub hybrid: Option<HybridSection>,
    #[serde(default)]
    pub replay: Option<ReplaySection>,
    #[serde(default)]
    pub policies: Vec<PolicyEntry>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn default_seeds() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(BenchError::Config(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative log paths are relative to the config file
        if let (Some(replay), Some(dir)) = (cfg.replay.as_mut(), path.parent()) {
            if replay.log.is_relative() {
                replay.log = dir.join(&replay.log);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration types serialize to TOML")
    }

    /// Mode requested by a subcommand, checked against the file.
    pub fn resolve_mode(&self, requested: Option<Mode>) -> Result<Mode, BenchError> {
        match (requested, self.mode) {
            (Some(r), Some(m)) if r != m => Err(BenchError::Config(format!(
                "subcommand `{}` does not match mode `{}` in the config",
                r.name(),
                m.name()
            ))),
            (Some(r), _) => Ok(r),
            (None, Some(m)) => Ok(m),
            (None, None) => Err(BenchError::Config("the config does not set `mode`".into())),
        }
    }

    pub fn validate_seeds(&self) -> Result<(), BenchError> {
        if self.seeds == 0 {
            return Err(BenchError::Config("seeds must be at least 1".into()));
        }
        // larger values could not be read back from the manifest
        if self.master_seed > i64::MAX as u64 {
            return Err(BenchError::Config(format!("master_seed must be at most {}", i64::MAX)));
        }
        Ok(())
    }

    /// Checks for running policies in `mode`.
    pub fn validate(&self, mode: Mode) -> Result<(), BenchError> {
        self.validate_seeds()?;
        if self.policies.is_empty() {
            return Err(BenchError::Config("no policies configured".into()));
        }
        let mut labels: Vec<String> = self.policies.iter().map(PolicyEntry::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(BenchError::Config(format!("policy label `{}` is used twice", w[0])));
        }
        for p in &self.policies {
            if p.params.rng_seed > i64::MAX as u64 {
                return Err(BenchError::Config(format!("policy `{}`: rng_seed must be at most {}", p.label(), i64::MAX)));
            }
            p.params.validate().map_err(|e| BenchError::Config(format!("policy `{}`: {e}", p.label())))?;
        }
        match mode {
            Mode::SynthDisjoint | Mode::SynthHybrid => {
                self.environment(mode)?;
            }
            Mode::Replay => {
                let replay = self.replay.as_ref().ok_or_else(|| BenchError::Config("mode `replay` needs a [replay] table".into()))?;
                if self.policies.iter().any(|p| p.theory) {
                    return Err(BenchError::Config("theory parameters need a synthetic environment".into()));
                }
                if let Some(p) = self.policies.iter().find(|p| p.kind.needs_fixed_arms() && replay.arms.is_none()) {
                    return Err(BenchError::Config(format!("policy `{}` needs `arms` in [replay]", p.label())));
                }
                if let Some(q) = replay.load.subsample {
                    if !(q > 0.0 && q <= 1.0) {
                        return Err(BenchError::Config(format!("subsample must lie in (0, 1], got {q}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// The validated environment table of a synthetic mode.
    pub fn environment(&self, mode: Mode) -> Result<&EnvironmentSection, BenchError> {
        if mode == Mode::Replay {
            return Err(BenchError::Config("mode `replay` has no synthetic environment".into()));
        }
        let env = self
            .environment
            .as_ref()
            .ok_or_else(|| BenchError::Config(format!("mode `{}` needs an [environment] table", mode.name())))?;
        env.spec(0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        if mode == Mode::SynthDisjoint && self.hybrid.is_some() {
            return Err(BenchError::Config("[hybrid] is only valid in synth-hybrid mode".into()));
        }
        Ok(env)
    }

    /// The validated [sweep] table.
    pub fn sweep(&self) -> Result<&SweepSection, BenchError> {
        let sweep = self.sweep.as_ref().ok_or_else(|| BenchError::Config("`sweep` needs a [sweep] table".into()))?;
        if sweep.values.is_empty() {
            return Err(BenchError::Config("sweep values must not be empty".into()));
        }
        if !self.policies.iter().any(|p| sweep.axis.applies_to(p.kind)) {
            return Err(BenchError::Config(format!("no configured policy uses the sweep axis `{}`", sweep.axis.name())));
        }
        for p in self.policies.iter().filter(|p| sweep.axis.applies_to(p.kind)) {
            for &v in &sweep.values {
                sweep.axis.apply(&p.params, v)?.validate().map_err(|e| {
                    BenchError::Config(format!("policy `{}` at {} = {v}: {e}", p.label(), sweep.axis.name()))
                })?;
            }
        }
        Ok(sweep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
schema_version = 1
mode = "synth-hybrid"
seeds = 3
master_seed = 9

[environment]
horizon = 500
arms = 4
d = 3
m = 2
noise_sigma = 0.2
user_mode = "per-step-random"
schedule = { kind = "per-arm", times = [[100], [], [250, 300], []] }

[hybrid]
zero_theta = true

[[policies]]
kind = "pslinucb-hybrid"
params = { alpha = 1.5, window = 50, delta = 0.4 }

[[policies]]
kind = "modified-pslinucb"
label = "modified"
theory = true
params = { window = 20, split = { b = { fixed = 0.5 }, c = "auto" } }

[sweep]
axis = "delta"
values = [0.1, 0.35]
"#;

    #[test]
    fn round_trips_losslessly() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.policies[1].params.split.b, pslinucb::detect::Threshold::Fixed(0.5));
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        cfg.validate(Mode::SynthHybrid).unwrap();
        cfg.sweep().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml(&EXAMPLE.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(ExperimentConfig::from_toml(&EXAMPLE.replace("seeds = 3", "seeds = 3\ncolour = 1")).is_err());
        let cfg = ExperimentConfig::from_toml(&EXAMPLE.replace("values = [0.1, 0.35]", "values = []")).unwrap();
        assert!(cfg.sweep().is_err());
        let cfg = ExperimentConfig::from_toml(&EXAMPLE.replace("axis = \"delta\"", "axis = \"alpha\"")).unwrap();
        assert!(cfg.sweep().is_ok());
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert!(cfg.resolve_mode(Some(Mode::SynthDisjoint)).is_err());
        assert!(cfg.validate(Mode::Replay).is_err());
    }
}
