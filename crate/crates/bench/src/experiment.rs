//! Planning and executing runs over (policy, seed) pairs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pslinucb::env::{run_policy, DetectionRecord, SyntheticEnvironment};
use pslinucb::policy::{build_policy, theory_alpha, theory_gamma, Dims, PolicyConfig, PolicyKind};
use pslinucb::replay::{load_log, replay_evaluate, LoadOptions, LoggedEvent, LogSchema};
use pslinucb::seed::{derive_rng, derive_seed};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EnvironmentSection, ExperimentConfig, HybridSection, Mode, SweepAxis};
use crate::output;
use crate::BenchError;

/// Command-line values that replace the config file's.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seeds: Option<u64>,
    pub master_seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seeds {
            cfg.seeds = s;
        }
        if let Some(m) = self.master_seed {
            cfg.master_seed = m;
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, BenchError> {
        let jobs = match self.jobs {
            Some(0) => return Err(BenchError::Config("--jobs must be at least 1".into())),
            Some(j) => j,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| BenchError::Runtime(format!("cannot start worker pool: {e}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedPolicy {
    pub label: String,
    pub kind: PolicyKind,
    pub params: PolicyConfig,
}

/// Result of one (policy, seed) run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub policy: usize,
    pub label: String,
    pub seed: u64,
    pub env_seed: Option<u64>,
    pub policy_seed: u64,
    /// Cumulative regret (synthetic) or running CTR (replay) after each step or event.
    pub series: Vec<Option<f64>>,
    /// Final regret or final CTR.
    pub metric: Option<f64>,
    pub cumulative_reward: f64,
    pub steps: u64,
    pub matched: u64,
    pub detections: Vec<DetectionRecord>,
}

pub struct Summary {
    pub mode: Mode,
    pub policies: Vec<ResolvedPolicy>,
    pub runs: Vec<RunOutput>,
}

enum Source {
    Disjoint(EnvironmentSection),
    Hybrid(EnvironmentSection, HybridSection),
    Replay { path: PathBuf, options: LoadOptions, schema: LogSchema, arms: usize, events: Vec<LoggedEvent> },
}

struct Plan {
    mode: Mode,
    master_seed: u64,
    seeds: u64,
    policies: Vec<ResolvedPolicy>,
    source: Source,
}

impl Plan {
    fn new(cfg: &ExperimentConfig, mode: Mode, point: Option<(SweepAxis, f64)>) -> Result<Self, BenchError> {
        cfg.validate(mode)?;
        let source = match mode {
            Mode::SynthDisjoint => Source::Disjoint(cfg.environment(mode)?.clone()),
            Mode::SynthHybrid => {
                Source::Hybrid(cfg.environment(mode)?.clone(), cfg.hybrid.clone().unwrap_or_default())
            }
            Mode::Replay => {
                let replay = cfg.replay.as_ref().expect("validated");
                let file = File::open(&replay.log)
                    .map_err(|e| BenchError::Config(format!("cannot open log {}: {e}", replay.log.display())))?;
                let full = LoadOptions { subsample: None, ..replay.load };
                let (schema, events) =
                    load_log(BufReader::new(file), full).map_err(|e| BenchError::Runtime(e.to_string()))?;
                let schema = schema.ok_or_else(|| BenchError::Config(format!("log {} is empty", replay.log.display())))?;
                Source::Replay {
                    path: replay.log.clone(),
                    options: replay.load,
                    schema,
                    arms: replay.arms.unwrap_or(0),
                    events,
                }
            }
        };
        let (dims, horizon, segments) = match &source {
            Source::Disjoint(env) | Source::Hybrid(env, _) => {
                let spec = env.spec(0);
                let mut all: Vec<u64> =
                    spec.change_times().map_err(|e| BenchError::Config(e.to_string()))?.into_iter().flatten().collect();
                all.sort_unstable();
                all.dedup();
                (Dims { d: env.d, m: env.m, arms: env.arms }, env.horizon, 1 + all.len())
            }
            Source::Replay { schema, arms, events, .. } => {
                (Dims { d: schema.d, m: schema.m, arms: *arms }, events.len() as u64, 1)
            }
        };
        let mut policies = Vec::with_capacity(cfg.policies.len());
        for entry in &cfg.policies {
            let mut params = entry.params.clone();
            if entry.kind == PolicyKind::ModifiedPslinucb && params.horizon.is_none() {
                params.horizon = Some(horizon);
            }
            if entry.theory {
                params.alpha = theory_alpha(dims.d, horizon);
                if entry.kind == PolicyKind::ModifiedPslinucb {
                    params.gamma = Some(theory_gamma(dims.arms, segments, params.window, horizon));
                    params.horizon = Some(horizon);
                }
            }
            if let Some((axis, value)) = point {
                if axis.applies_to(entry.kind) {
                    params = axis.apply(&params, value)?;
                }
            }
            let label = entry.label();
            // fail on bad parameters before any work starts
            build_policy(entry.kind, &label, dims, &params)
                .map_err(|e| BenchError::Config(format!("policy `{label}`: {e}")))?;
            policies.push(ResolvedPolicy { label, kind: entry.kind, params });
        }
        Ok(Plan { mode, master_seed: cfg.master_seed, seeds: cfg.seeds, policies, source })
    }

    fn dims(&self) -> Dims {
        match &self.source {
            Source::Disjoint(env) | Source::Hybrid(env, _) => Dims { d: env.d, m: env.m, arms: env.arms },
            Source::Replay { schema, arms, .. } => Dims { d: schema.d, m: schema.m, arms: *arms },
        }
    }

    fn env_seed(&self, seed: u64) -> Option<u64> {
        match self.source {
            Source::Replay { .. } => None,
            _ => Some(environment_seed(self.master_seed, seed)),
        }
    }

    fn policy_seed(&self, policy: &ResolvedPolicy, seed: u64) -> u64 {
        derive_seed(self.master_seed ^ policy.params.rng_seed, &format!("policy:{}", policy.label), seed)
    }

    fn run_one(&self, index: usize, seed: u64) -> Result<RunOutput, BenchError> {
        let policy = &self.policies[index];
        let policy_seed = self.policy_seed(policy, seed);
        let env_seed = self.env_seed(seed);
        let fail = |e: pslinucb::Error| BenchError::Runtime(format!("policy `{}`, seed {seed}: {e}", policy.label));
        let mut learner = build_policy(policy.kind, &policy.label, self.dims(), &policy.params).map_err(fail)?;
        let mut rng = derive_rng(policy_seed, "run", 0);
        match &self.source {
            Source::Disjoint(_) | Source::Hybrid(..) => {
                let env = self.environment(seed).map_err(fail)?;
                let record = run_policy(&env, learner.as_mut(), &mut rng).map_err(fail)?;
                Ok(RunOutput {
                    policy: index,
                    label: policy.label.clone(),
                    seed,
                    env_seed,
                    policy_seed,
                    metric: Some(record.total_regret()),
                    cumulative_reward: record.cumulative_reward(),
                    steps: record.steps.len() as u64,
                    matched: record.steps.len() as u64,
                    series: record.cumulative_regret.iter().map(|v| Some(*v)).collect(),
                    detections: record.detections,
                })
            }
            Source::Replay { path, options, events, .. } => {
                let result = if options.subsample.is_some() {
                    let options = LoadOptions {
                        subsample_seed: derive_seed(options.subsample_seed, "replay.subsample", seed),
                        ..*options
                    };
                    let file = File::open(path).map_err(|e| fail(e.into()))?;
                    let (_, kept) = load_log(BufReader::new(file), options).map_err(fail)?;
                    replay_evaluate(learner.as_mut(), kept.into_iter().map(Ok), &mut rng, false)
                } else {
                    replay_evaluate(learner.as_mut(), events.iter().cloned().map(Ok), &mut rng, false)
                }
                .map_err(fail)?;
                let mut series = vec![None; result.total_events as usize];
                let mut last = None;
                let mut matches = result.ctr_series.iter().peekable();
                for (i, slot) in series.iter_mut().enumerate() {
                    if let Some(&(_, ctr)) = matches.next_if(|(at, _)| *at == i as u64 + 1) {
                        last = Some(ctr);
                    }
                    *slot = last;
                }
                Ok(RunOutput {
                    policy: index,
                    label: policy.label.clone(),
                    seed,
                    env_seed,
                    policy_seed,
                    metric: result.ctr(),
                    cumulative_reward: result.cumulative_reward,
                    steps: result.total_events,
                    matched: result.matched_count,
                    series,
                    detections: Vec::new(),
                })
            }
        }
    }

    fn environment(&self, seed: u64) -> pslinucb::Result<SyntheticEnvironment> {
        let env_seed = environment_seed(self.master_seed, seed);
        match &self.source {
            Source::Disjoint(env) => SyntheticEnvironment::disjoint(&env.spec(env_seed)),
            Source::Hybrid(env, hybrid) => SyntheticEnvironment::hybrid(&hybrid.spec(env.spec(env_seed))),
            Source::Replay { .. } => unreachable!("replay plans have no environment"),
        }
    }

    fn execute(&self, pool: &rayon::ThreadPool) -> Result<Vec<RunOutput>, BenchError> {
        let pairs: Vec<(usize, u64)> =
            (0..self.policies.len()).flat_map(|p| (0..self.seeds).map(move |s| (p, s))).collect();
        let mut results: Vec<((usize, u64), Result<RunOutput, BenchError>)> =
            pool.install(|| pairs.par_iter().map(|&(p, s)| ((p, s), self.run_one(p, s))).collect());
        results.sort_by_key(|(key, _)| *key);
        results.into_iter().map(|(_, r)| r).collect()
    }

    fn manifest(&self, cfg: &ExperimentConfig, point: Option<(SweepAxis, f64)>) -> Manifest {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            mode: self.mode.name(),
            master_seed: self.master_seed,
            seeds: self.seeds,
            sweep_point: point.map(|(axis, value)| SweepPoint { axis: axis.name(), value }),
            log_events: match &self.source {
                Source::Replay { events, .. } => Some(events.len() as u64),
                _ => None,
            },
            policies: self.policies.clone(),
            seed_table: (0..self.seeds)
                .map(|s| SeedRow {
                    index: s,
                    environment: self.env_seed(s).map(hex),
                    policies: self.policies.iter().map(|p| (p.label.clone(), hex(self.policy_seed(p, s)))).collect(),
                })
                .collect(),
            config: cfg.clone(),
        }
    }
}

fn environment_seed(master: u64, seed: u64) -> u64 {
    derive_seed(master, "environment", seed)
}

#[derive(Serialize)]
struct SweepPoint {
    axis: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct SeedRow {
    index: u64,
    environment: Option<String>,
    policies: BTreeMap<String, String>,
}

/// TOML integers are signed, so derived seeds are written as hex strings.
fn hex(seed: u64) -> String {
    format!("{seed:#018x}")
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    master_seed: u64,
    seeds: u64,
    sweep_point: Option<SweepPoint>,
    log_events: Option<u64>,
    policies: Vec<ResolvedPolicy>,
    seed_table: Vec<SeedRow>,
    config: ExperimentConfig,
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), BenchError> {
    let text = toml::to_string(manifest).map_err(|e| BenchError::Runtime(format!("cannot write manifest: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

fn run_point(
    cfg: &ExperimentConfig,
    mode: Mode,
    point: Option<(SweepAxis, f64)>,
    pool: &rayon::ThreadPool,
    out: &Path,
) -> Result<Summary, BenchError> {
    let plan = Plan::new(cfg, mode, point)?;
    let runs = plan.execute(pool)?;
    std::fs::create_dir_all(out)?;
    output::write_aggregate(&out.join("aggregate.csv"), &plan.policies, &runs)?;
    output::write_runs(&out.join("runs.csv"), &runs)?;
    output::write_detections(&out.join("detections.csv"), &runs)?;
    write_manifest(out, &plan.manifest(cfg, point))?;
    Ok(Summary { mode, policies: plan.policies, runs })
}

/// Run every configured policy on every seed and write the outputs into `out`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    requested: Option<Mode>,
    overrides: Overrides,
    out: &Path,
) -> Result<Summary, BenchError> {
    let mut cfg = cfg.clone();
    overrides.apply(&mut cfg);
    let mode = cfg.resolve_mode(requested)?;
    let pool = overrides.pool()?;
    run_point(&cfg, mode, None, &pool, out)
}

/// Run the experiment once per sweep value, each into `out/value_<j>`, and summarize in `out/sweep.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, overrides: Overrides, out: &Path) -> Result<Vec<Summary>, BenchError> {
    let mut cfg = cfg.clone();
    overrides.apply(&mut cfg);
    let mode = cfg.resolve_mode(None).map_err(|_| BenchError::Config("`sweep` needs `mode` in the config".into()))?;
    cfg.validate(mode)?;
    let sweep = cfg.sweep()?.clone();
    let pool = overrides.pool()?;
    let mut summaries = Vec::with_capacity(sweep.values.len());
    for (j, &value) in sweep.values.iter().enumerate() {
        summaries.push(run_point(&cfg, mode, Some((sweep.axis, value)), &pool, &out.join(format!("value_{j}")))?);
    }
    output::write_sweep(&out.join("sweep.csv"), sweep.axis, &sweep.values, &summaries)?;
    Ok(summaries)
}

/// Write each seed's synthetic trajectory as a replay log `log_seed<i>.txt` under a uniform-random logger.
pub fn export_logs(cfg: &ExperimentConfig, overrides: Overrides, out: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut cfg = cfg.clone();
    overrides.apply(&mut cfg);
    let mode = match cfg.mode {
        Some(Mode::Replay) => return Err(BenchError::Config("export-log needs a synthetic environment".into())),
        Some(m) => m,
        None if cfg.hybrid.is_some() => Mode::SynthHybrid,
        None => Mode::SynthDisjoint,
    };
    cfg.validate_seeds()?;
    let env = cfg.environment(mode)?.clone();
    let hybrid = cfg.hybrid.clone().unwrap_or_default();
    let pool = overrides.pool()?;
    std::fs::create_dir_all(out)?;
    let master = cfg.master_seed;
    let written: Vec<Result<PathBuf, BenchError>> = pool.install(|| {
        (0..cfg.seeds)
            .into_par_iter()
            .map(|s| {
                let fail = |e: pslinucb::Error| BenchError::Runtime(format!("seed {s}: {e}"));
                let spec = env.spec(environment_seed(master, s));
                let synthetic = match mode {
                    Mode::SynthHybrid => SyntheticEnvironment::hybrid(&hybrid.spec(spec)),
                    _ => SyntheticEnvironment::disjoint(&spec),
                }
                .map_err(fail)?;
                let path = out.join(format!("log_seed{s}.txt"));
                let mut file = BufWriter::new(File::create(&path)?);
                synthetic.export_log(&mut file, &mut derive_rng(master, "logger", s)).map_err(fail)?;
                file.flush()?;
                Ok(path)
            })
            .collect()
    });
    let paths = written.into_iter().collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: "export-log",
        master_seed: master,
        seeds: cfg.seeds,
        sweep_point: None,
        log_events: Some(env.horizon),
        policies: Vec::new(),
        seed_table: (0..cfg.seeds)
            .map(|s| SeedRow {
                index: s,
                environment: Some(hex(environment_seed(master, s))),
                policies: BTreeMap::from([("logger".to_string(), hex(derive_seed(master, "logger", s)))]),
            })
            .collect(),
        config: cfg,
    };
    write_manifest(out, &manifest)?;
    Ok(paths)
}
