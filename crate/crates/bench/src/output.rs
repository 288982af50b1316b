//! CSV writers. Floats use Rust's shortest round-trip formatting, so reruns are byte-identical.

use std::path::Path;

use pslinucb::policy::Restart;

use crate::config::SweepAxis;
use crate::experiment::{ResolvedPolicy, RunOutput, Summary};
use crate::BenchError;

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Mean and standard error of the mean; the error is 0 for a single value.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn write_aggregate(path: &Path, policies: &[ResolvedPolicy], runs: &[RunOutput]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "policy", "mean_cum_regret_or_ctr", "stderr", "n"])?;
    for (index, policy) in policies.iter().enumerate() {
        let mine: Vec<&RunOutput> = runs.iter().filter(|r| r.policy == index).collect();
        let len = mine.iter().map(|r| r.series.len()).max().unwrap_or(0);
        for t in 0..len {
            let values: Vec<f64> = mine.iter().filter_map(|r| r.series.get(t).copied().flatten()).collect();
            if values.is_empty() {
                continue;
            }
            let (mean, se) = mean_stderr(&values);
            w.write_record([(t + 1).to_string(), policy.label.clone(), num(mean), num(se), values.len().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs(path: &Path, runs: &[RunOutput]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy",
        "seed",
        "environment_seed",
        "policy_seed",
        "steps",
        "matched",
        "metric",
        "cumulative_reward",
        "detections",
    ])?;
    for r in runs {
        w.write_record([
            r.label.clone(),
            r.seed.to_string(),
            r.env_seed.map(|s| s.to_string()).unwrap_or_default(),
            r.policy_seed.to_string(),
            r.steps.to_string(),
            r.matched.to_string(),
            opt(r.metric),
            num(r.cumulative_reward),
            r.detections.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_detections(path: &Path, runs: &[RunOutput]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["policy", "seed", "t", "restart", "statistic", "threshold"])?;
    for r in runs {
        for d in &r.detections {
            let restart = match d.restart {
                Restart::Arm(arm) => arm.to_string(),
                Restart::Global => "global".to_string(),
            };
            w.write_record([
                r.label.clone(),
                r.seed.to_string(),
                d.t.to_string(),
                restart,
                num(d.statistic),
                num(d.threshold),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, axis: SweepAxis, values: &[f64], summaries: &[Summary]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["policy", "axis", "value", "mean", "stderr", "n"])?;
    let Some(first) = summaries.first() else {
        w.flush()?;
        return Ok(());
    };
    for (index, policy) in first.policies.iter().enumerate() {
        for (value, summary) in values.iter().zip(summaries) {
            let finals: Vec<f64> = summary.runs.iter().filter(|r| r.policy == index).filter_map(|r| r.metric).collect();
            if finals.is_empty() {
                w.write_record([policy.label.clone(), axis.name().into(), num(*value), String::new(), String::new(), "0".into()])?;
                continue;
            }
            let (mean, se) = mean_stderr(&finals);
            w.write_record([
                policy.label.clone(),
                axis.name().into(),
                num(*value),
                num(mean),
                num(se),
                finals.len().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
