use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pslinucb_bench::ExperimentConfig;
use tempfile::TempDir;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pslinucb-bench")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_in(config: &Path, sub: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bench(&args)
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

const TINY: &str = r#"
schema_version = 1
mode = "synth-disjoint"
seeds = 1
master_seed = 5

[environment]
horizon = 100
arms = 2
d = 2
m = 2
noise_sigma = 0.1
schedule = { kind = "synchronized", every = 40 }

[[policies]]
kind = "random"
"#;

const DISJOINT: &str = r#"
schema_version = 1
mode = "synth-disjoint"
seeds = 3
master_seed = 11

[environment]
horizon = 600
arms = 4
d = 3
m = 2
noise_sigma = 0.1
user_mode = "per-step-random"
schedule = { kind = "synchronized", every = 200 }

[[policies]]
kind = "linucb-disjoint"
params = { alpha = 0.5 }

[[policies]]
kind = "pslinucb-disjoint"
params = { alpha = 0.5, window = 40, delta = 0.35 }

[[policies]]
kind = "ucb1"
"#;

#[test]
fn tiny_random_run_has_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "tiny.toml", TINY);
    let out = dir.path().join("out");
    let result = run_in(&config, "synth-disjoint", &out, &[]);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    let rows = read_csv(&out.join("aggregate.csv"));
    assert_eq!(rows.len(), 100);
    let regret: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(regret.windows(2).all(|w| w[1] >= w[0]));
    assert!(rows.iter().enumerate().all(|(i, r)| r[0] == (i + 1).to_string() && r[1] == "random"));
    assert!(out.join("manifest.toml").exists());
    assert_eq!(read_csv(&out.join("runs.csv")).len(), 1);
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "disjoint.toml", DISJOINT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run_in(&config, "synth-disjoint", &a, &["--jobs", "1"])), 0);
    assert_eq!(code(&run_in(&config, "synth-disjoint", &b, &["--jobs", "3"])), 0);
    for name in ["aggregate.csv", "runs.csv", "detections.csv", "manifest.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let c = dir.path().join("c");
    assert_eq!(code(&run_in(&config, "synth-disjoint", &c, &["--master-seed", "12"])), 0);
    assert_ne!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(c.join("aggregate.csv")).unwrap());
}

#[test]
fn adding_a_policy_leaves_other_streams_alone() {
    let dir = TempDir::new().unwrap();
    let base = TINY.replace("seeds = 1", "seeds = 2");
    let one = write(dir.path(), "one.toml", &base);
    let two = write(dir.path(), "two.toml", &format!("{base}\n[[policies]]\nkind = \"ucb1\"\n"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run_in(&one, "synth-disjoint", &a, &[])), 0);
    assert_eq!(code(&run_in(&two, "synth-disjoint", &b, &[])), 0);
    let random = |p: &Path| read_csv(&p.join("aggregate.csv")).into_iter().filter(|r| r[1] == "random").collect::<Vec<_>>();
    assert_eq!(random(&a), random(&b));
}

#[test]
fn manifest_carries_the_config_losslessly() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "disjoint.toml", DISJOINT);
    let out = dir.path().join("out");
    assert_eq!(code(&run_in(&config, "synth-disjoint", &out, &["--seeds", "1"])), 0);
    let manifest: toml::Table = fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    let embedded = toml::to_string(&manifest["config"]).unwrap();
    let mut expected = ExperimentConfig::from_toml(DISJOINT).unwrap();
    expected.seeds = 1;
    assert_eq!(ExperimentConfig::from_toml(&embedded).unwrap(), expected);
    assert_eq!(manifest["seed_table"].as_array().unwrap().len(), 1);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(code(&bench(&["--help"])), 0);
    assert_eq!(code(&bench(&["--version"])), 0);
    assert_eq!(code(&bench(&["synth-disjoint"])), 1);
    assert_eq!(code(&bench(&["synth-disjoint", "--config", "nope.toml", "--frobnicate"])), 1);
    assert_eq!(code(&bench(&["synth-disjoint", "--config", "/does/not/exist.toml", "--out", out_s])), 1);

    let bad_toml = write(dir.path(), "bad.toml", "schema_version = [");
    assert_eq!(code(&run_in(&bad_toml, "synth-disjoint", &out, &[])), 1);
    let config = write(dir.path(), "tiny.toml", TINY);
    assert_eq!(code(&run_in(&config, "synth-hybrid", &out, &[])), 1, "mode mismatch");
    assert_eq!(code(&run_in(&config, "synth-disjoint", &out, &["--jobs", "0"])), 1);
    assert_eq!(code(&run_in(&config, "synth-disjoint", &out, &["--seeds", "0"])), 1);
    assert_eq!(code(&run_in(&config, "synth-disjoint", &out, &["--master-seed", "18446744073709551615"])), 1);
    let bad_alpha = write(dir.path(), "alpha.toml", &format!("{TINY}params = {{ alpha = -1.0 }}\n"));
    assert_eq!(code(&run_in(&bad_alpha, "synth-disjoint", &out, &[])), 1);

    // a log whose second record is malformed
    let log = write(dir.path(), "broken.txt", "#schema v1 d=1 m=1\n1 1.0 2 1 1.0 2 1.0 1 1\n2 1.0 2 1 oops 2 1.0 1 0\n");
    let replay = write(
        dir.path(),
        "replay.toml",
        &format!(
            "schema_version = 1\n[replay]\nlog = \"{}\"\n[[policies]]\nkind = \"linucb-disjoint\"\n",
            log.file_name().unwrap().to_str().unwrap()
        ),
    );
    let result = run_in(&replay, "replay", &out, &[]);
    assert_eq!(code(&result), 2);
    assert!(String::from_utf8_lossy(&result.stderr).contains("line 3"));
}

#[test]
fn failing_runs_name_the_seed() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    // arm 3 never appears, so the first forced pull of it cannot be served
    let mut log = String::from("#schema v1 d=1 m=1\n");
    for t in 1..=20 {
        log.push_str(&format!("{t} 1.0 2 1 1.0 2 1.0 {} 1\n", 2 - t % 2));
    }
    write(dir.path(), "log.txt", &log);
    let config = write(
        dir.path(),
        "replay.toml",
        r#"
schema_version = 1
[replay]
log = "log.txt"
arms = 3
[[policies]]
kind = "modified-pslinucb"
params = { gamma = 0.5, window = 4 }
"#,
    );
    let result = run_in(&config, "replay", &out, &[]);
    assert_eq!(code(&result), 2);
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("seed 0"), "{stderr}");
}

#[test]
fn single_value_sweep_matches_a_plain_run() {
    let dir = TempDir::new().unwrap();
    let plain = write(dir.path(), "plain.toml", &DISJOINT.replace("delta = 0.35", "delta = 0.2"));
    let sweep = write(dir.path(), "sweep.toml", &format!("{DISJOINT}\n[sweep]\naxis = \"delta\"\nvalues = [0.2]\n"));
    let (a, b) = (dir.path().join("plain"), dir.path().join("sweep"));
    assert_eq!(code(&run_in(&plain, "synth-disjoint", &a, &[])), 0);
    assert_eq!(code(&run_in(&sweep, "sweep", &b, &[])), 0);
    for name in ["aggregate.csv", "runs.csv", "detections.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join("value_0").join(name)).unwrap(), "{name}");
    }
    let rows = read_csv(&b.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    let runs = read_csv(&a.join("runs.csv"));
    let finals: Vec<f64> = runs.iter().filter(|r| r[0] == "pslinucb-disjoint").map(|r| r[6].parse().unwrap()).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let row = rows.iter().find(|r| r[0] == "pslinucb-disjoint").unwrap();
    assert_eq!(row[1], "delta");
    assert!((row[3].parse::<f64>().unwrap() - mean).abs() <= 1e-9 * mean.abs().max(1.0));
}

#[test]
fn huge_delta_reproduces_linucb() {
    let dir = TempDir::new().unwrap();
    let sweep =
        write(dir.path(), "sweep.toml", &format!("{DISJOINT}\n[sweep]\naxis = \"delta\"\nvalues = [0.1, 0.35, 1e9]\n"));
    let out = dir.path().join("out");
    let result = run_in(&sweep, "sweep", &out, &[]);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    let rows = read_csv(&out.join("value_2").join("aggregate.csv"));
    let series = |label: &str| rows.iter().filter(|r| r[1] == label).map(|r| r[2].clone()).collect::<Vec<_>>();
    assert_eq!(series("pslinucb-disjoint"), series("linucb-disjoint"));
    assert!(read_csv(&out.join("value_2").join("detections.csv")).is_empty());
    assert_eq!(read_csv(&out.join("sweep.csv")).len(), 9);
}

#[test]
fn bad_sweeps_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let empty = write(dir.path(), "empty.toml", &format!("{DISJOINT}\n[sweep]\naxis = \"delta\"\nvalues = []\n"));
    assert_eq!(code(&run_in(&empty, "sweep", &out, &[])), 1);
    let unused = write(dir.path(), "unused.toml", &format!("{TINY}\n[sweep]\naxis = \"window\"\nvalues = [10.0]\n"));
    assert_eq!(code(&run_in(&unused, "sweep", &out, &[])), 1);
    let fractional = write(dir.path(), "frac.toml", &format!("{DISJOINT}\n[sweep]\naxis = \"window\"\nvalues = [2.5]\n"));
    assert_eq!(code(&run_in(&fractional, "sweep", &out, &[])), 1);
    let missing = write(dir.path(), "missing.toml", DISJOINT);
    assert_eq!(code(&run_in(&missing, "sweep", &out, &[])), 1);
}

#[test]
fn exported_logs_replay() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "disjoint.toml", &DISJOINT.replace("seeds = 3", "seeds = 2"));
    let logs = dir.path().join("logs");
    let result = run_in(&config, "export-log", &logs, &[]);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    assert!(logs.join("log_seed0.txt").exists() && logs.join("log_seed1.txt").exists());
    let again = dir.path().join("again");
    assert_eq!(code(&run_in(&config, "export-log", &again, &[])), 0);
    assert_eq!(fs::read(logs.join("log_seed1.txt")).unwrap(), fs::read(again.join("log_seed1.txt")).unwrap());

    let replay = write(
        dir.path(),
        "replay.toml",
        r#"
schema_version = 1
mode = "replay"
seeds = 2
[replay]
log = "logs/log_seed0.txt"
[[policies]]
kind = "linucb-disjoint"
params = { alpha = 0.5 }
[[policies]]
kind = "random"
"#,
    );
    let out = dir.path().join("replay");
    let result = run_in(&replay, "replay", &out, &[]);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    let runs = read_csv(&out.join("runs.csv"));
    assert_eq!(runs.len(), 4);
    for r in &runs {
        assert_eq!(r[4], "600");
        let matched: u64 = r[5].parse().unwrap();
        assert!(matched > 50 && matched < 400, "matched {matched}");
        let ctr: f64 = r[6].parse().unwrap();
        let reward: f64 = r[7].parse().unwrap();
        assert!((ctr - reward / matched as f64).abs() < 1e-12);
    }
    let rows = read_csv(&out.join("aggregate.csv"));
    let last = rows.iter().filter(|r| r[1] == "random").last().unwrap();
    assert_eq!(last[0], "600");

    let subsampled = write(
        dir.path(),
        "sub.toml",
        &fs::read_to_string(&replay).unwrap().replace("[replay]", "[replay]\nload = { subsample = 0.5 }"),
    );
    let sub = dir.path().join("sub");
    assert_eq!(code(&run_in(&subsampled, "replay", &sub, &[])), 0);
    let steps: Vec<u64> = read_csv(&sub.join("runs.csv")).iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(steps.iter().all(|&s| s > 200 && s < 400), "{steps:?}");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let mode = cfg.resolve_mode(None).unwrap();
        cfg.validate(mode).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if cfg.sweep.is_some() {
            cfg.sweep().unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 4);
}
