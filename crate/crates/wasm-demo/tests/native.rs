use pslinucb_wasm_demo::{disjoint_curves, hybrid_curves, split_trace};

fn non_decreasing(s: &[f64]) -> bool {
    s.windows(2).all(|w| w[1] >= w[0])
}

#[test]
fn disjoint_curves_are_cumulative() {
    let c = disjoint_curves(1.0, 100, 0.35, 4000, 1000, 3).unwrap();
    assert_eq!(c.baseline().len(), 4000);
    assert_eq!(c.piecewise().len(), 4000);
    assert!(non_decreasing(&c.baseline()) && non_decreasing(&c.piecewise()));
    assert_eq!(c.changes(), vec![1000.0, 2000.0, 3000.0]);
    assert!(!c.detection_steps().is_empty());
    assert!(c.final_piecewise() < c.final_baseline());
    assert_eq!(c, disjoint_curves(1.0, 100, 0.35, 4000, 1000, 3).unwrap());
}

#[test]
fn huge_delta_matches_the_baseline() {
    let c = disjoint_curves(1.0, 100, 1e12, 2000, 500, 4).unwrap();
    assert_eq!(c.baseline(), c.piecewise());
    assert!(c.detections().is_empty());
}

#[test]
fn hybrid_curves_are_cumulative() {
    let c = hybrid_curves(1.5, 100, 0.4, 3000, 1000, 1).unwrap();
    assert_eq!(c.piecewise().len(), 3000);
    assert!(non_decreasing(&c.baseline()) && non_decreasing(&c.piecewise()));
    assert!(c.final_piecewise() < c.final_baseline());
}

#[test]
fn split_statistic_peaks_at_the_change() {
    let window = 200;
    let t = split_trace(window, 0.05, 0.0, false, 2000, 2000, 1).unwrap();
    assert_eq!(t.len(), 2000 - window + 1);
    assert_eq!(t.change_at(), 1000.0);
    let first = t.first_crossing().expect("b = 0 leaves only c");
    assert!(first > 1000.0 && first <= 1000.0 + window as f64, "crossed at {first}");
    let s = t.statistic();
    let peak = (0..s.len()).max_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap();
    assert_eq!(t.steps()[peak], 1000.0 + (window / 2) as f64);
    assert!(t.threshold().iter().all(|&b| (b - t.c()).abs() < 1e-12));

    let derived = split_trace(window, 0.05, -1.0, false, 2000, 2000, 1).unwrap();
    assert_eq!(derived.statistic(), s);
    assert!(derived.threshold().iter().all(|&b| b > derived.c()));
}

#[test]
fn split_trace_edge_cases() {
    assert!(split_trace(201, 0.05, 0.0, false, 2000, 2000, 1).is_err());
    assert!(split_trace(400, 0.05, 0.0, true, 100, 2000, 1).unwrap().is_empty());
}
