use std::collections::BTreeMap;

use ewqof_core::config::SimConfig;
use ewqof_core::experiment::{
    aggregate, emit_plot_data, read_results, run_sweep, write_outputs, ExperimentError, PlotMetric, SweepSpec,
    MANIFEST_FILE, PLOT_DIR, REPORTS_DIR, RESULTS_FILE,
};
use ewqof_core::metrics::Strategy;

fn short_base() -> SimConfig {
    SimConfig { duration_slotframes: 80, ..SimConfig::default() }
}

fn small_spec() -> SweepSpec {
    SweepSpec { node_counts: vec![12, 6], strategies: Strategy::ALL.to_vec(), seeds: vec![3, 1, 2] }
}

/// Sample mean and standard deviation computed the textbook two-pass way.
fn oracle(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn sweep_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let outcome = run_sweep(&short_base(), &spec);
    assert!(outcome.is_complete());
    assert_eq!(outcome.reports.len(), 12);
    let manifest = write_outputs(dir.path(), &short_base(), &spec, &outcome).unwrap();
    assert!(manifest.complete);
    assert_eq!((manifest.runs_expected, manifest.runs_completed), (12, 12));

    let rows = read_results(&dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), 12);
    let keys: Vec<_> = rows.iter().map(|r| (r.node_count, r.strategy, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted, "rows are in grid order");

    let reports = std::fs::read_dir(dir.path().join(REPORTS_DIR)).unwrap().count();
    assert_eq!(reports, 12);
    for m in PlotMetric::ALL {
        assert!(dir.path().join(PLOT_DIR).join(m.file_name()).is_file());
    }
    let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    let parsed: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(parsed["complete"].as_bool(), Some(true));
}

#[test]
fn aggregates_recompute_from_results_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let outcome = run_sweep(&short_base(), &spec);
    write_outputs(dir.path(), &short_base(), &spec, &outcome).unwrap();
    let rows = read_results(&dir.path().join(RESULTS_FILE)).unwrap();

    let mut groups: BTreeMap<(usize, Strategy), Vec<&_>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.node_count, r.strategy)).or_default().push(r);
    }
    let aggs = aggregate(&rows);
    assert_eq!(aggs.len(), groups.len());
    for a in &aggs {
        let g = &groups[&(a.node_count, a.strategy)];
        assert_eq!(a.runs, g.len());
        let check = |got: (f64, f64), xs: Vec<f64>| {
            let want = oracle(&xs);
            assert!((got.0 - want.0).abs() < 1e-9 && (got.1 - want.1).abs() < 1e-9, "{got:?} vs {want:?}");
        };
        check((a.pdr_mean, a.pdr_std), g.iter().map(|r| r.pdr).collect());
        check((a.throughput_bps_mean, a.throughput_bps_std), g.iter().map(|r| r.throughput_bps).collect());
        check((a.total_swaps_mean, a.total_swaps_std), g.iter().map(|r| r.total_swaps as f64).collect());
        check((a.avg_energy_mj_mean, a.avg_energy_mj_std), g.iter().map(|r| r.avg_energy_mj).collect());
    }
}

#[test]
fn plot_data_refuses_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let outcome = run_sweep(&short_base(), &spec);
    let rows: Vec<_> =
        outcome.records().into_iter().filter(|r| !(r.node_count == 6 && r.strategy == Strategy::MaxQof)).collect();
    let err = emit_plot_data(&aggregate(&rows), &spec, dir.path()).unwrap_err();
    assert!(matches!(err, ExperimentError::EmptyCell { node_count: 6, strategy: Strategy::MaxQof }), "{err}");
}

#[test]
fn failed_runs_leave_a_partial_manifest_without_plots() {
    let dir = tempfile::tempdir().unwrap();
    // fixed two-node layout: the three-node cell cannot be built
    let base = SimConfig {
        topology: Some(ewqof_core::config::TopologySpec { positions: vec![[0.0, 0.0], [10.0, 0.0]] }),
        duration_slotframes: 20,
        ..SimConfig::default()
    };
    let spec = SweepSpec { node_counts: vec![2, 3], strategies: vec![Strategy::Ewqof], seeds: vec![1] };
    let outcome = run_sweep(&base, &spec);
    assert!(!outcome.is_complete());
    let manifest = write_outputs(dir.path(), &base, &spec, &outcome).unwrap();
    assert!(!manifest.complete);
    assert_eq!(manifest.runs_completed, 1);
    assert_eq!(manifest.failures.len(), 1);
    assert!(dir.path().join(MANIFEST_FILE).is_file());
    assert!(!dir.path().join(PLOT_DIR).exists());
}

#[test]
fn config_round_trips_through_toml() {
    let c = SimConfig { node_count: 37, k: 8, ..SimConfig::default() };
    let back = SimConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.config_hash(), c.config_hash());
    assert_ne!(SimConfig::default().config_hash(), c.config_hash());
}

#[test]
fn window_not_longer_than_i_min_is_rejected() {
    let v = SimConfig { k: 3, ..SimConfig::default() }.validate();
    assert!(!v.is_valid());
    assert!(v.errors.iter().any(|e| e.field == "k"), "{v}");
}
