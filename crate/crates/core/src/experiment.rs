//! Sweeps over network sizes, strategies and seeds, and the files they
//! produce.
//!
//! Output layout of a sweep directory:
//!
//! - `results.csv`: one row per run, see [`RunRecord`] for the column order.
//! - `aggregates.csv`: mean and sample standard deviation per
//!   (node_count, strategy) cell.
//! - `plot/{throughput,pdr,swaps,energy}.csv`: `strategy,node_count,mean,std`.
//! - `reports/n{N}_{strategy}_s{seed}.json`: full per-run report.
//! - `MANIFEST.toml`: grid, load, completeness and failures.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::engine::{self, SimError};
use crate::metrics::Strategy;
use crate::report::MetricsReport;
use crate::traffic::TrafficKind;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing manifest: {0}")]
    Manifest(#[from] toml::ser::Error),
    #[error("no completed runs for node_count = {node_count}, strategy = {strategy}")]
    EmptyCell { node_count: usize, strategy: Strategy },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// The grid of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub node_counts: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// Cells in output order.
    pub fn cells(&self) -> Vec<(usize, Strategy)> {
        let mut cells: Vec<_> =
            self.node_counts.iter().flat_map(|&n| self.strategies.iter().map(move |&s| (n, s))).collect();
        cells.sort();
        cells.dedup();
        cells
    }

    pub fn runs(&self) -> Vec<(usize, Strategy, u64)> {
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        self.cells().into_iter().flat_map(|(n, s)| seeds.iter().map(move |&seed| (n, s, seed))).collect()
    }
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub node_count: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped_retry: u64,
    pub dropped_queue: u64,
    pub pdr: f64,
    pub throughput_bps: f64,
    pub total_swaps: u64,
    pub avg_energy_mj: f64,
    pub duration_s: f64,
    pub config_hash: String,
}

impl From<&MetricsReport> for RunRecord {
    fn from(r: &MetricsReport) -> Self {
        RunRecord {
            node_count: r.node_count,
            strategy: r.strategy,
            seed: r.seed,
            generated: r.generated,
            delivered: r.delivered,
            dropped_retry: r.dropped_retry,
            dropped_queue: r.dropped_queue,
            pdr: r.pdr,
            throughput_bps: r.throughput_bps,
            total_swaps: r.total_swaps,
            avg_energy_mj: r.avg_energy_mj,
            duration_s: r.duration_s,
            config_hash: r.config_hash.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub node_count: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    /// Sorted by (node_count, strategy, seed).
    pub reports: Vec<MetricsReport>,
    pub failures: Vec<RunFailure>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<RunRecord> {
        self.reports.iter().map(RunRecord::from).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every (node_count, strategy, seed) of `spec` on top of `base`, in
/// parallel. Results come back in grid order whatever the completion order.
pub fn run_sweep(base: &SimConfig, spec: &SweepSpec) -> SweepOutcome {
    let results: Vec<(usize, Strategy, u64, Result<MetricsReport, SimError>)> = spec
        .runs()
        .into_par_iter()
        .map(|(n, s, seed)| (n, s, seed, engine::run(&base.for_run(n, s, seed), seed)))
        .collect();
    let mut out = SweepOutcome::default();
    for (node_count, strategy, seed, r) in results {
        match r {
            Ok(report) => out.reports.push(report),
            Err(e) => out.failures.push(RunFailure { node_count, strategy, seed, error: e.to_string() }),
        }
    }
    out
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row of `aggregates.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub node_count: usize,
    pub strategy: Strategy,
    pub runs: usize,
    pub pdr_mean: f64,
    pub pdr_std: f64,
    pub throughput_bps_mean: f64,
    pub throughput_bps_std: f64,
    pub total_swaps_mean: f64,
    pub total_swaps_std: f64,
    pub avg_energy_mj_mean: f64,
    pub avg_energy_mj_std: f64,
}

impl Aggregate {
    pub fn mean_std(&self, metric: PlotMetric) -> (f64, f64) {
        match metric {
            PlotMetric::Throughput => (self.throughput_bps_mean, self.throughput_bps_std),
            PlotMetric::Pdr => (self.pdr_mean, self.pdr_std),
            PlotMetric::Swaps => (self.total_swaps_mean, self.total_swaps_std),
            PlotMetric::Energy => (self.avg_energy_mj_mean, self.avg_energy_mj_std),
        }
    }
}

/// Aggregates per (node_count, strategy), in that order.
pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut cells: BTreeMap<(usize, Strategy), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.node_count, r.strategy)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((node_count, strategy), rows)| {
            let col = |f: fn(&RunRecord) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (pdr_mean, pdr_std) = col(|r| r.pdr);
            let (throughput_bps_mean, throughput_bps_std) = col(|r| r.throughput_bps);
            let (total_swaps_mean, total_swaps_std) = col(|r| r.total_swaps as f64);
            let (avg_energy_mj_mean, avg_energy_mj_std) = col(|r| r.avg_energy_mj);
            Aggregate {
                node_count,
                strategy,
                runs: rows.len(),
                pdr_mean,
                pdr_std,
                throughput_bps_mean,
                throughput_bps_std,
                total_swaps_mean,
                total_swaps_std,
                avg_energy_mj_mean,
                avg_energy_mj_std,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlotMetric {
    Throughput,
    Pdr,
    Swaps,
    Energy,
}

impl PlotMetric {
    pub const ALL: [PlotMetric; 4] = [PlotMetric::Throughput, PlotMetric::Pdr, PlotMetric::Swaps, PlotMetric::Energy];

    pub fn file_name(self) -> &'static str {
        match self {
            PlotMetric::Throughput => "throughput.csv",
            PlotMetric::Pdr => "pdr.csv",
            PlotMetric::Swaps => "swaps.csv",
            PlotMetric::Energy => "energy.csv",
        }
    }
}

#[derive(Debug, Serialize)]
struct PlotPoint {
    strategy: Strategy,
    node_count: usize,
    mean: f64,
    std: f64,
}

/// Writes one series file per metric into `dir`. Every cell of `spec` must
/// have at least one completed run.
pub fn emit_plot_data(aggregates: &[Aggregate], spec: &SweepSpec, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let by_cell: BTreeMap<(usize, Strategy), &Aggregate> =
        aggregates.iter().filter(|a| a.runs > 0).map(|a| ((a.node_count, a.strategy), a)).collect();
    let mut strategies = spec.strategies.clone();
    strategies.sort();
    strategies.dedup();
    let mut sizes = spec.node_counts.clone();
    sizes.sort_unstable();
    sizes.dedup();
    for &strategy in &strategies {
        for &node_count in &sizes {
            if !by_cell.contains_key(&(node_count, strategy)) {
                return Err(ExperimentError::EmptyCell { node_count, strategy });
            }
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for metric in PlotMetric::ALL {
        let path = dir.join(metric.file_name());
        let mut w = csv::Writer::from_path(&path)?;
        for &strategy in &strategies {
            for &node_count in &sizes {
                let (mean, std) = by_cell[&(node_count, strategy)].mean_std(metric);
                w.serialize(PlotPoint { strategy, node_count, mean, std })?;
            }
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Offered load recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub kind: TrafficKind,
    pub base_rate_pps: f64,
    pub burst_rate_pps: f64,
    pub burst_duration_slots: u64,
    pub burst_period_slotframes: u64,
    /// Long-run mean packets per second per non-root node.
    pub mean_rate_pps: f64,
}

impl LoadSummary {
    pub fn new(c: &SimConfig) -> LoadSummary {
        let t = &c.traffic;
        let slots_per_frame = c.slotframe_slots;
        let mean_rate_pps = match t.kind {
            TrafficKind::Steady => t.base_rate_pps,
            TrafficKind::Bursty => {
                let period = t.burst_period_slotframes.max(1);
                let burst = t.burst_slotframes(slots_per_frame).min(period);
                (t.burst_rate_pps * burst as f64 + t.base_rate_pps * (period - burst) as f64) / period as f64
            }
            TrafficKind::Scripted => {
                let total: u64 = t
                    .script
                    .iter()
                    .filter(|e| e.node.index() > 0 && e.node.index() < c.node_count)
                    .map(|e| e.counts.iter().take(c.duration_slotframes as usize).map(|&x| u64::from(x)).sum::<u64>())
                    .sum();
                let node_seconds =
                    c.node_count.saturating_sub(1) as f64 * c.duration_slotframes as f64 * c.slotframe_s();
                if node_seconds > 0.0 {
                    total as f64 / node_seconds
                } else {
                    0.0
                }
            }
        };
        LoadSummary {
            kind: t.kind,
            base_rate_pps: t.base_rate_pps,
            burst_rate_pps: t.burst_rate_pps,
            burst_duration_slots: t.burst_duration_slots,
            burst_period_slotframes: t.burst_period_slotframes,
            mean_rate_pps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub complete: bool,
    pub runs_expected: usize,
    pub runs_completed: usize,
    pub node_counts: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub duration_slotframes: u64,
    /// Hash of the base configuration before per-run overrides.
    pub base_config_hash: String,
    pub load: LoadSummary,
    pub failures: Vec<RunFailure>,
}

impl Manifest {
    pub fn new(base: &SimConfig, spec: &SweepSpec, outcome: &SweepOutcome) -> Manifest {
        let mut seeds = spec.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        Manifest {
            complete: outcome.is_complete() && outcome.reports.len() == spec.runs().len(),
            runs_expected: spec.runs().len(),
            runs_completed: outcome.reports.len(),
            node_counts: spec
                .cells()
                .iter()
                .map(|c| c.0)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect(),
            strategies: spec
                .cells()
                .iter()
                .map(|c| c.1)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect(),
            seeds,
            duration_slotframes: base.duration_slotframes,
            base_config_hash: base.config_hash(),
            load: LoadSummary::new(base),
            failures: outcome.failures.clone(),
        }
    }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const MANIFEST_FILE: &str = "MANIFEST.toml";
pub const PLOT_DIR: &str = "plot";
pub const REPORTS_DIR: &str = "reports";

pub fn report_file_name(r: &MetricsReport) -> String {
    format!("n{}_{}_s{}.json", r.node_count, r.strategy, r.seed)
}

/// Writes every output of a sweep into `dir`. Plot series are only written
/// when the sweep is complete. The manifest is written last.
pub fn write_outputs(
    dir: &Path,
    base: &SimConfig,
    spec: &SweepSpec,
    outcome: &SweepOutcome,
) -> Result<Manifest, ExperimentError> {
    let reports_dir = dir.join(REPORTS_DIR);
    fs::create_dir_all(&reports_dir).map_err(io_err(&reports_dir))?;

    let records = outcome.records();
    write_csv(&dir.join(RESULTS_FILE), &records)?;
    let aggregates = aggregate(&records);
    write_csv(&dir.join(AGGREGATES_FILE), &aggregates)?;
    for r in &outcome.reports {
        let path = reports_dir.join(report_file_name(r));
        fs::write(&path, r.to_json()).map_err(io_err(&path))?;
    }
    let manifest = Manifest::new(base, spec, outcome);
    if manifest.complete {
        emit_plot_data(&aggregates, spec, &dir.join(PLOT_DIR))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, toml::to_string(&manifest)?).map_err(io_err(&path))?;
    Ok(manifest)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads `results.csv` back.
pub fn read_results(path: &Path) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<RunRecord>, _>>()?)
}
