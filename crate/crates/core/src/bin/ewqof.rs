use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ewqof_core::config::SimConfig;
use ewqof_core::experiment::{run_sweep, write_outputs, SweepSpec};
use ewqof_core::metrics::Strategy;
use ewqof_core::scenario::Scenario;

/// Run EWQOF / Max-QOF parent-swapping simulations.
#[derive(Parser)]
#[command(name = "ewqof", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration (every configured seed unless --seed is given).
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        nodes: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Sweep network sizes, strategies and seeds.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        nodes: Vec<usize>,
        /// Seed list: `1..10` (inclusive) or `1,2,5`. Defaults to the configured seeds.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<Seeds>,
        /// Comma-separated strategies.
        #[arg(long, value_delimiter = ',', default_value = "ewqof,maxqof")]
        strategies: Vec<Strategy>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run a built-in scenario under both strategies.
    Scenario {
        #[arg(long)]
        name: Scenario,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check a configuration without running it.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration; absent keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = "EWQOF_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b.trim_start_matches('=').trim().parse().map_err(|e| format!("bad seed range end: {e}"))?;
        if a > b {
            return Err(format!("empty seed range {a}..{b}"));
        }
        return Ok(Seeds((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|e| format!("bad seed '{x}': {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Seeds)
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

fn load(config: &ConfigArg) -> Result<SimConfig, Failure> {
    match &config.config {
        Some(p) => SimConfig::from_path(p).map_err(|e| Failure::Invalid(e.to_string())),
        None => Ok(SimConfig::default()),
    }
}

fn check(base: &SimConfig, spec: &SweepSpec) -> Result<(), Failure> {
    let mut warned = std::collections::BTreeSet::new();
    for (n, s) in spec.cells() {
        let v = base.for_run(n, s, spec.seeds[0]).validate();
        for w in v.warnings.iter().filter(|w| warned.insert(w.to_string())) {
            eprintln!("warning: {w}");
        }
        if !v.is_valid() {
            let errors: Vec<String> = v.errors.iter().map(|e| format!("  {e}")).collect();
            return Err(Failure::Invalid(format!("node_count = {n}, strategy = {s}:\n{}", errors.join("\n"))));
        }
    }
    Ok(())
}

fn execute(base: &SimConfig, spec: &SweepSpec, out: &Path) -> Result<(), Failure> {
    if spec.seeds.is_empty() {
        return Err(Failure::Invalid("no seeds given".into()));
    }
    check(base, spec)?;
    let outcome = run_sweep(base, spec);
    let manifest = write_outputs(out, base, spec, &outcome).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{} of {} runs written to {}", manifest.runs_completed, manifest.runs_expected, out.display());
    if !manifest.complete {
        let lines: Vec<String> = manifest
            .failures
            .iter()
            .map(|f| format!("  n = {}, {}, seed {}: {}", f.node_count, f.strategy, f.seed, f.error))
            .collect();
        return Err(Failure::Runtime(format!("incomplete sweep:\n{}", lines.join("\n"))));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, seed, strategy, nodes, out } => {
            let mut base = load(&config)?;
            if let Some(s) = strategy {
                base.strategy = s;
            }
            if let Some(n) = nodes {
                base.node_count = n;
            }
            if let Some(seed) = seed {
                base.seeds = vec![seed];
            }
            let spec = SweepSpec {
                node_counts: vec![base.node_count],
                strategies: vec![base.strategy],
                seeds: base.seeds.clone(),
            };
            execute(&base, &spec, &out.out)
        }
        Command::Sweep { config, nodes, seeds, strategies, out } => {
            let mut base = load(&config)?;
            if let Some(Seeds(s)) = seeds {
                base.seeds = s;
            }
            let spec = SweepSpec { node_counts: nodes, strategies, seeds: base.seeds.clone() };
            execute(&base, &spec, &out.out)
        }
        Command::Scenario { name, out } => {
            let base = name.config();
            let spec = SweepSpec {
                node_counts: vec![base.node_count],
                strategies: Strategy::ALL.to_vec(),
                seeds: base.seeds.clone(),
            };
            execute(&base, &spec, &out.out)
        }
        Command::Validate { config } => {
            let base = load(&config)?;
            let v = base.validate();
            print!("{v}");
            if v.is_valid() {
                println!("ok");
                Ok(())
            } else {
                Err(Failure::Invalid("configuration rejected".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
