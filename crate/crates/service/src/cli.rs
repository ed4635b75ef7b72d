//! Batch experiment command.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use netsearch_core::sim::experiment::{ConfigSummary, ExperimentConfig};
use netsearch_core::sim::{run_experiment, ExperimentOutput};

/// Loads the configuration, runs the grid on `threads` workers (all cores
/// when `None`) and writes outputs into `out`.
pub fn run(config: &Path, out: &Path, seed: Option<u64>, threads: Option<usize>) -> anyhow::Result<ExperimentOutput> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("invalid config {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
    let output = pool.install(|| run_experiment(&cfg))?;
    output.write(out).with_context(|| format!("writing results to {}", out.display()))?;
    Ok(output)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

pub fn summary_table(rows: &[ConfigSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:>5} {:<12} {:>5} {:<22} {:>18} {:>18}",
        "network", "rho", "model", "p11", "policy", "relevant", "edge changes"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<28} {:>5} {:<12} {:>5} {:<22} {:>18} {:>18}",
            r.network,
            opt(r.rho),
            r.model,
            opt(r.p11),
            r.policy,
            format!("{:.2} ± {:.2}", r.total_relevant.mean, r.total_relevant.se),
            format!("{:.2} ± {:.2}", r.edge_changes.mean, r.edge_changes.se),
        );
    }
    s
}
