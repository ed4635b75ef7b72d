//! A single simulated search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, PriorSpec};
use crate::network::{EdgeId, Network, Observation};
use crate::policy::PolicyConfig;
use crate::session::SearchSession;
use crate::sim::pool::ItemPools;

/// Per-step trace of a search.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub edges: Vec<EdgeId>,
    pub cumulative_relevant: Vec<u64>,
    pub edge_changed: Vec<bool>,
    pub quantile95_hit: Vec<bool>,
    pub quantile90_hit: Vec<bool>,
}

impl RunMetrics {
    pub fn steps(&self) -> usize {
        self.edges.len()
    }

    pub fn total_relevant(&self) -> u64 {
        self.cumulative_relevant.last().copied().unwrap_or(0)
    }

    pub fn edge_changes(&self) -> u64 {
        self.edge_changed.iter().filter(|&&c| c).count() as u64
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Screens up to `horizon` items, one per step: the policy picks an edge
/// from current beliefs, the edge's next item is revealed and folded in.
/// Stops early when every pool is empty.
pub fn run_search(
    network: &Network,
    model: ModelKind,
    prior: &PriorSpec,
    policy: PolicyConfig,
    pools: &ItemPools,
    p_true: &[f64],
    horizon: usize,
) -> Result<RunMetrics> {
    if pools.edge_count() != network.edge_count() || p_true.len() != network.edge_count() {
        return Err(Error::Dimension("pools and probabilities must cover every edge".into()));
    }
    let mut metrics = RunMetrics::default();
    if horizon == 0 {
        return Ok(metrics);
    }
    let q95 = quantile(p_true, 0.95);
    let q90 = quantile(p_true, 0.90);
    let mut pools = pools.clone();
    let mut session = SearchSession::with_available(network.clone(), *prior, model, policy, pools.available())?;
    let mut found = 0;
    for _ in 0..horizon {
        let edge = match session.recommend() {
            Ok(r) => r.edge,
            Err(Error::NoAvailableEdges) => break,
            Err(e) => return Err(e),
        };
        let relevant = pools.pop(edge).ok_or(Error::NoAvailableEdges)?;
        session.record_with(Observation { edge, relevant }, pools.remaining(edge) == 0)?;
        found += relevant as u64;
        metrics.edge_changed.push(metrics.edges.last().is_some_and(|&prev| prev != edge));
        metrics.edges.push(edge);
        metrics.cumulative_relevant.push(found);
        metrics.quantile95_hit.push(p_true[edge.0] >= q95);
        metrics.quantile90_hit.push(p_true[edge.0] >= q90);
    }
    Ok(metrics)
}
