//! Repeated-run experiment grids: networks × ρ × models × policies × reps.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::NetworkJson;
use crate::model::{ModelKind, PriorSpec};
use crate::network::Network;
use crate::oracle::MAX_EXACT_NODES;
use crate::policy::PolicyConfig;
use crate::sim::generators::{clustered_network, line_network, planted_network};
use crate::sim::morans::{edge_morans_i, node_morans_i};
use crate::sim::pool::build_item_pool;
use crate::sim::run::{run_search, RunMetrics};
use crate::sim::truth::{fixed_edge_probs, infect_relevancies, sample_edge_probs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Line {
        nodes: usize,
    },
    Clustered {
        cliques: usize,
        size: usize,
        rewire: f64,
    },
    /// Nodes `0..core_nodes` form the relevant core.
    Planted {
        core_nodes: usize,
        core_edges: Vec<(usize, usize)>,
        decoys: usize,
        attach_p: f64,
    },
    Inline {
        network: NetworkJson,
    },
}

impl NetworkSpec {
    fn name(&self) -> String {
        match self {
            NetworkSpec::Line { nodes } => format!("line({nodes})"),
            NetworkSpec::Clustered { cliques, size, rewire } => format!("clustered({cliques}x{size},{rewire})"),
            NetworkSpec::Planted { core_nodes, decoys, attach_p, .. } => {
                format!("planted({core_nodes}+{decoys},{attach_p})")
            }
            NetworkSpec::Inline { network } => format!("inline({})", network.nodes.len()),
        }
    }

    fn build(&self, rng: &mut ChaCha8Rng) -> Result<Network> {
        match self {
            NetworkSpec::Line { nodes } => line_network(*nodes),
            NetworkSpec::Clustered { cliques, size, rewire } => clustered_network(*cliques, *size, *rewire, rng),
            NetworkSpec::Planted { core_nodes, core_edges, decoys, attach_p } => {
                planted_network(*core_nodes, core_edges, *decoys, *attach_p, rng)
            }
            NetworkSpec::Inline { network } => network.build(),
        }
    }

    fn core_nodes(&self) -> Option<usize> {
        match self {
            NetworkSpec::Planted { core_nodes, .. } => Some(*core_nodes),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    /// Node relevance from the infection process, one run per ρ.
    #[default]
    Infection,
    /// Core nodes of a planted network are relevant, all others not.
    Planted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeProbKind {
    /// 0, 0.2 or 0.9 by the number of relevant endpoints.
    #[default]
    Fixed,
    /// Drawn from the prior's conditional Beta table.
    Sampled,
}

fn default_items_mean() -> f64 {
    30.0
}

fn default_rhos() -> Vec<f64> {
    vec![0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub networks: Vec<NetworkSpec>,
    pub priors: PriorSpec,
    pub models: Vec<ModelKind>,
    pub policies: Vec<PolicyConfig>,
    pub horizon: usize,
    pub reps: usize,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default)]
    pub truth: TruthKind,
    #[serde(default)]
    pub edge_probs: EdgeProbKind,
    #[serde(default = "default_items_mean")]
    pub items_mean: f64,
    #[serde(default)]
    pub seed: u64,
    /// Second moments for the independent model; each value is a separate
    /// configuration. Empty means the prior's default pair distribution.
    #[serde(default)]
    pub independent_p11: Vec<f64>,
    /// Draw a new network for every repetition instead of one per ρ.
    #[serde(default)]
    pub redraw_network: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::InvalidParameter(format!("`{field}`: {msg}")));
        if self.horizon == 0 {
            return bad("horizon", "must be at least 1".into());
        }
        if self.reps == 0 {
            return bad("reps", "must be at least 1".into());
        }
        if !(self.items_mean > 0.0 && self.items_mean.is_finite()) {
            return bad("items_mean", format!("must be positive, got {}", self.items_mean));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return bad("rhos", format!("{r} outside [0,1]"));
        }
        if self.truth == TruthKind::Infection && self.rhos.is_empty() {
            return bad("rhos", "infection truth needs at least one value".into());
        }
        if let Err(e) = self.priors.validate() {
            return bad("priors", e.to_string());
        }
        for p in &self.policies {
            if let Err(e) = p.validate() {
                return bad("policies", e.to_string());
            }
        }
        if !self.independent_p11.is_empty() {
            let Some(m) = self.priors.moment else {
                return bad("independent_p11", "requires a `moment` prior".into());
            };
            for &p11 in &self.independent_p11 {
                if let Err(e) = crate::priors::independent_prior_family(m.mu, p11) {
                    return bad("independent_p11", e.to_string());
                }
            }
        }
        for n in &self.networks {
            if self.truth == TruthKind::Planted && n.core_nodes().is_none() {
                return bad("truth", format!("planted truth needs planted networks, got {}", n.name()));
            }
            if self.models.contains(&ModelKind::ExactMrf) {
                let nodes = match n {
                    NetworkSpec::Line { nodes } => *nodes,
                    NetworkSpec::Clustered { cliques, size, .. } => cliques * size,
                    NetworkSpec::Planted { core_nodes, decoys, .. } => core_nodes + decoys,
                    NetworkSpec::Inline { network } => network.nodes.len(),
                };
                if nodes > MAX_EXACT_NODES {
                    return Err(Error::NodeCapExceeded { nodes, cap: MAX_EXACT_NODES });
                }
            }
        }
        Ok(())
    }

    fn model_variants(&self) -> Vec<(ModelKind, Option<f64>)> {
        let mut out = Vec::new();
        for &m in &self.models {
            if m == ModelKind::Independent && !self.independent_p11.is_empty() {
                out.extend(self.independent_p11.iter().map(|&p| (m, Some(p))));
            } else {
                out.push((m, None));
            }
        }
        out
    }

    fn rho_values(&self) -> Vec<Option<f64>> {
        match self.truth {
            TruthKind::Infection => self.rhos.iter().map(|&r| Some(r)).collect(),
            TruthKind::Planted => vec![None],
        }
    }
}

/// Deterministic seed for a position in the grid.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut x = master;
    for &p in parts {
        x ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub network: String,
    pub rho: Option<f64>,
    pub model: String,
    pub p11: Option<f64>,
    pub policy: String,
    pub rep: usize,
    pub step: usize,
    pub edge: usize,
    pub cumulative_relevant: u64,
    pub edge_changed: bool,
    pub quantile95_hit: bool,
    pub quantile90_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub network: String,
    pub rho: Option<f64>,
    pub model: String,
    pub p11: Option<f64>,
    pub policy: String,
    pub reps: usize,
    pub total_relevant: MeanSe,
    pub edge_changes: MeanSe,
    pub quantile95_rate: MeanSe,
    pub quantile90_rate: MeanSe,
    /// Mean over repetitions where the statistic is defined.
    pub morans_i_nodes: Option<f64>,
    pub morans_i_edges: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<ConfigSummary>,
}

impl ExperimentOutput {
    pub fn is_empty(&self) -> bool {
        self.summary.is_empty()
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `results.csv` and `summary.json` into `dir`. Nothing is written
    /// for an empty grid.
    pub fn write(&self, dir: &Path) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.csv_bytes()?)?;
        let mut json = serde_json::to_string_pretty(&self.summary)?;
        json.push('\n');
        fs::write(dir.join("summary.json"), json)?;
        Ok(())
    }
}

struct RepOutcome {
    runs: Vec<RunMetrics>,
    morans_nodes: Option<f64>,
    morans_edges: Option<f64>,
}

/// Runs the whole grid. Repetitions are spread over the rayon pool; the
/// output depends only on the configuration and its seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let variants = cfg.model_variants();
    let mut out = ExperimentOutput::default();
    if cfg.networks.is_empty() || variants.is_empty() || cfg.policies.is_empty() {
        return Ok(out);
    }
    for (ni, spec) in cfg.networks.iter().enumerate() {
        for (ri, rho) in cfg.rho_values().into_iter().enumerate() {
            let cell = [ni as u64, ri as u64];
            let shared = if cfg.redraw_network {
                None
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[cell[0], cell[1], u64::MAX]));
                Some(spec.build(&mut rng)?)
            };
            let reps: Vec<RepOutcome> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| run_rep(cfg, spec, shared.as_ref(), rho, &variants, cell, rep))
                .collect::<Result<_>>()?;
            let name = spec.name();
            let mut k = 0;
            for &(model, p11) in &variants {
                for policy in &cfg.policies {
                    let runs: Vec<&RunMetrics> = reps.iter().map(|r| &r.runs[k]).collect();
                    for (rep, m) in runs.iter().enumerate() {
                        for s in 0..m.steps() {
                            out.rows.push(ResultRow {
                                network: name.clone(),
                                rho,
                                model: model.name().into(),
                                p11,
                                policy: policy.name(),
                                rep,
                                step: s + 1,
                                edge: m.edges[s].0,
                                cumulative_relevant: m.cumulative_relevant[s],
                                edge_changed: m.edge_changed[s],
                                quantile95_hit: m.quantile95_hit[s],
                                quantile90_hit: m.quantile90_hit[s],
                            });
                        }
                    }
                    let rate = |hits: &[bool]| {
                        if hits.is_empty() {
                            0.0
                        } else {
                            hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
                        }
                    };
                    let mean_defined = |xs: Vec<Option<f64>>| {
                        let d: Vec<f64> = xs.into_iter().flatten().collect();
                        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
                    };
                    out.summary.push(ConfigSummary {
                        network: name.clone(),
                        rho,
                        model: model.name().into(),
                        p11,
                        policy: policy.name(),
                        reps: cfg.reps,
                        total_relevant: MeanSe::of(&runs.iter().map(|m| m.total_relevant() as f64).collect::<Vec<_>>()),
                        edge_changes: MeanSe::of(&runs.iter().map(|m| m.edge_changes() as f64).collect::<Vec<_>>()),
                        quantile95_rate: MeanSe::of(&runs.iter().map(|m| rate(&m.quantile95_hit)).collect::<Vec<_>>()),
                        quantile90_rate: MeanSe::of(&runs.iter().map(|m| rate(&m.quantile90_hit)).collect::<Vec<_>>()),
                        morans_i_nodes: mean_defined(reps.iter().map(|r| r.morans_nodes).collect()),
                        morans_i_edges: mean_defined(reps.iter().map(|r| r.morans_edges).collect()),
                    });
                    k += 1;
                }
            }
        }
    }
    Ok(out)
}

fn run_rep(
    cfg: &ExperimentConfig,
    spec: &NetworkSpec,
    shared: Option<&Network>,
    rho: Option<f64>,
    variants: &[(ModelKind, Option<f64>)],
    cell: [u64; 2],
    rep: usize,
) -> Result<RepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[cell[0], cell[1], rep as u64]));
    let owned;
    let network = match shared {
        Some(n) => n,
        None => {
            owned = spec.build(&mut rng)?;
            &owned
        }
    };
    let z_true = match (cfg.truth, rho) {
        (TruthKind::Infection, Some(r)) => infect_relevancies(network, r, &mut rng),
        _ => {
            let core = spec.core_nodes().unwrap_or(0);
            (0..network.node_count()).map(|u| u < core).collect()
        }
    };
    let p_true = match cfg.edge_probs {
        EdgeProbKind::Fixed => fixed_edge_probs(network, &z_true),
        EdgeProbKind::Sampled => sample_edge_probs(network, &z_true, &cfg.priors.conditional_beta, &mut rng),
    };
    let pools = build_item_pool(&p_true, cfg.items_mean, &mut rng)?;
    let mut runs = Vec::new();
    for &(model, p11) in variants {
        let mut prior = cfg.priors;
        prior.p11 = p11;
        for (pi, policy) in cfg.policies.iter().enumerate() {
            let mut policy = *policy;
            policy.seed = derive_seed(policy.seed, &[cell[0], cell[1], rep as u64, pi as u64]);
            runs.push(run_search(network, model, &prior, policy, &pools, &p_true, cfg.horizon)?);
        }
    }
    Ok(RepOutcome {
        runs,
        morans_nodes: node_morans_i(network, &z_true).ok(),
        morans_edges: edge_morans_i(network, &p_true).ok(),
    })
}
