//! Belief models driving a search: the constrained Bayes linear engine, the
//! exact MRF posterior and the independent-edge baseline share one interface.

use serde::{Deserialize, Serialize};

use crate::bayes_linear::{constrained_update, BeliefState, ClipFlag};
use crate::error::{Error, Result};
use crate::moments::{posterior_p_moments, EdgeMomentCache, PMoments};
use crate::network::{EdgeStats, Network, Observation};
use crate::oracle::{exact_posterior, IndependentEdgeBelief, MAX_EXACT_NODES};
use crate::priors::{
    exact_prior_moments, independent_prior_family, structured_covariance, CliqueFactor,
    ConditionalBetaTable, IndependentPairPrior, MomentPrior, StructuredCovConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bl,
    ExactMrf,
    Independent,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Bl => "bl",
            ModelKind::ExactMrf => "exact_mrf",
            ModelKind::Independent => "independent",
        }
    }
}

/// Everything a model may need to form its prior.
///
/// The Bayes linear model takes its moments from `moment` when present and
/// otherwise enumerates the clique MRF. The independent model uses
/// `(moment.mu, p11)` when both are given, otherwise the normalised clique
/// factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clique: Option<CliqueFactor>,
    #[serde(default)]
    pub conditional_beta: ConditionalBetaTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment: Option<StructuredCovConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p11: Option<f64>,
}

impl PriorSpec {
    pub fn clique(clique: CliqueFactor, betas: ConditionalBetaTable) -> Self {
        Self { clique: Some(clique), conditional_beta: betas, moment: None, p11: None }
    }

    pub fn structured(moment: StructuredCovConfig, betas: ConditionalBetaTable) -> Self {
        Self { clique: None, conditional_beta: betas, moment: Some(moment), p11: None }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.clique {
            c.validate()?;
        }
        if let Some(m) = &self.moment {
            m.validate()?;
        }
        if self.clique.is_none() && self.moment.is_none() {
            return Err(Error::InvalidParameter("prior needs `clique` or `moment`".into()));
        }
        if self.p11.is_some() && self.moment.is_none() {
            return Err(Error::InvalidParameter("`p11` requires a `moment` prior".into()));
        }
        self.pair_prior().map(|_| ())
    }

    pub fn moment_prior(&self, network: &Network) -> Result<MomentPrior> {
        match (&self.moment, &self.clique) {
            (Some(m), _) => structured_covariance(network, m),
            (None, Some(c)) => exact_prior_moments(network, c),
            (None, None) => Err(Error::InvalidParameter("prior needs `clique` or `moment`".into())),
        }
    }

    pub fn pair_prior(&self) -> Result<IndependentPairPrior> {
        match (&self.moment, self.p11, &self.clique) {
            (Some(m), Some(p11), _) => independent_prior_family(m.mu, p11),
            (Some(m), None, _) => independent_prior_family(m.mu, m.mu * m.mu),
            (None, _, Some(c)) => Ok(c.pair_prior()),
            (None, _, None) => Err(Error::InvalidParameter("prior needs `clique` or `moment`".into())),
        }
    }
}

/// Current beliefs under one of the three models.
#[derive(Debug, Clone)]
pub enum BeliefModel {
    Bl {
        cache: Box<EdgeMomentCache>,
        state: BeliefState,
        p: PMoments,
    },
    ExactMrf {
        clique: CliqueFactor,
        betas: ConditionalBetaTable,
        node_means: Vec<f64>,
        p: PMoments,
    },
    Independent {
        belief: IndependentEdgeBelief,
        betas: ConditionalBetaTable,
        prior_mean: f64,
        p: PMoments,
    },
}

impl BeliefModel {
    /// Beliefs before any screening.
    pub fn new(kind: ModelKind, network: &Network, spec: &PriorSpec) -> Result<Self> {
        spec.validate()?;
        let betas = spec.conditional_beta;
        let stats = EdgeStats::for_network(network);
        let mut model = match kind {
            ModelKind::Bl => {
                let prior = spec.moment_prior(network)?;
                let cache = EdgeMomentCache::new(network, prior.clone(), betas)?;
                let m = prior.len();
                BeliefModel::Bl {
                    cache: Box::new(cache),
                    state: BeliefState {
                        mean: prior.mean,
                        cov: prior.cov,
                        clip_flags: vec![ClipFlag::None; m],
                    },
                    p: PMoments::default(),
                }
            }
            ModelKind::ExactMrf => {
                let clique = spec.clique.ok_or_else(|| {
                    Error::InvalidParameter("exact_mrf model needs a `clique` prior".into())
                })?;
                if network.node_count() > MAX_EXACT_NODES {
                    return Err(Error::NodeCapExceeded {
                        nodes: network.node_count(),
                        cap: MAX_EXACT_NODES,
                    });
                }
                BeliefModel::ExactMrf { clique, betas, node_means: Vec::new(), p: PMoments::default() }
            }
            ModelKind::Independent => {
                let pair = spec.pair_prior()?;
                BeliefModel::Independent {
                    belief: IndependentEdgeBelief::new(network.edge_count(), &pair, &betas),
                    betas,
                    prior_mean: pair.p10 + pair.p11,
                    p: PMoments::default(),
                }
            }
        };
        model.refresh(network, &stats)?;
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            BeliefModel::Bl { .. } => ModelKind::Bl,
            BeliefModel::ExactMrf { .. } => ModelKind::ExactMrf,
            BeliefModel::Independent { .. } => ModelKind::Independent,
        }
    }

    /// Folds in one observation; `stats` must already include it.
    pub fn observe(&mut self, network: &Network, stats: &EdgeStats, obs: Observation) -> Result<()> {
        if let BeliefModel::Independent { belief, .. } = self {
            belief.update(obs)?;
        }
        self.refresh(network, stats)
    }

    fn refresh(&mut self, network: &Network, stats: &EdgeStats) -> Result<()> {
        match self {
            BeliefModel::Bl { cache, state, p } => {
                let observed = stats.observed_edges();
                let ym = cache.y_moments(stats, &observed)?;
                let y: Vec<f64> = observed.iter().map(|&e| stats.get(e).y as f64).collect();
                let rows: Vec<usize> = (0..observed.len()).collect();
                let inputs = ym.bl_inputs(cache.prior(), &rows, &y);
                *state = constrained_update(&inputs)?;
                *p = posterior_p_moments(network, &state.mean, &state.cov, stats, cache.betas());
            }
            BeliefModel::ExactMrf { clique, betas, node_means, p } => {
                let post = exact_posterior(network, clique, betas, stats)?;
                *node_means = post.z.marginals();
                *p = post.p_moments;
            }
            BeliefModel::Independent { belief, p, .. } => {
                *p = belief.p_moments();
            }
        }
        Ok(())
    }

    pub fn p_moments(&self) -> &PMoments {
        match self {
            BeliefModel::Bl { p, .. } | BeliefModel::ExactMrf { p, .. } | BeliefModel::Independent { p, .. } => p,
        }
    }

    /// Posterior relevance of each node. The independent model has no joint
    /// node belief; it reports the average over incident edges of each
    /// edge's own posterior, or the prior mean for isolated nodes.
    pub fn node_means(&self, network: &Network) -> Vec<f64> {
        match self {
            BeliefModel::Bl { state, .. } => state.mean.iter().copied().collect(),
            BeliefModel::ExactMrf { node_means, .. } => node_means.clone(),
            BeliefModel::Independent { belief, prior_mean, .. } => {
                let mut sum = vec![0.0; network.node_count()];
                let mut deg = vec![0usize; network.node_count()];
                for (id, &(u, v)) in network.edge_ids().zip(network.edges()) {
                    let w = belief.weights(id);
                    sum[u] += w[1] + w[3];
                    sum[v] += w[2] + w[3];
                    deg[u] += 1;
                    deg[v] += 1;
                }
                sum.iter()
                    .zip(&deg)
                    .map(|(&s, &d)| if d == 0 { *prior_mean } else { s / d as f64 })
                    .collect()
            }
        }
    }

    /// Constraint activity per node; only the Bayes linear model clips.
    pub fn clip_flags(&self, network: &Network) -> Vec<ClipFlag> {
        match self {
            BeliefModel::Bl { state, .. } => state.clip_flags.clone(),
            _ => vec![ClipFlag::None; network.node_count()],
        }
    }

    /// Full Bayes linear belief state, when this is the Bayes linear model.
    pub fn bl_state(&self) -> Option<&BeliefState> {
        match self {
            BeliefModel::Bl { state, .. } => Some(state),
            _ => None,
        }
    }

    pub fn betas(&self) -> &ConditionalBetaTable {
        match self {
            BeliefModel::Bl { cache, .. } => cache.betas(),
            BeliefModel::ExactMrf { betas, .. } | BeliefModel::Independent { betas, .. } => betas,
        }
    }
}
