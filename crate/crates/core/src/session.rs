//! One interactive or simulated search: counts, beliefs, the policy's
//! random stream and an append-only audit trail.
//!
//! The recommendation is computed once per state, right after creation and
//! after every recorded classification. Asking for it repeatedly is free and
//! returns the same edge, and the policy's random stream advances exactly
//! once per step, so replaying an audit log reproduces the session.

use serde::{Deserialize, Serialize};

use crate::bayes_linear::ClipFlag;
use crate::error::{Error, Result};
use crate::model::{BeliefModel, ModelKind, PriorSpec};
use crate::network::{EdgeId, EdgeStats, Network, Observation};
use crate::policy::{EdgeScoreBoard, Policy, PolicyConfig};

/// One classification, as stored in the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    /// Value of `t` after this classification.
    pub step: u64,
    pub edge: EdgeId,
    pub relevant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub edge: EdgeId,
    pub scoreboard: EdgeScoreBoard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeBelief {
    pub id: String,
    pub mean: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeBelief {
    pub u: String,
    pub v: String,
    pub p_mean: f64,
    pub p_var: f64,
    pub n: u64,
    pub y: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRef {
    pub u: String,
    pub v: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub t: u64,
    pub nodes: Vec<NodeBelief>,
    pub edges: Vec<EdgeBelief>,
    pub recommended: Option<EdgeRef>,
}

#[derive(Debug, Clone)]
pub struct SearchSession {
    network: Network,
    prior: PriorSpec,
    policy: Policy,
    model: BeliefModel,
    stats: EdgeStats,
    available: Vec<bool>,
    audit: Vec<AuditRecord>,
    recommendation: Option<Recommendation>,
}

impl SearchSession {
    pub fn new(network: Network, prior: PriorSpec, model: ModelKind, policy: PolicyConfig) -> Result<Self> {
        let available = vec![true; network.edge_count()];
        Self::with_available(network, prior, model, policy, available)
    }

    /// A session in which only edges flagged in `available` can be chosen.
    pub fn with_available(
        network: Network,
        prior: PriorSpec,
        model: ModelKind,
        policy: PolicyConfig,
        available: Vec<bool>,
    ) -> Result<Self> {
        if available.len() != network.edge_count() {
            return Err(Error::Dimension(format!(
                "{} availability flags for {} edges",
                available.len(),
                network.edge_count()
            )));
        }
        let policy = Policy::new(policy)?;
        let beliefs = BeliefModel::new(model, &network, &prior)?;
        let mut s = Self {
            stats: EdgeStats::for_network(&network),
            available,
            network,
            prior,
            policy,
            model: beliefs,
            audit: Vec::new(),
            recommendation: None,
        };
        s.recompute_recommendation()?;
        Ok(s)
    }

    /// Rebuilds a session from its creation inputs and audit trail.
    pub fn replay(
        network: Network,
        prior: PriorSpec,
        model: ModelKind,
        policy: PolicyConfig,
        audit: &[AuditRecord],
    ) -> Result<Self> {
        let mut s = Self::new(network, prior, model, policy)?;
        for (i, rec) in audit.iter().enumerate() {
            if rec.step != i as u64 + 1 {
                return Err(Error::Parse(format!("audit step {} out of order at entry {}", rec.step, i + 1)));
            }
            s.record(Observation { edge: rec.edge, relevant: rec.relevant })?;
        }
        Ok(s)
    }

    fn recompute_recommendation(&mut self) -> Result<()> {
        self.recommendation = if self.available.iter().any(|&a| a) {
            let (edge, scoreboard) = self.policy.select(self.model.p_moments(), &self.available, self.t() + 1)?;
            Some(Recommendation { edge, scoreboard })
        } else {
            None
        };
        Ok(())
    }

    /// Items screened so far.
    pub fn t(&self) -> u64 {
        self.audit.len() as u64
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn policy_config(&self) -> &PolicyConfig {
        self.policy.config()
    }

    pub fn model(&self) -> &BeliefModel {
        &self.model
    }

    pub fn stats(&self) -> &EdgeStats {
        &self.stats
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn recommend(&self) -> Result<&Recommendation> {
        self.recommendation.as_ref().ok_or(Error::NoAvailableEdges)
    }

    pub fn record(&mut self, obs: Observation) -> Result<&AuditRecord> {
        self.record_with(obs, false)
    }

    /// Records a classification; `exhausted` marks the edge as having no
    /// items left before the next recommendation is made.
    pub fn record_with(&mut self, obs: Observation, exhausted: bool) -> Result<&AuditRecord> {
        if obs.edge.0 >= self.network.edge_count() {
            return Err(Error::UnknownEdge(obs.edge.to_string()));
        }
        let stats = self.stats.with_observation(obs)?;
        let mut model = self.model.clone();
        model.observe(&self.network, &stats, obs)?;
        self.stats = stats;
        self.model = model;
        if exhausted {
            self.available[obs.edge.0] = false;
        }
        self.audit.push(AuditRecord { step: self.t() + 1, edge: obs.edge, relevant: obs.relevant });
        self.recompute_recommendation()?;
        Ok(self.audit.last().expect("just pushed"))
    }

    pub fn snapshot(&self) -> BeliefSnapshot {
        let net = &self.network;
        let means = self.model.node_means(net);
        let flags = self.model.clip_flags(net);
        let p = self.model.p_moments();
        let nodes = (0..net.node_count())
            .map(|u| NodeBelief {
                id: net.label(u).to_string(),
                mean: means[u],
                clipped: flags[u] != ClipFlag::None,
            })
            .collect();
        let edges = net
            .edge_ids()
            .map(|e| {
                let (u, v) = net.edge(e);
                let c = self.stats.get(e);
                EdgeBelief {
                    u: net.label(u).to_string(),
                    v: net.label(v).to_string(),
                    p_mean: p.mean[e.0],
                    p_var: p.var[e.0],
                    n: c.n,
                    y: c.y,
                }
            })
            .collect();
        BeliefSnapshot {
            t: self.t(),
            nodes,
            edges,
            recommended: self.recommendation.as_ref().map(|r| self.edge_ref(r.edge)),
        }
    }

    pub fn edge_ref(&self, e: EdgeId) -> EdgeRef {
        let (u, v) = self.network.edge(e);
        EdgeRef {
            u: self.network.label(u).to_string(),
            v: self.network.label(v).to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{CliqueFactor, ConditionalBetaTable, StructuredCovConfig};

    fn line_session(policy: PolicyConfig) -> SearchSession {
        let net = Network::from_labels(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        let prior = PriorSpec::clique(CliqueFactor::new(0.5, 0.5).unwrap(), ConditionalBetaTable::prior_conditional_1());
        SearchSession::new(net, prior, ModelKind::Bl, policy).unwrap()
    }

    #[test]
    fn recommendation_is_stable_until_data() {
        let mut s = line_session(PolicyConfig::epsilon_greedy(0.5, 3));
        let first = s.recommend().unwrap().clone();
        assert_eq!(s.recommend().unwrap(), &first);
        assert_eq!(s.snapshot(), s.snapshot());
        s.record(Observation { edge: first.edge, relevant: true }).unwrap();
        assert_eq!(s.t(), 1);
        assert_eq!(s.audit()[0], AuditRecord { step: 1, edge: first.edge, relevant: true });
    }

    #[test]
    fn replay_reproduces_state() {
        let mut s = line_session(PolicyConfig::epsilon_greedy(0.3, 17));
        for i in 0..12 {
            let e = s.recommend().unwrap().edge;
            s.record(Observation { edge: e, relevant: i % 3 == 0 }).unwrap();
        }
        let r = SearchSession::replay(
            s.network().clone(),
            *s.prior(),
            s.model_kind(),
            *s.policy_config(),
            s.audit(),
        )
        .unwrap();
        assert_eq!(r.snapshot(), s.snapshot());
        assert_eq!(r.recommend().unwrap(), s.recommend().unwrap());
    }

    #[test]
    fn replay_rejects_gaps() {
        let s = line_session(PolicyConfig::greedy());
        let bad = [AuditRecord { step: 2, edge: EdgeId(0), relevant: true }];
        let r = SearchSession::replay(s.network().clone(), *s.prior(), ModelKind::Bl, PolicyConfig::greedy(), &bad);
        assert!(r.is_err());
    }

    #[test]
    fn unknown_edge_leaves_state_untouched() {
        let mut s = line_session(PolicyConfig::greedy());
        let before = s.snapshot();
        assert!(s.record(Observation { edge: EdgeId(5), relevant: true }).is_err());
        assert_eq!(s.snapshot(), before);
    }

    #[test]
    fn exhaustion_closes_edges() {
        let mut s = line_session(PolicyConfig::greedy());
        s.record_with(Observation { edge: EdgeId(0), relevant: false }, true).unwrap();
        assert_eq!(s.recommend().unwrap().edge, EdgeId(1));
        s.record_with(Observation { edge: EdgeId(1), relevant: false }, true).unwrap();
        assert_eq!(s.recommend().err(), Some(Error::NoAvailableEdges));
        assert!(s.snapshot().recommended.is_none());
    }

    #[test]
    fn neighbour_beliefs_move() {
        let net = Network::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let prior = PriorSpec::structured(StructuredCovConfig::new(0.25, 0.8).unwrap(), ConditionalBetaTable::prior_conditional_2());
        let mut s = SearchSession::new(net, prior, ModelKind::Bl, PolicyConfig::greedy()).unwrap();
        let before = s.snapshot();
        s.record(Observation { edge: EdgeId(0), relevant: true }).unwrap();
        let after = s.snapshot();
        assert!((after.nodes[2].mean - before.nodes[2].mean).abs() > 1e-12);
        assert!(after.nodes.iter().all(|n| (0.0..=1.0).contains(&n.mean)));
    }
}
