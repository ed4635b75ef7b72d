//! Exact reference models.
//!
//! [`exact_posterior`] enumerates every relevance configuration of a small
//! pairwise MRF, weighting each by the clique factors and the Beta-Binomial
//! marginal likelihood of the screened counts. [`IndependentEdgeBelief`] is
//! the baseline that ignores the network: each edge carries its own
//! four-component mixture of Beta beliefs.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::moments::{PMoments, PairJoint};
use crate::network::{EdgeId, EdgeStats, Network, Observation};
use crate::priors::{CliqueFactor, ConditionalBetaTable, IndependentPairPrior, MomentPrior};

/// Largest network handled by exhaustive enumeration.
pub const MAX_EXACT_NODES: usize = 20;

/// Probability table over all `2^m` relevance configurations; bit `u` of the
/// state index is `z_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfDistribution {
    node_count: usize,
    probs: Vec<f64>,
}

impl MrfDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `P(Z_u = 1)` for every node.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count];
        for (s, &p) in self.probs.iter().enumerate() {
            for (u, slot) in out.iter_mut().enumerate() {
                if (s >> u) & 1 == 1 {
                    *slot += p;
                }
            }
        }
        out
    }

    /// Means and covariance of `Z`.
    pub fn moments(&self) -> MomentPrior {
        let m = self.node_count;
        let mut mean = DVector::<f64>::zeros(m);
        let mut second = DMatrix::<f64>::zeros(m, m);
        let mut set = Vec::with_capacity(m);
        for (s, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            set.clear();
            set.extend((0..m).filter(|&u| (s >> u) & 1 == 1));
            for (a, &u) in set.iter().enumerate() {
                mean[u] += p;
                for &v in &set[..a] {
                    second[(u, v)] += p;
                }
            }
        }
        let mut cov = DMatrix::zeros(m, m);
        for u in 0..m {
            cov[(u, u)] = mean[u] * (1.0 - mean[u]);
            for v in 0..u {
                let c = second[(u, v)] - mean[u] * mean[v];
                cov[(u, v)] = c;
                cov[(v, u)] = c;
            }
        }
        MomentPrior { mean, cov }
    }

    /// Exact joint of `(Z_u, Z_v)`.
    pub fn pair(&self, u: usize, v: usize) -> PairJoint {
        let mut t = [0.0; 4];
        for (s, &p) in self.probs.iter().enumerate() {
            let idx = ((s >> u) & 1) + 2 * ((s >> v) & 1);
            t[idx] += p;
        }
        PairJoint {
            p00: t[0],
            p10: t[1],
            p01: t[2],
            p11: t[3],
        }
    }
}

fn log_likelihood(betas: &ConditionalBetaTable, zu: bool, zv: bool, n: u64, y: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (a, b) = betas.params(zu, zv);
    ln_beta(a + y as f64, b + (n - y) as f64) - ln_beta(a, b)
}

/// Distribution `∝ Π_edges phi(z_u, z_v) [· L(y_e | z_u, z_v)]`, computed in
/// log space. Pass the counts and Beta table to condition on screened items.
pub fn enumerate_mrf(
    network: &Network,
    clique: &CliqueFactor,
    evidence: Option<(&EdgeStats, &ConditionalBetaTable)>,
) -> Result<MrfDistribution> {
    let m = network.node_count();
    if m > MAX_EXACT_NODES {
        return Err(Error::NodeCapExceeded { nodes: m, cap: MAX_EXACT_NODES });
    }
    if let Some((stats, _)) = evidence {
        if stats.len() != network.edge_count() {
            return Err(Error::Dimension("stats do not match network".into()));
        }
    }
    // Per edge: log factor (+ log likelihood) indexed by z_u + 2 z_v.
    let tables: Vec<(usize, usize, [f64; 4])> = network
        .edges()
        .iter()
        .enumerate()
        .map(|(i, &(u, v))| {
            let mut t = [0.0; 4];
            for (idx, slot) in t.iter_mut().enumerate() {
                let (zu, zv) = (idx & 1 == 1, idx & 2 == 2);
                *slot = clique.value(zu, zv).ln();
                if let Some((stats, betas)) = evidence {
                    let c = stats.get(EdgeId(i));
                    *slot += log_likelihood(betas, zu, zv, c.n, c.y);
                }
            }
            (u, v, t)
        })
        .collect();
    let mut logw: Vec<f64> = (0..1usize << m)
        .map(|s| {
            tables
                .iter()
                .map(|(u, v, t)| t[((s >> u) & 1) + 2 * ((s >> v) & 1)])
                .sum()
        })
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in logw.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    logw.iter_mut().for_each(|w| *w /= total);
    Ok(MrfDistribution { node_count: m, probs: logw })
}

/// Exact posterior over node relevance together with the implied edge
/// probability moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub z: MrfDistribution,
    pub p_moments: PMoments,
}

pub fn exact_posterior(
    network: &Network,
    clique: &CliqueFactor,
    betas: &ConditionalBetaTable,
    stats: &EdgeStats,
) -> Result<ExactPosterior> {
    let z = enumerate_mrf(network, clique, Some((stats, betas)))?;
    let mut p_moments = PMoments::default();
    for (i, &(u, v)) in network.edges().iter().enumerate() {
        let c = stats.get(EdgeId(i));
        p_moments.push_mixture(&z.pair(u, v), betas, c.n, c.y, false);
    }
    Ok(ExactPosterior { z, p_moments })
}

/// Per-edge mixture-of-Beta beliefs that ignore every other edge.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentEdgeBelief {
    /// Component weights indexed by `z_u + 2 z_v`.
    weights: Vec<[f64; 4]>,
    params: Vec<[(f64, f64); 4]>,
}

fn component(idx: usize) -> (bool, bool) {
    (idx & 1 == 1, idx & 2 == 2)
}

impl IndependentEdgeBelief {
    pub fn new(edge_count: usize, pair: &IndependentPairPrior, betas: &ConditionalBetaTable) -> Self {
        let w = std::array::from_fn(|i| {
            let (zu, zv) = component(i);
            pair.prob(zu, zv)
        });
        let p = std::array::from_fn(|i| {
            let (zu, zv) = component(i);
            betas.params(zu, zv)
        });
        Self {
            weights: vec![w; edge_count],
            params: vec![p; edge_count],
        }
    }

    /// Belief after the given counts, computed in one step from the
    /// Beta-Binomial marginal likelihood of each component.
    pub fn from_counts(
        pair: &IndependentPairPrior,
        betas: &ConditionalBetaTable,
        stats: &EdgeStats,
    ) -> Self {
        let mut out = Self::new(stats.len(), pair, betas);
        for (e, c) in stats.counts().iter().enumerate() {
            if c.n == 0 {
                continue;
            }
            let logs: [f64; 4] = std::array::from_fn(|i| {
                let (zu, zv) = component(i);
                let w = pair.prob(zu, zv);
                if w > 0.0 {
                    w.ln() + log_likelihood(betas, zu, zv, c.n, c.y)
                } else {
                    f64::NEG_INFINITY
                }
            });
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut w: [f64; 4] = std::array::from_fn(|i| (logs[i] - max).exp());
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            out.weights[e] = w;
            out.params[e] = std::array::from_fn(|i| {
                let (zu, zv) = component(i);
                betas.posterior(zu, zv, c.n, c.y)
            });
        }
        out
    }

    pub fn weights(&self, edge: EdgeId) -> [f64; 4] {
        self.weights[edge.0]
    }

    pub fn params(&self, edge: EdgeId) -> [(f64, f64); 4] {
        self.params[edge.0]
    }

    /// Conjugate update of the observed edge: each component's weight is
    /// scaled by its predictive probability of the outcome.
    pub fn update(&mut self, obs: Observation) -> Result<()> {
        let e = obs.edge.0;
        if e >= self.weights.len() {
            return Err(Error::UnknownEdge(obs.edge.to_string()));
        }
        let w = &mut self.weights[e];
        let p = &mut self.params[e];
        for i in 0..4 {
            let (a, b) = p[i];
            let pred = if obs.relevant { a / (a + b) } else { b / (a + b) };
            w[i] *= pred;
            p[i] = if obs.relevant { (a + 1.0, b) } else { (a, b + 1.0) };
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Ok(())
    }

    pub fn p_moments(&self) -> PMoments {
        let mut out = PMoments::default();
        for (w, p) in self.weights.iter().zip(&self.params) {
            let mut mean = 0.0;
            let mut second = 0.0;
            for i in 0..4 {
                let (a, b) = p[i];
                let s = a + b;
                let m = a / s;
                mean += w[i] * m;
                second += w[i] * (a * b / (s * s * (s + 1.0)) + m * m);
            }
            out.mean.push(mean);
            out.var.push((second - mean * mean).max(0.0));
            out.clipped.push(false);
        }
        out
    }
}

/// Value-semantics form of [`IndependentEdgeBelief::update`].
pub fn independent_update(belief: &IndependentEdgeBelief, obs: Observation) -> Result<IndependentEdgeBelief> {
    let mut next = belief.clone();
    next.update(obs)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::EdgeCount;
    use crate::priors::{exact_prior_moments, independent_prior_family};
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_evidence_matches_prior() {
        let net = Network::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let clique = CliqueFactor::new(0.5, 1.5).unwrap();
        let betas = ConditionalBetaTable::prior_conditional_1();
        let post = exact_posterior(&net, &clique, &betas, &EdgeStats::for_network(&net)).unwrap();
        let prior = exact_prior_moments(&net, &clique).unwrap();
        let got = post.z.moments();
        for i in 0..4 {
            assert_abs_diff_eq!(got.mean[i], prior.mean[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn single_edge_bayes_table() {
        let net = Network::new(2, &[(0, 1)]).unwrap();
        let clique = CliqueFactor::new(0.0, 0.0).unwrap();
        let betas = ConditionalBetaTable::prior_conditional_1();
        let stats = EdgeStats::from_counts(vec![EdgeCount { n: 4, y: 4 }]).unwrap();
        let post = exact_posterior(&net, &clique, &betas, &stats).unwrap();
        // Likelihoods B(5,1)/B(1,1) = 1/5, B(5,4)/B(1,4) = 1/70, B(5,9)/B(1,9) = 1/715.
        let l = [1.0 / 715.0, 1.0 / 70.0, 1.0 / 70.0, 1.0 / 5.0];
        let total: f64 = l.iter().sum();
        let pair = post.z.pair(0, 1);
        assert_abs_diff_eq!(pair.p11, l[3] / total, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.p11, 0.869_678_540_399_652_5, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.p00, 0.006_081_668_114_682_884, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.p01, pair.p10, epsilon = 1e-15);
    }

    #[test]
    fn cap_enforced() {
        let net = Network::new(21, &[]).unwrap();
        let r = exact_posterior(
            &net,
            &CliqueFactor::new(0.5, 0.5).unwrap(),
            &Default::default(),
            &EdgeStats::for_network(&net),
        );
        assert!(matches!(r, Err(Error::NodeCapExceeded { nodes: 21, cap: 20 })));
    }

    #[test]
    fn large_counts_do_not_underflow() {
        let edges: Vec<_> = (0..19).map(|i| (i, i + 1)).collect();
        let net = Network::new(20, &edges).unwrap();
        let counts = (0..19).map(|i| EdgeCount { n: 400, y: 40 * (i % 3) }).collect();
        let stats = EdgeStats::from_counts(counts).unwrap();
        let post = exact_posterior(
            &net,
            &CliqueFactor::new(0.5, 0.5).unwrap(),
            &ConditionalBetaTable::prior_conditional_2(),
            &stats,
        )
        .unwrap();
        let total: f64 = post.z.probs().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        assert!(post.p_moments.mean.iter().all(|m| m.is_finite() && (0.0..=1.0).contains(m)));
    }

    #[test]
    fn independent_relevant_step() {
        let pair = independent_prior_family(0.25, 0.13).unwrap();
        let betas = ConditionalBetaTable::prior_conditional_2();
        let mut b = IndependentEdgeBelief::new(2, &pair, &betas);
        b.update(Observation { edge: EdgeId(0), relevant: true }).unwrap();
        let raw = [0.63 * 0.1, 0.12 * 0.2, 0.12 * 0.2, 0.13 * 0.9];
        let total: f64 = raw.iter().sum();
        let w = b.weights(EdgeId(0));
        for i in 0..4 {
            assert_abs_diff_eq!(w[i], raw[i] / total, epsilon = 1e-12);
        }
        assert_eq!(b.params(EdgeId(0))[3], (10.0, 1.0));
        // Untouched edge keeps its prior.
        assert_eq!(b.weights(EdgeId(1)), [pair.p00, pair.p10, pair.p01, pair.p11]);
    }

    #[test]
    fn independent_symmetric_components_stay_equal() {
        let pair = independent_prior_family(0.25, 0.08).unwrap();
        let betas = ConditionalBetaTable::prior_conditional_1();
        let mut b = IndependentEdgeBelief::new(1, &pair, &betas);
        for r in [true, false, false, true, true, false] {
            b.update(Observation { edge: EdgeId(0), relevant: r }).unwrap();
            let w = b.weights(EdgeId(0));
            assert_eq!(w[1], w[2]);
        }
    }

    #[test]
    fn independent_incremental_matches_counts() {
        let pair = independent_prior_family(0.25, 0.04).unwrap();
        let betas = ConditionalBetaTable::prior_conditional_2();
        let mut b = IndependentEdgeBelief::new(2, &pair, &betas);
        let seq = [(0, true), (1, false), (0, false), (0, true), (1, true)];
        let mut stats = EdgeStats::new(2);
        for (e, r) in seq {
            let obs = Observation { edge: EdgeId(e), relevant: r };
            b.update(obs).unwrap();
            stats.record(obs).unwrap();
        }
        let direct = IndependentEdgeBelief::from_counts(&pair, &betas, &stats);
        for e in 0..2 {
            let (x, y) = (b.weights(EdgeId(e)), direct.weights(EdgeId(e)));
            for i in 0..4 {
                assert_abs_diff_eq!(x[i], y[i], epsilon = 1e-12);
            }
        }
    }
}
