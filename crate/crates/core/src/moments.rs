//! Moments linking node relevance `Z`, edge relevance probabilities `P` and
//! the relevant-item counts `Y`.
//!
//! Only the mean and covariance of `Z` are known, so any expectation that
//! involves three or four nodes needs a joint distribution over their
//! relevance. That joint is built by chaining Bayes linear conditional
//! expectations in ascending node order: each node's conditional probability
//! of relevance given the earlier nodes' values is its constrained adjusted
//! expectation. Pairs are recovered exactly from their moments.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::bayes_linear::{BlInputs, LinearAdjuster};
use crate::error::{Error, Result};
use crate::network::{EdgeId, EdgeStats, Network};
use crate::priors::{ConditionalBetaTable, MomentPrior};

/// Negative-cell magnitude up to which a pair table is silently repaired.
pub const CLIP_TOLERANCE: f64 = 1e-6;

/// Joint distribution of two binary relevances `(Z_u, Z_v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairJoint {
    pub p00: f64,
    /// `P(Z_u = 0, Z_v = 1)`.
    pub p01: f64,
    /// `P(Z_u = 1, Z_v = 0)`.
    pub p10: f64,
    pub p11: f64,
}

impl PairJoint {
    pub fn prob(&self, zu: bool, zv: bool) -> f64 {
        match (zu, zv) {
            (false, false) => self.p00,
            (false, true) => self.p01,
            (true, false) => self.p10,
            (true, true) => self.p11,
        }
    }

    fn states(&self) -> [(bool, bool, f64); 4] {
        [
            (false, false, self.p00),
            (true, false, self.p10),
            (false, true, self.p01),
            (true, true, self.p11),
        ]
    }
}

/// Pair table plus the size of the repair applied to make it a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedPair {
    pub joint: PairJoint,
    pub adjustment: f64,
}

/// Pair table from the two means and their covariance, with `P(1,1)` pulled
/// into its feasible range `[max(0, mu+mv-1), min(mu, mv)]` when needed.
/// Clamping `P(1,1)` keeps both marginal means intact.
pub fn pairwise_joint_clipped(mean_u: f64, mean_v: f64, cov_uv: f64) -> ClippedPair {
    let mu = mean_u.clamp(0.0, 1.0);
    let mv = mean_v.clamp(0.0, 1.0);
    let mut adjustment = (mu - mean_u).abs().max((mv - mean_v).abs());
    let raw = cov_uv + mu * mv;
    let hi = mu.min(mv);
    let lo = (mu + mv - 1.0).max(0.0).min(hi);
    let p11 = raw.clamp(lo, hi);
    adjustment = adjustment.max((p11 - raw).abs());
    let joint = PairJoint {
        p11,
        p10: (mu - p11).max(0.0),
        p01: (mv - p11).max(0.0),
        p00: (1.0 - mu - mv + p11).max(0.0),
    };
    ClippedPair { joint, adjustment }
}

/// Exact pair table implied by two means and a covariance.
pub fn pairwise_joint(mean_u: f64, mean_v: f64, cov_uv: f64) -> Result<PairJoint> {
    let c = pairwise_joint_clipped(mean_u, mean_v, cov_uv);
    if c.adjustment > CLIP_TOLERANCE {
        return Err(Error::InconsistentMoments(format!(
            "no binary pair has means ({mean_u}, {mean_v}) and covariance {cov_uv}"
        )));
    }
    Ok(c.joint)
}

/// Approximate joint distribution over up to four nodes' relevance.
///
/// State `s` assigns `z = (s >> i) & 1` to `nodes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointZTable {
    pub nodes: Vec<usize>,
    pub probs: Vec<f64>,
    /// Set when a conditioning covariance was singular and a factor fell
    /// back to the marginal.
    pub fallback: bool,
    /// Set when a chained conditional expectation left `[0, 1]` and was
    /// clamped; the table's marginals then drift from the input moments.
    pub clipped: bool,
}

impl JointZTable {
    pub fn z(state: usize, i: usize) -> bool {
        (state >> i) & 1 == 1
    }

    pub fn position(&self, node: usize) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }

    pub fn mean_of(&self, node: usize) -> f64 {
        let i = self.position(node).expect("node in table");
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| Self::z(*s, i))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn second_moment(&self, a: usize, b: usize) -> f64 {
        let (i, j) = (self.position(a).unwrap(), self.position(b).unwrap());
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| Self::z(*s, i) && Self::z(*s, j))
            .map(|(_, p)| p)
            .sum()
    }

    fn from_pair(u: usize, v: usize, p: &PairJoint) -> Self {
        Self {
            nodes: vec![u, v],
            probs: vec![p.p00, p.p10, p.p01, p.p11],
            fallback: false,
            clipped: false,
        }
    }
}

/// Approximate joint over a set of one to four distinct nodes.
///
/// Pairs use [`pairwise_joint`]. Larger sets chain conditional probabilities
/// in ascending node order, each from the constrained adjusted expectation
/// given the earlier nodes.
pub fn joint_z_approx(prior: &MomentPrior, nodes: &[usize]) -> Result<JointZTable> {
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != nodes.len() || sorted.is_empty() || sorted.len() > 4 {
        return Err(Error::InvalidParameter(format!(
            "joint approximation needs 1-4 distinct nodes, got {nodes:?}"
        )));
    }
    if let Some(&bad) = sorted.iter().find(|&&n| n >= prior.len()) {
        return Err(Error::Dimension(format!("node {bad} not in prior")));
    }
    let mean = |i: usize| prior.mean[sorted[i]].clamp(0.0, 1.0);
    match sorted.len() {
        1 => {
            let p = mean(0);
            return Ok(JointZTable {
                nodes: sorted,
                probs: vec![1.0 - p, p],
                fallback: false,
            clipped: false,
            });
        }
        2 => {
            let (u, v) = (sorted[0], sorted[1]);
            let pair = pairwise_joint(prior.mean[u], prior.mean[v], prior.cov[(u, v)])?;
            return Ok(JointZTable::from_pair(u, v, &pair));
        }
        _ => {}
    }

    let k = sorted.len();
    let mut probs = vec![0.0; 1 << k];
    let p0 = mean(0);
    probs[0] = 1.0 - p0;
    probs[1] = p0;
    let mut fallback = false;
    let mut clipped = false;
    for j in 1..k {
        let prev = &sorted[..j];
        let ez = DVector::from_element(1, prior.mean[sorted[j]]);
        let ey = DVector::from_iterator(j, prev.iter().map(|&p| prior.mean[p]));
        let vy = DMatrix::from_fn(j, j, |a, b| prior.cov[(prev[a], prev[b])]);
        let czy = DMatrix::from_fn(1, j, |_, b| prior.cov[(sorted[j], prev[b])]);
        let adjuster = LinearAdjuster::new(&ez, &ey, &vy, &czy).ok();
        fallback |= adjuster.is_none();
        for state in 0..(1 << j) {
            let base = probs[state];
            let cond = match &adjuster {
                Some(adj) => {
                    let y = DVector::from_iterator(
                        j,
                        (0..j).map(|i| if JointZTable::z(state, i) { 1.0 } else { 0.0 }),
                    );
                    let free = adj.unconstrained_means(&y)[0];
                    clipped |= !(0.0..=1.0).contains(&free);
                    free.clamp(0.0, 1.0)
                }
                None => mean(j),
            };
            probs[state] = base * (1.0 - cond);
            probs[state | (1 << j)] = base * cond;
        }
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    Ok(JointZTable {
        nodes: sorted,
        probs,
        fallback,
        clipped,
    })
}

/// `E[Z_k P_uv]` under the approximate joint over `{k, u, v}`.
pub fn expectation_zp(
    k: usize,
    edge: (usize, usize),
    prior: &MomentPrior,
    betas: &ConditionalBetaTable,
) -> Result<f64> {
    let (u, v) = edge;
    if k == u || k == v {
        let pair = pairwise_joint(prior.mean[u], prior.mean[v], prior.cov[(u, v)])?;
        return Ok(pair
            .states()
            .iter()
            .map(|&(zu, zv, p)| {
                let zk = if k == u { zu } else { zv };
                if zk {
                    p * betas.mean(zu, zv)
                } else {
                    0.0
                }
            })
            .sum());
    }
    let table = joint_z_approx(prior, &[k, u, v])?;
    let (ik, iu, iv) = (
        table.position(k).unwrap(),
        table.position(u).unwrap(),
        table.position(v).unwrap(),
    );
    Ok(table
        .probs
        .iter()
        .enumerate()
        .filter(|(s, _)| JointZTable::z(*s, ik))
        .map(|(s, p)| p * betas.mean(JointZTable::z(s, iu), JointZTable::z(s, iv)))
        .sum())
}

/// `E[P_uv P_ij]` for two distinct edges, using conditional independence of
/// the edge probabilities given the endpoint relevances.
pub fn expectation_pp(
    e1: (usize, usize),
    e2: (usize, usize),
    prior: &MomentPrior,
    betas: &ConditionalBetaTable,
) -> Result<f64> {
    let (e1, e2) = (canonical(e1), canonical(e2));
    if e1 == e2 {
        return Err(Error::InvalidParameter("edges must be distinct".into()));
    }
    let mut nodes = vec![e1.0, e1.1, e2.0, e2.1];
    nodes.sort_unstable();
    nodes.dedup();
    let table = joint_z_approx(prior, &nodes)?;
    let pos = |n: usize| table.position(n).unwrap();
    let (a, b, c, d) = (pos(e1.0), pos(e1.1), pos(e2.0), pos(e2.1));
    Ok(table
        .probs
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let z = |i| JointZTable::z(s, i);
            p * betas.mean(z(a), z(b)) * betas.mean(z(c), z(d))
        })
        .sum())
}

fn canonical((a, b): (usize, usize)) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// `E[P_uv]` and `E[P_uv^2] = E[Var(P|Z) + E[P|Z]^2]` from the exact pair table.
fn edge_first_moments(
    (u, v): (usize, usize),
    prior: &MomentPrior,
    betas: &ConditionalBetaTable,
) -> Result<(f64, f64)> {
    let pair = pairwise_joint(prior.mean[u], prior.mean[v], prior.cov[(u, v)])?;
    let mut ep = 0.0;
    let mut ep2 = 0.0;
    for (zu, zv, p) in pair.states() {
        let m = betas.mean(zu, zv);
        ep += p * m;
        ep2 += p * (betas.variance(zu, zv) + m * m);
    }
    Ok((ep, ep2))
}

/// Prior moments of the observable counts.
#[derive(Debug, Clone, PartialEq)]
pub struct YMoments {
    /// `E[Y]`, one entry per edge.
    pub mean: DVector<f64>,
    /// `E[Y Y^T]`.
    pub second: DMatrix<f64>,
    /// `E[Z Y^T]`, nodes by edges.
    pub cross: DMatrix<f64>,
}

impl YMoments {
    pub fn variance(&self) -> DMatrix<f64> {
        &self.second - &self.mean * self.mean.transpose()
    }

    /// Second-order inputs for an adjustment on the edges listed in `rows`.
    pub fn bl_inputs(&self, prior: &MomentPrior, rows: &[usize], y: &[f64]) -> BlInputs {
        let n = rows.len();
        let ey = DVector::from_iterator(n, rows.iter().map(|&e| self.mean[e]));
        let vy = DMatrix::from_fn(n, n, |a, b| {
            self.second[(rows[a], rows[b])] - ey[a] * ey[b]
        });
        let m = prior.len();
        let czy = DMatrix::from_fn(m, n, |k, b| self.cross[(k, rows[b])] - prior.mean[k] * ey[b]);
        BlInputs {
            ez: prior.mean.clone(),
            vz: prior.cov.clone(),
            ey,
            vy,
            czy,
            y: DVector::from_column_slice(y),
        }
    }
}

/// Lazily filled prior moments of the edge probabilities.
///
/// These depend only on the prior, so one cache serves a whole search; the
/// counts only rescale them into moments of `Y`.
#[derive(Debug, Clone)]
pub struct EdgeMomentCache {
    edges: Vec<(usize, usize)>,
    prior: MomentPrior,
    betas: ConditionalBetaTable,
    ep: Vec<f64>,
    ep2: Vec<f64>,
    zp: HashMap<usize, DVector<f64>>,
    pp: HashMap<(usize, usize), f64>,
}

impl EdgeMomentCache {
    pub fn new(network: &Network, prior: MomentPrior, betas: ConditionalBetaTable) -> Result<Self> {
        if prior.len() != network.node_count() {
            return Err(Error::Dimension(format!(
                "prior has {} nodes, network has {}",
                prior.len(),
                network.node_count()
            )));
        }
        let mut ep = Vec::with_capacity(network.edge_count());
        let mut ep2 = Vec::with_capacity(network.edge_count());
        for &edge in network.edges() {
            let (a, b) = edge_first_moments(edge, &prior, &betas)?;
            ep.push(a);
            ep2.push(b);
        }
        Ok(Self {
            edges: network.edges().to_vec(),
            prior,
            betas,
            ep,
            ep2,
            zp: HashMap::new(),
            pp: HashMap::new(),
        })
    }

    pub fn prior(&self) -> &MomentPrior {
        &self.prior
    }

    pub fn betas(&self) -> &ConditionalBetaTable {
        &self.betas
    }

    /// `E[P_e]`.
    pub fn ep(&self, e: EdgeId) -> f64 {
        self.ep[e.0]
    }

    /// `E[P_e^2]`.
    pub fn ep2(&self, e: EdgeId) -> f64 {
        self.ep2[e.0]
    }

    /// `E[Z P_e]` for every node.
    pub fn zp(&mut self, e: EdgeId) -> Result<&DVector<f64>> {
        if !self.zp.contains_key(&e.0) {
            let edge = self.edges[e.0];
            let col = (0..self.prior.len())
                .map(|k| expectation_zp(k, edge, &self.prior, &self.betas))
                .collect::<Result<Vec<_>>>()?;
            self.zp.insert(e.0, DVector::from_vec(col));
        }
        Ok(&self.zp[&e.0])
    }

    /// `E[P_e P_f]`, including `e == f`.
    pub fn pp(&mut self, e: EdgeId, f: EdgeId) -> Result<f64> {
        if e == f {
            return Ok(self.ep2[e.0]);
        }
        let key = (e.0.min(f.0), e.0.max(f.0));
        if let Some(&v) = self.pp.get(&key) {
            return Ok(v);
        }
        let v = expectation_pp(self.edges[key.0], self.edges[key.1], &self.prior, &self.betas)?;
        self.pp.insert(key, v);
        Ok(v)
    }

    /// Moments of the counts restricted to `edges`, which must all have been
    /// screened at least once; the index of `edges` is the row order.
    pub fn y_moments(&mut self, stats: &EdgeStats, edges: &[EdgeId]) -> Result<YMoments> {
        let n = edges.len();
        let counts: Vec<f64> = edges.iter().map(|&e| stats.get(e).n as f64).collect();
        let mean = DVector::from_iterator(n, edges.iter().zip(&counts).map(|(&e, &c)| c * self.ep(e)));
        let mut second = DMatrix::zeros(n, n);
        for a in 0..n {
            let (ea, na) = (edges[a], counts[a]);
            second[(a, a)] = na * (na - 1.0) * self.ep2(ea) + na * self.ep(ea);
            for b in 0..a {
                let v = na * counts[b] * self.pp(ea, edges[b])?;
                second[(a, b)] = v;
                second[(b, a)] = v;
            }
        }
        let m = self.prior.len();
        let mut cross = DMatrix::zeros(m, n);
        for (b, (&e, &c)) in edges.iter().zip(&counts).enumerate() {
            let col = self.zp(e)? * c;
            cross.set_column(b, &col);
        }
        Ok(YMoments { mean, second, cross })
    }
}

/// Prior moments of all edge counts given the current screening counts.
/// Edges never screened contribute zero rows and columns.
pub fn prior_y_moments(
    network: &Network,
    stats: &EdgeStats,
    prior: &MomentPrior,
    betas: &ConditionalBetaTable,
) -> Result<YMoments> {
    if stats.len() != network.edge_count() {
        return Err(Error::Dimension(format!(
            "stats cover {} edges, network has {}",
            stats.len(),
            network.edge_count()
        )));
    }
    let mut cache = EdgeMomentCache::new(network, prior.clone(), *betas)?;
    let observed = stats.observed_edges();
    let sub = cache.y_moments(stats, &observed)?;
    let (m, n) = (network.node_count(), network.edge_count());
    let mut out = YMoments {
        mean: DVector::zeros(n),
        second: DMatrix::zeros(n, n),
        cross: DMatrix::zeros(m, n),
    };
    for (a, ea) in observed.iter().enumerate() {
        out.mean[ea.0] = sub.mean[a];
        out.cross.set_column(ea.0, &sub.cross.column(a));
        for (b, eb) in observed.iter().enumerate() {
            out.second[(ea.0, eb.0)] = sub.second[(a, b)];
        }
    }
    Ok(out)
}

/// Posterior mean and variance of every edge's relevance probability.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Edges whose pair table needed a repair beyond [`CLIP_TOLERANCE`].
    pub clipped: Vec<bool>,
}

impl PMoments {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Mixture of Beta posteriors over the endpoint pair distribution.
    pub fn push_mixture(&mut self, pair: &PairJoint, betas: &ConditionalBetaTable, n: u64, y: u64, clipped: bool) {
        let mut mean = 0.0;
        let mut second = 0.0;
        for (zu, zv, p) in pair.states() {
            let (a, b) = betas.posterior(zu, zv, n, y);
            let s = a + b;
            let m = a / s;
            let v = a * b / (s * s * (s + 1.0));
            mean += p * m;
            second += p * (v + m * m);
        }
        self.mean.push(mean.clamp(0.0, 1.0));
        self.var.push((second - mean * mean).max(0.0));
        self.clipped.push(clipped);
    }
}

/// Edge probability moments implied by adjusted node beliefs and the counts.
pub fn posterior_p_moments(
    network: &Network,
    z_mean: &DVector<f64>,
    z_cov: &DMatrix<f64>,
    stats: &EdgeStats,
    betas: &ConditionalBetaTable,
) -> PMoments {
    let mut out = PMoments::default();
    for (i, &(u, v)) in network.edges().iter().enumerate() {
        let c = pairwise_joint_clipped(z_mean[u], z_mean[v], z_cov[(u, v)]);
        let count = stats.get(EdgeId(i));
        out.push_mixture(&c.joint, betas, count.n, count.y, c.adjustment > CLIP_TOLERANCE);
    }
    out
}
