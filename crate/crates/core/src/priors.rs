//! Priors: pairwise clique factors, conditional Beta tables for
//! edge relevance probabilities, moment-form priors over node relevance, and
//! the pair prior of the independent-edge baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::oracle::{self, MAX_EXACT_NODES};

/// Homophily factor `phi(z_i, z_j)` attached to every edge of a pairwise MRF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliqueFactor {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl CliqueFactor {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let f = Self { lambda1, lambda2 };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0)
            || !self.lambda1.is_finite()
            || !self.lambda2.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "clique factor lambdas must be finite and >= 0, got ({}, {})",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }

    pub fn value(&self, zi: bool, zj: bool) -> f64 {
        match (zi, zj) {
            (false, false) => 1.0 + self.lambda1,
            (true, true) => 1.0 + self.lambda2,
            _ => 1.0,
        }
    }

    /// Pair distribution proportional to the factor, as used by the
    /// independent-edge model when no moment prior is supplied.
    pub fn pair_prior(&self) -> IndependentPairPrior {
        let total = 4.0 + self.lambda1 + self.lambda2;
        IndependentPairPrior {
            p00: (1.0 + self.lambda1) / total,
            p01: 1.0 / total,
            p10: 1.0 / total,
            p11: (1.0 + self.lambda2) / total,
        }
    }
}

/// Beta shape parameters of `P_uv | Z_u, Z_v` for each endpoint configuration.
///
/// Indexed by `(z_u, z_v)` where `u < v` is the canonical edge orientation.
/// Serialised as `{"00": [a, b], "01": [a, b], "10": [a, b], "11": [a, b]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BetaTableWire", into = "BetaTableWire")]
pub struct ConditionalBetaTable {
    entries: [[(f64, f64); 2]; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaTableWire {
    #[serde(rename = "00")]
    p00: (f64, f64),
    #[serde(rename = "01")]
    p01: (f64, f64),
    #[serde(rename = "10")]
    p10: (f64, f64),
    #[serde(rename = "11")]
    p11: (f64, f64),
}

impl TryFrom<BetaTableWire> for ConditionalBetaTable {
    type Error = Error;

    fn try_from(w: BetaTableWire) -> Result<Self> {
        Self::new([[w.p00, w.p01], [w.p10, w.p11]])
    }
}

impl From<ConditionalBetaTable> for BetaTableWire {
    fn from(t: ConditionalBetaTable) -> Self {
        let [[p00, p01], [p10, p11]] = t.entries;
        Self { p00, p01, p10, p11 }
    }
}

impl ConditionalBetaTable {
    pub fn new(entries: [[(f64, f64); 2]; 2]) -> Result<Self> {
        for row in &entries {
            for &(a, b) in row {
                if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "beta parameters must be positive and finite, got ({a}, {b})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Symmetric table from the `(0,0)`, mixed and `(1,1)` parameters.
    pub fn symmetric(p00: (f64, f64), mixed: (f64, f64), p11: (f64, f64)) -> Result<Self> {
        Self::new([[p00, mixed], [mixed, p11]])
    }

    /// Sceptical table: relevant items stay rare even between two relevant
    /// participants.
    pub fn prior_conditional_1() -> Self {
        Self {
            entries: [[(1.0, 9.0), (1.0, 4.0)], [(1.0, 4.0), (1.0, 1.0)]],
        }
    }

    /// Table where two relevant participants exchange mostly relevant items.
    pub fn prior_conditional_2() -> Self {
        Self {
            entries: [[(1.0, 9.0), (1.0, 4.0)], [(1.0, 4.0), (9.0, 1.0)]],
        }
    }

    pub fn params(&self, zu: bool, zv: bool) -> (f64, f64) {
        self.entries[zu as usize][zv as usize]
    }

    pub fn mean(&self, zu: bool, zv: bool) -> f64 {
        let (a, b) = self.params(zu, zv);
        a / (a + b)
    }

    pub fn variance(&self, zu: bool, zv: bool) -> f64 {
        let (a, b) = self.params(zu, zv);
        beta_variance(a, b)
    }

    /// Conjugate posterior parameters after `y` relevant out of `n` screened.
    pub fn posterior(&self, zu: bool, zv: bool, n: u64, y: u64) -> (f64, f64) {
        let (a, b) = self.params(zu, zv);
        (a + y as f64, b + (n - y) as f64)
    }

    /// Conditional means indexed by pair state `zu + 2*zv`.
    pub fn means_by_state(&self) -> [f64; 4] {
        [
            self.mean(false, false),
            self.mean(true, false),
            self.mean(false, true),
            self.mean(true, true),
        ]
    }
}

impl Default for ConditionalBetaTable {
    fn default() -> Self {
        Self::prior_conditional_1()
    }
}

fn beta_variance(a: f64, b: f64) -> f64 {
    let s = a + b;
    a * b / (s * s * (s + 1.0))
}

/// Mean and variance of `Beta(a, b)`.
pub fn beta_moments(a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta parameters must be positive, got ({a}, {b})"
        )));
    }
    Ok((a / (a + b), beta_variance(a, b)))
}

/// Prior expectation and covariance of the node relevance vector `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPrior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

const MOMENT_TOL: f64 = 1e-9;

impl MomentPrior {
    /// Validates the bounds on the means, the Bernoulli variance ceiling,
    /// symmetry and positive semi-definiteness.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if cov.nrows() != m || cov.ncols() != m {
            return Err(Error::Dimension(format!(
                "covariance is {}x{} for {m} means",
                cov.nrows(),
                cov.ncols()
            )));
        }
        for (u, &mu) in mean.iter().enumerate() {
            if !(-MOMENT_TOL..=1.0 + MOMENT_TOL).contains(&mu) {
                return Err(Error::InconsistentMoments(format!("mean[{u}] = {mu} outside [0,1]")));
            }
            if cov[(u, u)] > mu * (1.0 - mu) + MOMENT_TOL {
                return Err(Error::InconsistentMoments(format!(
                    "variance[{u}] = {} exceeds mu(1-mu) = {}",
                    cov[(u, u)],
                    mu * (1.0 - mu)
                )));
            }
        }
        for i in 0..m {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > MOMENT_TOL {
                    return Err(Error::InconsistentMoments("covariance not symmetric".into()));
                }
            }
        }
        if m > 0 {
            let min_eig = cov.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-10 {
                return Err(Error::InconsistentMoments(format!(
                    "covariance has eigenvalue {min_eig}"
                )));
            }
        }
        Ok(Self { mean, cov })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Mean and covariance of `Z` under `P(Z) ∝ Π_edges phi(z_u, z_v)`, by
/// enumerating all `2^m` configurations.
pub fn exact_prior_moments(network: &Network, clique: &CliqueFactor) -> Result<MomentPrior> {
    clique.validate()?;
    let dist = oracle::enumerate_mrf(network, clique, None)?;
    Ok(dist.moments())
}

/// Parameters of the graph-structured covariance approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredCovConfig {
    pub mu: f64,
    pub delta: f64,
}

impl StructuredCovConfig {
    pub fn new(mu: f64, delta: f64) -> Result<Self> {
        let c = Self { mu, delta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidParameter(format!("mu must lie in (0,1), got {}", self.mu)));
        }
        if !(self.delta.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (-1,1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Covariance `B Q^{-1} B` where `Q` has unit diagonal and
/// `-delta / max(deg_i, deg_j)` on edges, and the diagonal scaling `B` pins
/// every variance to `mu (1 - mu)`.
pub fn structured_covariance(network: &Network, cfg: &StructuredCovConfig) -> Result<MomentPrior> {
    cfg.validate()?;
    let m = network.node_count();
    let mut q = DMatrix::<f64>::identity(m, m);
    for &(u, v) in network.edges() {
        let w = -cfg.delta / network.degree(u).max(network.degree(v)) as f64;
        q[(u, v)] = w;
        q[(v, u)] = w;
    }
    // Q is strictly diagonally dominant with unit diagonal, hence SPD.
    let q_inv = q
        .cholesky()
        .expect("Q is diagonally dominant for |delta| < 1")
        .inverse();
    let var = cfg.mu * (1.0 - cfg.mu);
    let scale = DVector::from_iterator(m, (0..m).map(|i| (var / q_inv[(i, i)]).sqrt()));
    let mut cov = DMatrix::from_fn(m, m, |i, j| scale[i] * q_inv[(i, j)] * scale[j]);
    for i in 0..m {
        cov[(i, i)] = var;
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(MomentPrior {
        mean: DVector::from_element(m, cfg.mu),
        cov,
    })
}

/// Probabilities of the four endpoint configurations of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependentPairPrior {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl IndependentPairPrior {
    /// Probability of `(z_u, z_v)`.
    pub fn prob(&self, zu: bool, zv: bool) -> f64 {
        match (zu, zv) {
            (false, false) => self.p00,
            (false, true) => self.p01,
            (true, false) => self.p10,
            (true, true) => self.p11,
        }
    }
}

/// Symmetric pair prior with marginal mean `mu` and second moment `p11`.
pub fn independent_prior_family(mu: f64, p11: f64) -> Result<IndependentPairPrior> {
    if !(0.0..=1.0).contains(&mu) || !(0.0..=mu).contains(&p11) {
        return Err(Error::InfeasiblePrior(format!(
            "need 0 <= p11 <= mu <= 1, got mu={mu}, p11={p11}"
        )));
    }
    let p10 = mu - p11;
    let p00 = 1.0 - 2.0 * mu + p11;
    if p00 < -1e-12 {
        return Err(Error::InfeasiblePrior(format!(
            "p00 = {p00} < 0 for mu={mu}, p11={p11}"
        )));
    }
    Ok(IndependentPairPrior {
        p00: p00.max(0.0),
        p01: p10,
        p10,
        p11,
    })
}

/// Exact prior moments are limited by the enumeration cap.
pub fn exact_moments_feasible(network: &Network) -> bool {
    network.node_count() <= MAX_EXACT_NODES
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line3() -> Network {
        Network::new(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn line_network_exact_moments() {
        let p = exact_prior_moments(&line3(), &CliqueFactor::new(0.5, 0.5).unwrap()).unwrap();
        for u in 0..3 {
            assert_abs_diff_eq!(p.mean[u], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(p.cov[(u, u)], 0.25, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(p.cov[(0, 1)], 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(p.cov[(1, 2)], 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(p.cov[(0, 2)], 0.01, epsilon = 1e-12);
    }

    #[test]
    fn flat_factor_gives_iid_halves() {
        let net = Network::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let p = exact_prior_moments(&net, &CliqueFactor::new(0.0, 0.0).unwrap()).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(p.mean[i], 0.5, epsilon = 1e-12);
            for j in 0..4 {
                let want = if i == j { 0.25 } else { 0.0 };
                assert_abs_diff_eq!(p.cov[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_node_prior() {
        let net = Network::new(1, &[]).unwrap();
        let p = exact_prior_moments(&net, &CliqueFactor::new(2.0, 0.3).unwrap()).unwrap();
        assert_abs_diff_eq!(p.mean[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.cov[(0, 0)], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn exact_moments_respect_cap() {
        let net = Network::new(21, &[]).unwrap();
        assert!(matches!(
            exact_prior_moments(&net, &CliqueFactor::new(0.5, 0.5).unwrap()),
            Err(Error::NodeCapExceeded { .. })
        ));
    }

    #[test]
    fn structured_zero_delta_is_diagonal() {
        let net = line3();
        let p = structured_covariance(&net, &StructuredCovConfig::new(0.3, 0.0).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.21 } else { 0.0 };
                assert_abs_diff_eq!(p.cov[(i, j)], want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn structured_diagonal_pinned() {
        let net = Network::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        for delta in [-0.9, -0.2, 0.5, 0.8, 0.99] {
            let p = structured_covariance(&net, &StructuredCovConfig::new(0.25, delta).unwrap())
                .unwrap();
            for i in 0..5 {
                assert_abs_diff_eq!(p.cov[(i, i)], 0.1875, epsilon = 1e-14);
                assert_abs_diff_eq!(p.mean[i], 0.25, epsilon = 0.0);
            }
        }
    }

    #[test]
    fn structured_two_node_matches_direct_algebra() {
        let net = Network::new(2, &[(0, 1)]).unwrap();
        let p = structured_covariance(&net, &StructuredCovConfig::new(0.5, 0.8).unwrap()).unwrap();
        // Direct: Q^{-1} = [[1, d], [d, 1]] / (1 - d^2), B_ii = sqrt(0.25 (1 - d^2)).
        let d: f64 = 0.8;
        let qinv_off = d / (1.0 - d * d);
        let b = (0.25 * (1.0 - d * d)).sqrt();
        assert_abs_diff_eq!(b * qinv_off * b, 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(p.cov[(0, 1)], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn structured_rejects_bad_config() {
        assert!(StructuredCovConfig::new(0.0, 0.5).is_err());
        assert!(StructuredCovConfig::new(0.5, 1.0).is_err());
    }

    #[test]
    fn independent_family_values() {
        let p = independent_prior_family(0.25, 0.13).unwrap();
        assert_abs_diff_eq!(p.p10, 0.12, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p01, 0.12, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p00, 0.63, epsilon = 1e-12);
        let p = independent_prior_family(0.25, 0.0).unwrap();
        assert_abs_diff_eq!(p.p10, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p00, 0.5, epsilon = 1e-12);
        let p = independent_prior_family(0.5, 0.5).unwrap();
        assert_eq!((p.p11, p.p10, p.p01, p.p00), (0.5, 0.0, 0.0, 0.5));
    }

    #[test]
    fn independent_family_infeasible() {
        assert!(independent_prior_family(0.8, 0.1).is_err());
        assert!(independent_prior_family(0.25, 0.3).is_err());
    }

    #[test]
    fn beta_moment_values() {
        assert_abs_diff_eq!(beta_moments(1.0, 9.0).unwrap().0, 0.1, epsilon = 1e-15);
        let (m, v) = beta_moments(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(beta_moments(9.0, 1.0).unwrap().0, 0.9, epsilon = 1e-15);
        assert!(beta_moments(0.0, 1.0).is_err());
        assert!(beta_moments(1.0, -2.0).is_err());
    }

    #[test]
    fn moment_prior_validation() {
        let ok = MomentPrior::new(DVector::from_vec(vec![0.5]), DMatrix::from_element(1, 1, 0.25));
        assert!(ok.is_ok());
        let too_wide =
            MomentPrior::new(DVector::from_vec(vec![0.1]), DMatrix::from_element(1, 1, 0.25));
        assert!(too_wide.is_err());
        let indefinite = MomentPrior::new(
            DVector::from_vec(vec![0.5, 0.5]),
            DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.2, 0.1]),
        );
        assert!(indefinite.is_err());
    }
}
