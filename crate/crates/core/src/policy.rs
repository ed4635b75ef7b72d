//! Edge selection policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::moments::PMoments;
use crate::network::EdgeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Greedy,
    EpsilonGreedy { epsilon: f64 },
    BayesUcb,
}

/// Policy choice plus the seed of its private random stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    #[serde(flatten)]
    pub kind: PolicyKind,
    #[serde(default)]
    pub seed: u64,
}

impl PolicyConfig {
    pub fn greedy() -> Self {
        Self { kind: PolicyKind::Greedy, seed: 0 }
    }

    pub fn epsilon_greedy(epsilon: f64, seed: u64) -> Self {
        Self { kind: PolicyKind::EpsilonGreedy { epsilon }, seed }
    }

    pub fn bayes_ucb() -> Self {
        Self { kind: PolicyKind::BayesUcb, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if let PolicyKind::EpsilonGreedy { epsilon } = self.kind {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::InvalidParameter(format!("epsilon must be in [0,1], got {epsilon}")));
            }
        }
        Ok(())
    }

    /// Short name used in result files.
    pub fn name(&self) -> String {
        match self.kind {
            PolicyKind::Greedy => "greedy".into(),
            PolicyKind::EpsilonGreedy { epsilon } => format!("epsilon_greedy({epsilon})"),
            PolicyKind::BayesUcb => "bayes_ucb".into(),
        }
    }
}

/// Index of the largest available score; ties go to the lowest index.
fn argmax(scores: &[f64], available: &[bool]) -> Result<EdgeId> {
    let mut best: Option<usize> = None;
    for (i, (&s, &a)) in scores.iter().zip(available).enumerate() {
        if a && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best.map(EdgeId).ok_or(Error::NoAvailableEdges)
}

fn check_lengths(p: &PMoments, available: &[bool]) -> Result<()> {
    if p.len() != available.len() {
        return Err(Error::Dimension(format!(
            "{} edge moments but {} availability flags",
            p.len(),
            available.len()
        )));
    }
    Ok(())
}

pub fn greedy_select(p: &PMoments, available: &[bool]) -> Result<EdgeId> {
    check_lengths(p, available)?;
    argmax(&p.mean, available)
}

pub fn epsilon_greedy_select<R: Rng + ?Sized>(
    p: &PMoments,
    available: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<EdgeId> {
    let greedy = greedy_select(p, available)?;
    // Always consume one draw so the stream position does not depend on ε.
    let u: f64 = rng.random();
    if u >= epsilon {
        return Ok(greedy);
    }
    let open: Vec<usize> = (0..available.len()).filter(|&i| available[i]).collect();
    Ok(EdgeId(open[rng.random_range(0..open.len())]))
}

/// Upper quantile of the Gaussian approximation to each edge's posterior.
pub fn bayes_ucb_scores(p: &PMoments, t: u64) -> Vec<f64> {
    let z = if t <= 1 {
        0.0
    } else {
        inverse_normal_cdf(1.0 - 1.0 / t as f64).expect("1 - 1/t lies in (0,1)")
    };
    p.mean
        .iter()
        .zip(&p.var)
        .map(|(&m, &v)| m + v.max(0.0).sqrt() * z)
        .collect()
}

pub fn bayes_ucb_select(p: &PMoments, available: &[bool], t: u64) -> Result<EdgeId> {
    check_lengths(p, available)?;
    argmax(&bayes_ucb_scores(p, t), available)
}

/// Standard normal quantile function.
///
/// Rational approximation of Acklam followed by one Halley step against an
/// accurate complementary error function.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {p} outside (0,1)")));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.024_25;

    // Work in the lower half and reflect, so the result is exactly odd.
    let (q, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let mut x = if q < LOW {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        let s = q - 0.5;
        let r = s * s;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * s
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = 0.5 * erfc(-x / std::f64::consts::SQRT_2) - q;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x -= u / (1.0 + x * u / 2.0);
    Ok(sign * x)
}

/// Per-edge view of a selection decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub mean: f64,
    pub var: f64,
    pub score: f64,
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeScoreBoard {
    pub edges: Vec<EdgeScore>,
}

impl EdgeScoreBoard {
    pub fn scores(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.score).collect()
    }
}

/// A policy with its own random stream.
#[derive(Debug, Clone)]
pub struct Policy {
    config: PolicyConfig,
    rng: ChaCha8Rng,
}

impl Policy {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, rng: ChaCha8Rng::seed_from_u64(config.seed) })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// Chooses an edge. `t` is the number of items screened so far plus one.
    pub fn select(&mut self, p: &PMoments, available: &[bool], t: u64) -> Result<(EdgeId, EdgeScoreBoard)> {
        check_lengths(p, available)?;
        let scores = match self.config.kind {
            PolicyKind::BayesUcb => bayes_ucb_scores(p, t),
            _ => p.mean.clone(),
        };
        let edge = match self.config.kind {
            PolicyKind::Greedy => greedy_select(p, available)?,
            PolicyKind::EpsilonGreedy { epsilon } => epsilon_greedy_select(p, available, epsilon, &mut self.rng)?,
            PolicyKind::BayesUcb => argmax(&scores, available)?,
        };
        let edges = (0..p.len())
            .map(|i| EdgeScore {
                mean: p.mean[i],
                var: p.var[i],
                score: scores[i],
                available: available[i],
            })
            .collect();
        Ok((edge, EdgeScoreBoard { edges }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn moments(mean: &[f64], var: &[f64]) -> PMoments {
        PMoments {
            mean: mean.to_vec(),
            var: var.to_vec(),
            clipped: vec![false; mean.len()],
        }
    }

    #[test]
    fn greedy_argmax_and_ties() {
        let all = [true; 3];
        assert_eq!(greedy_select(&moments(&[0.2, 0.7, 0.4], &[0.0; 3]), &all).unwrap(), EdgeId(1));
        assert_eq!(greedy_select(&moments(&[0.5, 0.5], &[0.0; 2]), &all[..2]).unwrap(), EdgeId(0));
        assert_eq!(greedy_select(&moments(&[0.6, 1.4, 0.8], &[0.0; 3]), &all).unwrap(), EdgeId(1));
    }

    #[test]
    fn greedy_skips_unavailable() {
        let p = moments(&[0.2, 0.7, 0.4], &[0.0; 3]);
        assert_eq!(greedy_select(&p, &[true, false, true]).unwrap(), EdgeId(2));
        assert_eq!(greedy_select(&p, &[false; 3]), Err(Error::NoAvailableEdges));
        assert!(matches!(greedy_select(&p, &[true; 2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let p = moments(&[0.2, 0.7, 0.4], &[0.0; 3]);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                assert_eq!(epsilon_greedy_select(&p, &[true; 3], 0.0, &mut rng).unwrap(), EdgeId(1));
            }
        }
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let p = moments(&[0.2, 0.7, 0.4, 0.1], &[0.0; 4]);
        let avail = [true, true, false, true];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut hits = [0u32; 4];
        for _ in 0..draws {
            hits[epsilon_greedy_select(&p, &avail, 1.0, &mut rng).unwrap().0] += 1;
        }
        assert_eq!(hits[2], 0);
        let q = 1.0 / 3.0;
        let se = (q * (1.0 - q) / draws as f64).sqrt();
        for i in [0, 1, 3] {
            assert!((hits[i] as f64 / draws as f64 - q).abs() < 3.0 * se, "{hits:?}");
        }
    }

    #[test]
    fn epsilon_mixture_frequency() {
        let p = moments(&[0.2, 0.7, 0.4, 0.1, 0.3], &[0.0; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let greedy = (0..draws)
            .filter(|_| epsilon_greedy_select(&p, &[true; 5], 0.1, &mut rng).unwrap() == EdgeId(1))
            .count();
        let q = 0.9 + 0.1 / 5.0;
        let se = (q * (1.0 - q) / draws as f64).sqrt();
        assert!((greedy as f64 / draws as f64 - q).abs() < 3.0 * se);
    }

    #[test]
    fn ucb_first_step_is_greedy() {
        let p = moments(&[0.3, 0.5, 0.4], &[0.2, 0.0, 0.1]);
        assert_eq!(bayes_ucb_scores(&p, 1), p.mean);
        assert_eq!(bayes_ucb_select(&p, &[true; 3], 1).unwrap(), EdgeId(1));
    }

    #[test]
    fn ucb_prefers_spread_at_equal_means() {
        let p = moments(&[0.4, 0.4, 0.4], &[0.01, 0.04, 0.02]);
        assert_eq!(bayes_ucb_select(&p, &[true; 3], 10).unwrap(), EdgeId(1));
    }

    #[test]
    fn ucb_quantile_value() {
        let p = moments(&[0.5], &[0.01]);
        let q = bayes_ucb_scores(&p, 100)[0];
        assert_abs_diff_eq!(q, 0.5 + 0.1 * 2.326_347_9, epsilon = 1e-7);
    }

    #[test]
    fn ucb_negative_variance_floored() {
        let p = moments(&[0.5, 0.45], &[-1e-4, 0.0]);
        let s = bayes_ucb_scores(&p, 50);
        assert_eq!(s, vec![0.5, 0.45]);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn normal_quantiles() {
        // Reference values from 50-digit arithmetic.
        let cases = [
            (0.99, 2.326_347_874_040_841_1),
            (0.975, 1.959_963_984_540_054_2),
            (0.9, 1.281_551_565_544_600_5),
            (1e-12, -7.034_483_825_301_131_9),
            (1e-6, -4.753_424_308_822_898_9),
            (0.024_25, -1.972_961_051_311_884_9),
            (0.3, -0.524_400_512_708_040_78),
            (0.999_999, 4.753_424_308_822_898_9),
        ];
        for (p, want) in cases {
            let got = inverse_normal_cdf(p).unwrap();
            assert!((got - want).abs() < 1e-9, "p={p}: {got} vs {want}");
        }
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(inverse_normal_cdf(p).is_err());
        }
    }

    #[test]
    fn config_json() {
        let c: PolicyConfig = serde_json::from_str(r#"{"kind":"epsilon_greedy","epsilon":0.1,"seed":42}"#).unwrap();
        assert_eq!(c, PolicyConfig::epsilon_greedy(0.1, 42));
        let c: PolicyConfig = serde_json::from_str(r#"{"kind":"bayes_ucb"}"#).unwrap();
        assert_eq!(c, PolicyConfig::bayes_ucb());
        assert!(serde_json::from_str::<PolicyConfig>(r#"{"kind":"thompson"}"#).is_err());
        assert!(Policy::new(PolicyConfig::epsilon_greedy(1.5, 0)).is_err());
    }

    #[test]
    fn seeded_policy_replays() {
        let p = moments(&[0.2, 0.7, 0.4], &[0.0; 3]);
        let run = || {
            let mut pol = Policy::new(PolicyConfig::epsilon_greedy(0.5, 99)).unwrap();
            (0..200).map(|t| pol.select(&p, &[true; 3], t + 1).unwrap().0).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
