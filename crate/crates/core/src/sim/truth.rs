//! Ground truth: node relevance and per-edge relevance probabilities.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::network::Network;
use crate::priors::ConditionalBetaTable;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub z_true: Vec<bool>,
    pub p_true: Vec<f64>,
}

/// Spreads relevance from a random seed node: each unassigned neighbour of
/// the current infector copies its value with probability `rho` and takes
/// the opposite value otherwise. The next infector is drawn uniformly from
/// assigned nodes that still have unassigned neighbours. When a component is
/// exhausted, a fresh seed is drawn among the unassigned nodes with its own
/// fair coin.
pub fn infect_relevancies<R: Rng + ?Sized>(network: &Network, rho: f64, rng: &mut R) -> Vec<bool> {
    let m = network.node_count();
    let mut z: Vec<Option<bool>> = vec![None; m];
    let mut remaining = m;
    while remaining > 0 {
        let open: Vec<usize> = (0..m).filter(|&u| z[u].is_none()).collect();
        let seed = *open.choose(rng).expect("some node is unassigned");
        z[seed] = Some(rng.random::<f64>() < 0.5);
        remaining -= 1;
        let mut infector = seed;
        loop {
            let zi = z[infector].expect("infector is assigned");
            for &j in network.neighbours(infector) {
                if z[j].is_none() {
                    let copy = rng.random::<f64>() < rho;
                    z[j] = Some(if copy { zi } else { !zi });
                    remaining -= 1;
                }
            }
            let frontier: Vec<usize> = (0..m)
                .filter(|&u| z[u].is_some() && network.neighbours(u).iter().any(|&v| z[v].is_none()))
                .collect();
            match frontier.choose(rng) {
                Some(&next) => infector = next,
                None => break,
            }
        }
    }
    z.into_iter().map(|v| v.expect("all assigned")).collect()
}

/// Relevance probability 0, 0.2 or 0.9 by the number of relevant endpoints.
pub fn fixed_edge_probs(network: &Network, z_true: &[bool]) -> Vec<f64> {
    network
        .edges()
        .iter()
        .map(|&(u, v)| match z_true[u] as u8 + z_true[v] as u8 {
            0 => 0.0,
            1 => 0.2,
            _ => 0.9,
        })
        .collect()
}

/// Independent draws from the conditional Beta of each edge.
pub fn sample_edge_probs<R: Rng + ?Sized>(
    network: &Network,
    z_true: &[bool],
    betas: &ConditionalBetaTable,
    rng: &mut R,
) -> Vec<f64> {
    network
        .edges()
        .iter()
        .map(|&(u, v)| {
            let (a, b) = betas.params(z_true[u], z_true[v]);
            Beta::new(a, b).expect("table parameters are positive").sample(rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generators::{clustered_network, line_network};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rho_one_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = clustered_network(3, 5, 0.3, &mut rng).unwrap();
        let net = if net.components().len() == 1 { net } else { line_network(15).unwrap() };
        for _ in 0..20 {
            let z = infect_relevancies(&net, 1.0, &mut rng);
            assert!(z.iter().all(|&v| v == z[0]));
        }
    }

    #[test]
    fn components_get_own_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::new(4, &[(0, 1), (2, 3)]).unwrap();
        let mut mixed = 0;
        for _ in 0..200 {
            let z = infect_relevancies(&net, 1.0, &mut rng);
            assert_eq!(z[0], z[1]);
            assert_eq!(z[2], z[3]);
            mixed += (z[0] != z[2]) as u32;
        }
        assert!((60..140).contains(&mixed), "{mixed}");
    }

    #[test]
    fn rho_agreement_rates() {
        let net = line_network(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 10_000;
        for (rho, want) in [(0.9, 0.9), (0.5, 0.5)] {
            let agree = (0..draws)
                .filter(|_| {
                    let z = infect_relevancies(&net, rho, &mut rng);
                    z[0] == z[1]
                })
                .count() as f64
                / draws as f64;
            let se = (want * (1.0 - want) / draws as f64).sqrt();
            assert!((agree - want).abs() < 3.0 * se, "rho={rho}: {agree}");
        }
    }

    #[test]
    fn fixed_probs() {
        let net = line_network(3).unwrap();
        assert_eq!(fixed_edge_probs(&net, &[false, false, true]), vec![0.0, 0.2]);
        assert_eq!(fixed_edge_probs(&net, &[true, true, false]), vec![0.9, 0.2]);
    }

    #[test]
    fn sampled_probs_mean() {
        let net = line_network(2).unwrap();
        let betas = ConditionalBetaTable::prior_conditional_2();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws = 100_000;
        let sum: f64 = (0..draws).map(|_| sample_edge_probs(&net, &[true, true], &betas, &mut rng)[0]).sum();
        let se = (9.0 / (100.0 * 11.0) / draws as f64).sqrt();
        assert!((sum / draws as f64 - 0.9).abs() < 3.0 * se);
    }
}
