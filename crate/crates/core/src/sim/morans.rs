//! Moran's I spatial autocorrelation.

use crate::error::{Error, Result};
use crate::network::Network;

/// Moran's I of `values` under unit symmetric weights on the listed pairs.
pub fn morans_i(values: &[f64], pairs: &[(usize, usize)]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Undefined(format!("Moran's I needs at least 2 units, got {n}")));
    }
    if pairs.is_empty() {
        return Err(Error::Undefined("Moran's I needs at least one neighbour pair".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Err(Error::Undefined("Moran's I is undefined for constant values".into()));
    }
    let mut num = 0.0;
    for &(i, j) in pairs {
        if i >= n || j >= n {
            return Err(Error::Dimension(format!("pair ({i}, {j}) outside {n} units")));
        }
        num += 2.0 * dev[i] * dev[j];
    }
    let weight = 2.0 * pairs.len() as f64;
    Ok(n as f64 / weight * num / denom)
}

/// Moran's I of node relevance over the network's adjacency.
pub fn node_morans_i(network: &Network, z: &[bool]) -> Result<f64> {
    let values: Vec<f64> = z.iter().map(|&b| b as u8 as f64).collect();
    morans_i(&values, network.edges())
}

/// Moran's I of edge values over the line graph.
pub fn edge_morans_i(network: &Network, values: &[f64]) -> Result<f64> {
    morans_i(values, &network.line_graph_pairs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert_eq!(morans_i(&[0.0, 1.0], &[(0, 1)]).unwrap(), -1.0);
        // Two disjoint 2-cliques, constant within each.
        assert_eq!(morans_i(&[1.0, 1.0, 0.0, 0.0], &[(0, 1), (2, 3)]).unwrap(), 1.0);
        // Path 0-1-2 with values (1, 0, 0): mean 1/3, deviations (2/3, -1/3, -1/3).
        let got = morans_i(&[1.0, 0.0, 0.0], &[(0, 1), (1, 2)]).unwrap();
        let want = 3.0 / 4.0 * (2.0 * (-2.0 / 9.0) + 2.0 * (1.0 / 9.0)) / (6.0 / 9.0);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn undefined_cases() {
        assert!(morans_i(&[1.0, 1.0], &[(0, 1)]).is_err());
        assert!(morans_i(&[1.0], &[]).is_err());
        assert!(morans_i(&[0.0, 1.0], &[]).is_err());
        assert!(morans_i(&[0.0, 1.0], &[(0, 2)]).is_err());
    }
}
