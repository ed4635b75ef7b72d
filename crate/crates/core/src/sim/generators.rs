//! Synthetic network generators.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::network::Network;

/// Path `0 - 1 - ... - (k-1)`.
pub fn line_network(k: usize) -> Result<Network> {
    let edges: Vec<_> = (1..k).map(|i| (i - 1, i)).collect();
    Network::new(k, &edges)
}

/// Relaxed caveman graph: `cliques` disjoint cliques of `size` nodes, after
/// which each edge `(u, v)` is, with probability `rewire_p`, replaced by
/// `(u, x)` for a uniformly drawn node `x`. Draws that would create a
/// duplicate edge or a self-loop leave the edge in place.
pub fn clustered_network<R: Rng + ?Sized>(
    cliques: usize,
    size: usize,
    rewire_p: f64,
    rng: &mut R,
) -> Result<Network> {
    if cliques == 0 || size == 0 {
        return Err(Error::InvalidParameter(format!(
            "clustered network needs positive sizes, got {cliques} cliques of {size}"
        )));
    }
    if !(0.0..=1.0).contains(&rewire_p) {
        return Err(Error::InvalidParameter(format!("rewire probability {rewire_p} outside [0,1]")));
    }
    let m = cliques * size;
    let mut edges = Vec::new();
    for c in 0..cliques {
        let base = c * size;
        for i in 0..size {
            for j in i + 1..size {
                edges.push((base + i, base + j));
            }
        }
    }
    let mut present: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    for &(u, v) in &edges {
        if rng.random::<f64>() < rewire_p {
            let x = rng.random_range(0..m);
            if x == u || present.contains(&key(u, x)) {
                continue;
            }
            present.remove(&key(u, v));
            present.insert(key(u, x));
        }
    }
    let list: Vec<_> = present.into_iter().collect();
    Network::new(m, &list)
}

/// A relevant core (nodes `0..core_nodes`, joined by `core_edges`) plus
/// `decoys` further nodes. Each decoy links to each earlier node with
/// probability `attach_p`; a decoy left without links is joined to one
/// uniformly chosen earlier node so the network stays connected whenever the
/// core is.
pub fn planted_network<R: Rng + ?Sized>(
    core_nodes: usize,
    core_edges: &[(usize, usize)],
    decoys: usize,
    attach_p: f64,
    rng: &mut R,
) -> Result<Network> {
    if core_nodes == 0 {
        return Err(Error::InvalidParameter("planted network needs a nonempty core".into()));
    }
    if !(0.0..=1.0).contains(&attach_p) {
        return Err(Error::InvalidParameter(format!("attach probability {attach_p} outside [0,1]")));
    }
    let mut edges = core_edges.to_vec();
    for d in core_nodes..core_nodes + decoys {
        let mut linked = false;
        for other in 0..d {
            if rng.random::<f64>() < attach_p {
                edges.push((other, d));
                linked = true;
            }
        }
        if !linked {
            let all: Vec<usize> = (0..d).collect();
            edges.push((*all.choose(rng).expect("core is nonempty"), d));
        }
    }
    Network::new(core_nodes + decoys, &edges)
}
