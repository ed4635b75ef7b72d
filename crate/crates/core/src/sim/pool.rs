//! Finite, pre-shuffled item pools per edge.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{Error, Result};
use crate::network::EdgeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemPools {
    /// Items still to be served, last element first.
    items: Vec<Vec<bool>>,
}

impl ItemPools {
    pub fn from_items(items: Vec<Vec<bool>>) -> Self {
        let items = items
            .into_iter()
            .map(|mut v| {
                v.reverse();
                v
            })
            .collect();
        Self { items }
    }

    pub fn edge_count(&self) -> usize {
        self.items.len()
    }

    pub fn remaining(&self, e: EdgeId) -> usize {
        self.items[e.0].len()
    }

    pub fn relevant_remaining(&self, e: EdgeId) -> usize {
        self.items[e.0].iter().filter(|&&r| r).count()
    }

    pub fn total_relevant(&self) -> usize {
        self.items.iter().flatten().filter(|&&r| r).count()
    }

    pub fn available(&self) -> Vec<bool> {
        self.items.iter().map(|v| !v.is_empty()).collect()
    }

    /// Serves the next item of the edge.
    pub fn pop(&mut self, e: EdgeId) -> Option<bool> {
        self.items.get_mut(e.0)?.pop()
    }
}

/// Pool sizes are Poisson(`items_mean`); each pool holds a
/// Binomial(size, p) number of relevant items in uniformly random order.
pub fn build_item_pool<R: Rng + ?Sized>(p_true: &[f64], items_mean: f64, rng: &mut R) -> Result<ItemPools> {
    if !(items_mean > 0.0 && items_mean.is_finite()) {
        return Err(Error::InvalidParameter(format!("items_mean must be positive, got {items_mean}")));
    }
    let poisson = Poisson::new(items_mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut items = Vec::with_capacity(p_true.len());
    for &p in p_true {
        let size = poisson.sample(rng) as u64;
        let relevant = Binomial::new(size, p.clamp(0.0, 1.0))
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng);
        let mut pool: Vec<bool> = (0..size).map(|i| i < relevant).collect();
        pool.shuffle(rng);
        items.push(pool);
    }
    Ok(ItemPools::from_items(items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pools = build_item_pool(&[0.0, 1.0], 30.0, &mut rng).unwrap();
        assert_eq!(pools.relevant_remaining(EdgeId(0)), 0);
        assert_eq!(pools.relevant_remaining(EdgeId(1)), pools.remaining(EdgeId(1)));
        assert!(build_item_pool(&[0.5], 0.0, &mut rng).is_err());
    }

    #[test]
    fn pool_size_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let edges = 10_000;
        let pools = build_item_pool(&vec![0.3; edges], 30.0, &mut rng).unwrap();
        let mean = (0..edges).map(|e| pools.remaining(EdgeId(e))).sum::<usize>() as f64 / edges as f64;
        let se = (30.0 / edges as f64).sqrt();
        assert!((mean - 30.0).abs() < 3.0 * se);
    }

    #[test]
    fn serves_in_order() {
        let mut pools = ItemPools::from_items(vec![vec![true, false, false]]);
        assert_eq!(pools.pop(EdgeId(0)), Some(true));
        assert_eq!(pools.pop(EdgeId(0)), Some(false));
        assert_eq!(pools.pop(EdgeId(0)), Some(false));
        assert_eq!(pools.pop(EdgeId(0)), None);
        assert_eq!(pools.available(), vec![false]);
    }
}
