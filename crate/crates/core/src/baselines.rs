//! Reference clusterings: uniform random labels and grouping by POS pair.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::lexnet::{DerivPair, Pos};

/// (parent POS, child POS) of a derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PosPairKey {
    pub parent_pos: Pos,
    pub child_pos: Pos,
}

impl From<&DerivPair> for PosPairKey {
    fn from(p: &DerivPair) -> Self {
        PosPairKey {
            parent_pos: p.parent_pos,
            child_pos: p.child_pos,
        }
    }
}

/// `n` labels drawn independently and uniformly from `0..k`.
pub fn random_baseline(n: usize, k: usize, seed: u64) -> Result<ClusterAssignment> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidInput("random baseline needs n ≥ 1 and k ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    ClusterAssignment::new(labels, k)
}

/// One cluster per distinct POS pair, numbered by first appearance.
pub fn pos_baseline<'a, I>(pairs: I) -> Result<ClusterAssignment>
where
    I: IntoIterator<Item = &'a DerivPair>,
{
    let mut ids: HashMap<PosPairKey, usize> = HashMap::new();
    let labels: Vec<usize> = pairs
        .into_iter()
        .map(|p| {
            let next = ids.len();
            *ids.entry(PosPairKey::from(p)).or_insert(next)
        })
        .collect();
    if labels.is_empty() {
        return Err(Error::InvalidInput("POS baseline needs at least one pair".into()));
    }
    ClusterAssignment::new(labels, ids.len())
}
