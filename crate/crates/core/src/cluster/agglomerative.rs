//! Hierarchical agglomerative clustering via the nearest-neighbour chain.
//!
//! Both supported linkages satisfy the reducibility property, so the chain
//! algorithm yields the same hierarchy as greedy closest-pair merging. Merge
//! heights are expressed in the base dissimilarity: squared Euclidean
//! distance for Euclidean/Ward, plain Euclidean for Euclidean/average, and
//! `1 − cos` for the cosine metric.

use super::{dot, sq_dist, ClusterAssignment, Points};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Inputs above this many points are rejected (the distance matrix is quadratic).
pub const DEFAULT_MAX_AGG_ITEMS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    /// Lance–Williams Ward update.
    Ward,
    /// Size-weighted mean of pairwise dissimilarities (UPGMA).
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggConfig {
    pub k: usize,
    pub metric: Metric,
    pub linkage: Linkage,
    pub max_items: usize,
    pub execution: Execution,
}

impl AggConfig {
    pub fn new(k: usize, metric: Metric, linkage: Linkage) -> Self {
        AggConfig {
            k,
            metric,
            linkage,
            max_items: DEFAULT_MAX_AGG_ITEMS,
            execution: Execution::default(),
        }
    }

    /// Euclidean distance with Ward linkage.
    pub fn ward(k: usize) -> Self {
        Self::new(k, Metric::Euclidean, Linkage::Ward)
    }

    /// Cosine distance fed through the Ward update.
    pub fn cosine_ward(k: usize) -> Self {
        Self::new(k, Metric::Cosine, Linkage::Ward)
    }
}

/// One merge. Ids below `n` are points; id `n + s` is the cluster formed at step `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Stepwise dendrogram with `n − 1` merges in non-decreasing height order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    steps: Vec<Merge>,
}

impl Dendrogram {
    pub fn observations(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[Merge] {
        &self.steps
    }

    /// Flat clustering after the first `n − k` merges. Labels are numbered in
    /// order of first appearance over the points.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n {
            return Err(Error::Config(format!(
                "k = {k} must be between 1 and the number of points ({})",
                self.n
            )));
        }
        let mut uf = UnionFind::new(self.n);
        let mut rep = (0..self.n).collect::<Vec<_>>(); // cluster id -> member point
        for step in &self.steps[..self.n - k] {
            let (a, b) = (rep[step.a], rep[step.b]);
            uf.union(a, b);
            rep.push(a);
        }
        let mut label_of_root = vec![usize::MAX; self.n];
        let mut next = 0;
        Ok((0..self.n)
            .map(|i| {
                let r = uf.find(i);
                if label_of_root[r] == usize::MAX {
                    label_of_root[r] = next;
                    next += 1;
                }
                label_of_root[r]
            })
            .collect())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Condensed upper-triangular dissimilarity matrix.
struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }

    fn build(points: Points<'_>, metric: Metric, linkage: Linkage, exec: Execution) -> Result<Self> {
        let n = points.len();
        let norms = match metric {
            Metric::Cosine => {
                let norms: Vec<f64> = (0..n).map(|i| dot(points.row(i), points.row(i)).sqrt()).collect();
                if let Some(i) = norms.iter().position(|&x| x == 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "cosine distance undefined for zero vector at item {i}"
                    )));
                }
                norms
            }
            Metric::Euclidean => Vec::new(),
        };
        let mut d = vec![0.0; n * n.saturating_sub(1) / 2];
        let mut rows: Vec<&mut [f64]> = Vec::with_capacity(n);
        let mut rest = d.as_mut_slice();
        for i in 0..n {
            let (row, tail) = rest.split_at_mut(n - i - 1);
            rows.push(row);
            rest = tail;
        }
        par::for_each_mut(exec, &mut rows, |i, row| {
            let x = points.row(i);
            for (off, out) in row.iter_mut().enumerate() {
                let j = i + 1 + off;
                *out = match (metric, linkage) {
                    (Metric::Euclidean, Linkage::Ward) => sq_dist(x, points.row(j)),
                    (Metric::Euclidean, Linkage::Average) => sq_dist(x, points.row(j)).sqrt(),
                    (Metric::Cosine, _) => {
                        (1.0 - dot(x, points.row(j)) / (norms[i] * norms[j])).max(0.0)
                    }
                };
            }
        });
        Ok(Condensed { n, d })
    }
}

/// Builds the full dendrogram.
pub fn linkage(
    points: Points<'_>,
    metric: Metric,
    linkage: Linkage,
    exec: Execution,
) -> Result<Dendrogram> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidInput("agglomerative clustering needs at least one point".into()));
    }
    let mut dist = Condensed::build(points, metric, linkage, exec)?;
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    // (slot a, slot b, height) in chain order; the merged cluster lives in slot min(a, b)
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters"));
        }
        let (a, b) = loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let mut best = prev.map(|p| (p, dist.get(a, p)));
            for (x, &alive) in active.iter().enumerate() {
                if x == a || !alive {
                    continue;
                }
                let d = dist.get(a, x);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((x, d));
                }
            }
            let (b, _) = best.expect("another active cluster");
            if Some(b) == prev {
                chain.truncate(chain.len() - 2);
                break (a, b);
            }
            chain.push(b);
        };

        let height = dist.get(a, b);
        let (keep, gone) = (a.min(b), a.max(b));
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for x in 0..n {
            if !active[x] || x == a || x == b {
                continue;
            }
            let (dax, dbx) = (dist.get(a, x), dist.get(b, x));
            let updated = match linkage {
                Linkage::Ward => {
                    let nx = size[x] as f64;
                    ((na + nx) * dax + (nb + nx) * dbx - nx * height) / (na + nb + nx)
                }
                Linkage::Average => (na * dax + nb * dbx) / (na + nb),
            };
            dist.set(keep, x, updated);
        }
        active[gone] = false;
        size[keep] += size[gone];
        raw.push((a, b, height));
    }

    raw.sort_by(|x, y| x.2.total_cmp(&y.2));

    let mut uf = UnionFind::new(n);
    let mut cluster_of_root: Vec<usize> = (0..n).collect();
    let mut members = vec![1usize; n];
    let mut steps = Vec::with_capacity(raw.len());
    for (s, &(a, b, height)) in raw.iter().enumerate() {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let (ca, cb) = (cluster_of_root[ra], cluster_of_root[rb]);
        let merged = members[ra] + members[rb];
        uf.union(ra, rb);
        let r = uf.find(ra);
        cluster_of_root[r] = n + s;
        members[r] = merged;
        steps.push(Merge {
            a: ca.min(cb),
            b: ca.max(cb),
            height,
            size: merged,
        });
    }
    Ok(Dendrogram { n, steps })
}

/// Cuts the hierarchy of `points` into `cfg.k` clusters.
pub fn agglomerative(points: Points<'_>, cfg: &AggConfig) -> Result<ClusterAssignment> {
    let n = points.len();
    if n > cfg.max_items {
        return Err(Error::InvalidInput(format!(
            "agglomerative clustering is limited to {} items, got {n}; subsample or raise the cap",
            cfg.max_items
        )));
    }
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::Config(format!(
            "k = {} must be between 1 and the number of points ({n})",
            cfg.k
        )));
    }
    let tree = linkage(points, cfg.metric, cfg.linkage, cfg.execution)?;
    ClusterAssignment::new(tree.cut(cfg.k)?, cfg.k)
}
