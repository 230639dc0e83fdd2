//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sq_dist, ClusterAssignment, Points};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the relative inertia decrease between two assignment steps
    /// falls to this value or below.
    pub tol: f64,
    pub seed: u64,
    /// Independent k-means++ initialisations; the lowest final inertia wins.
    pub restarts: usize,
    /// Candidates drawn per seeding step; the one that lowers the potential
    /// most is kept. `None` means `2 + ⌊ln k⌋`; `Some(1)` is plain k-means++.
    pub local_trials: Option<usize>,
    pub execution: Execution,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        KMeansConfig {
            k,
            max_iter: 300,
            tol: 1e-6,
            seed: 0,
            restarts: 1,
            local_trials: None,
            execution: Execution::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_local_trials(mut self, trials: usize) -> Self {
        self.local_trials = Some(trials);
        self
    }

    /// Seeding candidates per step after resolving the default.
    pub fn trials(&self) -> usize {
        self.local_trials
            .unwrap_or_else(|| 2 + (self.k as f64).ln().floor() as usize)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidInput("k-means needs at least one point".into()));
        }
        if self.k == 0 || self.k > n {
            return Err(Error::Config(format!(
                "k = {} must be between 1 and the number of points ({n})",
                self.k
            )));
        }
        if self.max_iter == 0 || self.restarts == 0 || self.local_trials == Some(0) {
            return Err(Error::Config(
                "max_iter, restarts and local_trials must be positive".into(),
            ));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Full result of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    /// Row-major `k × dim`; each row is the mean of its members.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step, followed by the final inertia.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

impl KMeansFit {
    pub fn into_assignment(self, k: usize) -> ClusterAssignment {
        ClusterAssignment {
            labels: self.labels,
            k,
            inertia: Some(self.inertia),
        }
    }
}

/// Clusters `points` into `cfg.k` groups.
pub fn kmeans(points: Points<'_>, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    Ok(kmeans_fit(points, cfg)?.into_assignment(cfg.k))
}

/// Best of `cfg.restarts` seeded runs. Restart `r` draws from stream `r` of
/// a ChaCha generator keyed by `cfg.seed`.
pub fn kmeans_fit(points: Points<'_>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate(points.len())?;
    let mut best: Option<KMeansFit> = None;
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let init = kmeans_plus_plus(points, cfg.k, cfg.trials(), &mut rng, cfg.execution);
        let fit = lloyd(points, init, cfg)?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Greedy k-means++ seeding. The first centre is uniform. Each further step
/// draws `trials` candidates with probability proportional to the squared
/// distance to the nearest chosen centre and keeps the one giving the lowest
/// total squared distance (earliest candidate on ties). When all remaining
/// weight is zero the lowest unchosen index is used.
pub fn kmeans_plus_plus<R: Rng>(
    points: Points<'_>,
    k: usize,
    trials: usize,
    rng: &mut R,
    exec: Execution,
) -> Vec<f64> {
    let n = points.len();
    let trials = trials.max(1);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut nearest = par::map_range(exec, n, |i| sq_dist(points.row(i), points.row(chosen[0])));

    while chosen.len() < k {
        let total = par::sum_range(exec, n, |i| nearest[i]);
        if total <= 0.0 {
            let next = (0..n).find(|i| !chosen.contains(i)).unwrap_or(0);
            chosen.push(next);
            continue;
        }
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = weighted_pick(&nearest, rng.random::<f64>() * total);
            let c = points.row(cand);
            let updated = par::map_range(exec, n, |i| nearest[i].min(sq_dist(points.row(i), c)));
            let potential = par::sum_range(exec, n, |i| updated[i]);
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((cand, potential, updated));
            }
        }
        let (next, _, updated) = best.expect("trials >= 1");
        chosen.push(next);
        nearest = updated;
    }

    chosen.iter().flat_map(|&i| points.row(i).iter().copied()).collect()
}

/// First index whose cumulative weight exceeds `target`, skipping zero weights.
fn weighted_pick(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut pick = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
    }
    pick.expect("positive total weight")
}

/// Nearest centroid of `x`; the lowest index wins ties.
#[inline]
fn nearest_centroid(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Per-cluster coordinate sums and member counts.
struct Accum {
    sums: Vec<f64>,
    counts: Vec<usize>,
}

fn accumulate(points: Points<'_>, labels: &[usize], k: usize, exec: Execution) -> Accum {
    let dim = points.dim();
    par::chunked_reduce(
        exec,
        points.len(),
        |range| {
            let mut acc = Accum {
                sums: vec![0.0; k * dim],
                counts: vec![0; k],
            };
            for i in range {
                let l = labels[i];
                acc.counts[l] += 1;
                let s = &mut acc.sums[l * dim..(l + 1) * dim];
                s.iter_mut().zip(points.row(i)).for_each(|(s, x)| *s += x);
            }
            acc
        },
        |mut a, b| {
            a.sums.iter_mut().zip(&b.sums).for_each(|(x, y)| *x += y);
            a.counts.iter_mut().zip(&b.counts).for_each(|(x, y)| *x += y);
            a
        },
    )
    .expect("non-empty data")
}

/// Recomputes centroids as member means. Empty clusters are re-seeded, in
/// ascending cluster order, with the point farthest from its own centroid
/// (lowest index on ties) taken from a cluster with at least two members;
/// that point is relabelled.
fn update_centroids(
    points: Points<'_>,
    labels: &mut [usize],
    dist: &mut [f64],
    centroids: &mut [f64],
    k: usize,
    exec: Execution,
) {
    let dim = points.dim();
    let Accum { mut sums, mut counts } = accumulate(points, labels, k, exec);

    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut donor: Option<usize> = None;
        for i in 0..labels.len() {
            if counts[labels[i]] >= 2 && donor.is_none_or(|d| dist[i] > dist[d]) {
                donor = Some(i);
            }
        }
        let p = donor.expect("k <= n guarantees a cluster with two members");
        let from = labels[p];
        let x = points.row(p);
        sums[from * dim..(from + 1) * dim]
            .iter_mut()
            .zip(x)
            .for_each(|(s, v)| *s -= v);
        counts[from] -= 1;
        sums[empty * dim..(empty + 1) * dim].copy_from_slice(x);
        counts[empty] = 1;
        labels[p] = empty;
        dist[p] = 0.0;
    }

    for j in 0..k {
        let inv = 1.0 / counts[j] as f64;
        centroids[j * dim..(j + 1) * dim]
            .iter_mut()
            .zip(&sums[j * dim..(j + 1) * dim])
            .for_each(|(c, s)| *c = s * inv);
    }
}

/// Lloyd iterations from the given initial centroids (row-major `k × dim`).
pub fn lloyd(points: Points<'_>, init: Vec<f64>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate(points.len())?;
    let (n, dim, k, exec) = (points.len(), points.dim(), cfg.k, cfg.execution);
    if init.len() != k * dim {
        return Err(Error::InvalidInput(format!(
            "expected {k} initial centroids of dimension {dim}"
        )));
    }
    let mut centroids = init;
    let mut labels = vec![0usize; n];
    let mut dist = vec![0.0f64; n];
    let mut prev_labels: Option<Vec<usize>> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;

    loop {
        let assigned = par::map_range(exec, n, |i| nearest_centroid(points.row(i), &centroids, dim));
        for (i, (l, d)) in assigned.into_iter().enumerate() {
            labels[i] = l;
            dist[i] = d;
        }
        let inertia = par::sum_range(exec, n, |i| dist[i]);
        iterations += 1;

        let converged = match (trace.last(), &prev_labels) {
            (Some(&prev), Some(pl)) => {
                *pl == labels || prev - inertia <= cfg.tol * prev.abs()
            }
            _ => false,
        };
        trace.push(inertia);
        if converged || iterations >= cfg.max_iter {
            break;
        }
        prev_labels = Some(labels.clone());
        update_centroids(points, &mut labels, &mut dist, &mut centroids, k, exec);
    }

    // final centroids are the means of the reported labels
    update_centroids(points, &mut labels, &mut dist, &mut centroids, k, exec);
    let inertia = par::sum_range(exec, n, |i| {
        let l = labels[i];
        sq_dist(points.row(i), &centroids[l * dim..(l + 1) * dim])
    });
    trace.push(inertia);

    Ok(KMeansFit {
        labels,
        centroids,
        inertia,
        inertia_trace: trace,
        iterations,
    })
}
