//! Multi-run evaluation: method dispatch, balanced sampling, cluster-count
//! sweeps and synthetic self-validation data.
//!
//! Run `r` uses the seed `seed + r`. Within a run, balanced sampling draws
//! from `2·run_seed + 1` and the clustering method from `2·run_seed`, so
//! the two random sources never share a stream.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::baselines::{pos_baseline, random_baseline};
use crate::cluster::{agglomerative, kmeans, AggConfig, ClusterAssignment, KMeansConfig, Linkage, Metric};
use crate::embeddings::{l2_norm, DiffDataset, DiffItem};
use crate::error::{Error, Result};
use crate::lexnet::DerivPair;
use crate::metrics::{evaluate, EvalReport};
use crate::par::{self, Execution};

/// Cluster counts swept by default.
pub const DEFAULT_SWEEP: [usize; 5] = [15, 20, 21, 22, 25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "kmeans")]
    KMeans,
    /// Euclidean distance, Ward linkage.
    #[serde(rename = "agg")]
    Agg,
    /// Cosine distance, Ward update.
    #[serde(rename = "agg_cos")]
    AggCos,
    /// Cosine distance, average linkage.
    #[serde(rename = "agg_cos_avg")]
    AggCosAverage,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "pos")]
    Pos,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::Agg => "agg",
            Method::AggCos => "agg_cos",
            Method::AggCosAverage => "agg_cos_avg",
            Method::Random => "random",
            Method::Pos => "pos",
        }
    }

    fn is_deterministic(self) -> bool {
        !matches!(self, Method::KMeans | Method::Random)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kmeans" => Method::KMeans,
            "agg" => Method::Agg,
            "agg_cos" => Method::AggCos,
            "agg_cos_avg" => Method::AggCosAverage,
            "random" => Method::Random,
            "pos" => Method::Pos,
            other => return Err(Error::Config(format!("unknown method {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub k: usize,
    pub runs: usize,
    /// Scale input vectors to unit length before differencing (or, for a
    /// ready-made difference dataset, scale its rows).
    pub normalize: bool,
    pub sample_per_class: Option<usize>,
    pub min_freq: u64,
    pub min_type_count: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::KMeans,
            k: 21,
            runs: 10,
            normalize: true,
            sample_per_class: None,
            min_freq: 5,
            min_type_count: 250,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; unset keys keep their defaults; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::parse(lineno, format!("invalid value {value:?} for {key}"));
            match key {
                "method" => cfg.method = value.parse().map_err(|e: Error| Error::parse(lineno, e.to_string()))?,
                "k" => cfg.k = value.parse().map_err(|_| bad())?,
                "runs" => cfg.runs = value.parse().map_err(|_| bad())?,
                "normalize" => cfg.normalize = value.parse().map_err(|_| bad())?,
                "sample_per_class" => {
                    cfg.sample_per_class = match value {
                        "" | "none" => None,
                        v => Some(v.parse().map_err(|_| bad())?),
                    }
                }
                "min_freq" => cfg.min_freq = value.parse().map_err(|_| bad())?,
                "min_type_count" => cfg.min_type_count = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                other => {
                    return Err(Error::Config(format!("unknown config key {other:?} at line {lineno}")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.k == 0 && self.method != Method::Pos {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.sample_per_class == Some(0) {
            return Err(Error::Config("sample_per_class must be positive".into()));
        }
        Ok(())
    }

    /// Seed of run `run`.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method = {}", self.method)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "runs = {}", self.runs)?;
        writeln!(f, "normalize = {}", self.normalize)?;
        match self.sample_per_class {
            Some(n) => writeln!(f, "sample_per_class = {n}")?,
            None => writeln!(f, "sample_per_class = none")?,
        }
        writeln!(f, "min_freq = {}", self.min_freq)?;
        writeln!(f, "min_type_count = {}", self.min_type_count)?;
        writeln!(f, "seed = {}", self.seed)
    }
}

pub fn sampling_seed(run_seed: u64) -> u64 {
    run_seed.wrapping_mul(2).wrapping_add(1)
}

pub fn clustering_seed(run_seed: u64) -> u64 {
    run_seed.wrapping_mul(2)
}

/// Exactly `per_class` items of every class, drawn without replacement.
/// Kept items stay in dataset order.
pub fn balanced_sample(data: &DiffDataset, per_class: usize, seed: u64) -> Result<DiffDataset> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in data.items().iter().enumerate() {
        by_class.entry(item.class.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(per_class * by_class.len());
    for (class, members) in &by_class {
        if members.len() < per_class {
            return Err(Error::InvalidInput(format!(
                "class {class:?} has {} items, fewer than the {per_class} requested",
                members.len()
            )));
        }
        keep.extend(
            index::sample(&mut rng, members.len(), per_class)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    keep.sort_unstable();
    Ok(data.subset(&keep))
}

/// Runs one clustering method on `data`.
pub fn cluster_once(
    data: &DiffDataset,
    method: Method,
    k: usize,
    seed: u64,
    exec: Execution,
) -> Result<ClusterAssignment> {
    let points = data.into();
    let agg = |metric, linkage| {
        let mut cfg = AggConfig::new(k, metric, linkage);
        cfg.execution = exec;
        agglomerative(points, &cfg)
    };
    match method {
        Method::KMeans => kmeans(points, &KMeansConfig::new(k).with_seed(seed).with_execution(exec)),
        Method::Agg => agg(Metric::Euclidean, Linkage::Ward),
        Method::AggCos => agg(Metric::Cosine, Linkage::Ward),
        Method::AggCosAverage => agg(Metric::Cosine, Linkage::Average),
        Method::Random => random_baseline(data.len(), k, seed),
        Method::Pos => pos_baseline(data.items().iter().map(|i| &i.pair)),
    }
}

/// Per-class scores averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanClassScore {
    /// Mean over the runs where precision was defined.
    pub precision: Option<f64>,
    pub recall: f64,
    pub precision_undefined_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub method: Method,
    pub k: usize,
    pub items: usize,
    pub runs: Vec<EvalReport>,
    pub mean_h: f64,
    pub mean_c: f64,
    pub mean_v: f64,
    pub mean_accuracy: f64,
    pub mean_cls: f64,
    pub per_class: BTreeMap<String, MeanClassScore>,
}

impl AggregateReport {
    pub fn from_runs(method: Method, k: usize, items: usize, runs: Vec<EvalReport>) -> Self {
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&EvalReport) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let mut per_class: BTreeMap<String, (f64, usize, f64)> = BTreeMap::new();
        for r in &runs {
            for (class, s) in &r.per_class {
                let e = per_class.entry(class.clone()).or_default();
                if let Some(p) = s.precision {
                    e.0 += p;
                    e.1 += 1;
                }
                e.2 += s.recall;
            }
        }
        let per_class = per_class
            .into_iter()
            .map(|(class, (p_sum, p_n, r_sum))| {
                let score = MeanClassScore {
                    precision: (p_n > 0).then(|| p_sum / p_n as f64),
                    recall: r_sum / n,
                    precision_undefined_runs: runs.len() - p_n,
                };
                (class, score)
            })
            .collect();
        AggregateReport {
            method,
            k,
            items,
            mean_h: mean(&|r| r.h),
            mean_c: mean(&|r| r.c),
            mean_v: mean(&|r| r.v),
            mean_accuracy: mean(&|r| r.accuracy),
            mean_cls: mean(&|r| r.cls_assigned as f64),
            per_class,
            runs,
        }
    }
}

/// Runs the configured method `cfg.runs` times and averages the scores.
///
/// Normalisation is the caller's job (it applies to the vectors the dataset
/// was built from); `cfg.normalize` is not consulted here.
pub fn run_experiment(data: &DiffDataset, cfg: &ExperimentConfig) -> Result<AggregateReport> {
    run_experiment_with(data, cfg, Execution::default())
}

pub fn run_experiment_with(
    data: &DiffDataset,
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<AggregateReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot run an experiment on an empty dataset".into()));
    }
    let one_run = |r: usize| -> Result<EvalReport> {
        let run_seed = cfg.run_seed(r);
        let sampled;
        let data = match cfg.sample_per_class {
            Some(n) => {
                sampled = balanced_sample(data, n, sampling_seed(run_seed))?;
                &sampled
            }
            None => data,
        };
        let assignment = cluster_once(data, cfg.method, cfg.k, clustering_seed(run_seed), exec)?;
        evaluate(&data.classes(), &assignment)
    };
    let runs = if cfg.method.is_deterministic() && cfg.sample_per_class.is_none() {
        let first = one_run(0)?;
        vec![first; cfg.runs]
    } else {
        par::map_range(exec, cfg.runs, one_run)
            .into_iter()
            .collect::<Result<Vec<_>>>()?
    };
    let items = cfg.sample_per_class.map_or(data.len(), |n| {
        n * data.classes().into_iter().collect::<std::collections::BTreeSet<_>>().len()
    });
    let k = if cfg.method == Method::Pos { 0 } else { cfg.k };
    Ok(AggregateReport::from_runs(cfg.method, k, items, runs))
}

/// One report per cluster count in `ks`.
pub fn sweep_clusters(
    data: &DiffDataset,
    cfg: &ExperimentConfig,
    ks: &[usize],
) -> Result<Vec<AggregateReport>> {
    ks.iter()
        .map(|&k| {
            let cfg = ExperimentConfig { k, ..cfg.clone() };
            run_experiment(data, &cfg)
        })
        .collect()
}

/// POS pairs attached to synthetic classes, cycled by class index.
pub const SYNTHETIC_POS_KEYS: [(char, char); 8] = [
    ('A', 'D'),
    ('A', 'N'),
    ('N', 'A'),
    ('N', 'N'),
    ('N', 'V'),
    ('V', 'A'),
    ('V', 'N'),
    ('V', 'V'),
];

const MAX_DIRECTION_ATTEMPTS: usize = 10_000;
const MAX_DIRECTION_COSINE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
    /// If set, every item is multiplied by a factor drawn log-uniformly from
    /// this range, which makes raw vector magnitudes uninformative.
    pub scale_range: Option<(f64, f64)>,
}

impl SyntheticSpec {
    pub fn new(n_classes: usize, per_class: usize, dim: usize, sigma: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_classes,
            per_class,
            dim,
            sigma,
            seed,
            scale_range: None,
        }
    }
}

/// Name of synthetic class `c`.
pub fn synthetic_class(c: usize) -> String {
    format!("class{c:02}")
}

/// Gaussian blobs around random unit directions with pairwise cosine ≤ 0.5.
///
/// Items are ordered class by class. Class `c` gets the POS pair
/// `SYNTHETIC_POS_KEYS[c % 8]`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<DiffDataset> {
    if spec.n_classes < 2 || spec.dim < 2 || spec.sigma.is_nan() || spec.sigma < 0.0 || spec.per_class == 0 {
        return Err(Error::InvalidInput(
            "synthetic data needs n_classes ≥ 2, dim ≥ 2, per_class ≥ 1 and sigma ≥ 0".into(),
        ));
    }
    if let Some((lo, hi)) = spec.scale_range {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidInput("scale range must satisfy 0 < lo ≤ hi".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..spec.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(spec.n_classes);
    for c in 0..spec.n_classes {
        let mut attempts = 0;
        let dir = loop {
            attempts += 1;
            if attempts > MAX_DIRECTION_ATTEMPTS {
                return Err(Error::InvalidInput(format!(
                    "could not place {} directions with cosine ≤ {MAX_DIRECTION_COSINE} in {} dimensions (stuck at class {c})",
                    spec.n_classes, spec.dim
                )));
            }
            let mut v = gaussian(&mut rng);
            let norm = l2_norm(&v);
            if norm == 0.0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let ok = directions
                .iter()
                .all(|d| d.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() <= MAX_DIRECTION_COSINE);
            if ok {
                break v;
            }
        };
        directions.push(dir);
    }

    let mut data = DiffDataset::new(spec.dim);
    for (c, dir) in directions.iter().enumerate() {
        let class = synthetic_class(c);
        let (pp, cp) = SYNTHETIC_POS_KEYS[c % SYNTHETIC_POS_KEYS.len()];
        for i in 0..spec.per_class {
            let noise = gaussian(&mut rng);
            let scale = match spec.scale_range {
                Some((lo, hi)) => (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp(),
                None => 1.0,
            };
            let d: Vec<f64> = dir
                .iter()
                .zip(&noise)
                .map(|(x, e)| scale * (x + spec.sigma * e))
                .collect();
            let item = DiffItem {
                pair: DerivPair::new(&format!("p{c}_{i}"), &format!("c{c}_{i}"), pp, cp),
                class: class.clone(),
                source: data.len(),
            };
            data.push(item, &d)?;
        }
    }
    Ok(data)
}
