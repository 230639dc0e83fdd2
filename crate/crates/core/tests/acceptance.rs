//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits non-zero if any failed.

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use derivclust::baselines::pos_baseline;
use derivclust::cluster::{agglomerative, kmeans_fit, linkage, AggConfig, ClusterAssignment, KMeansConfig, Linkage, Metric, Points, DEFAULT_MAX_AGG_ITEMS};
use derivclust::embeddings::{load_embeddings_text, DiffDataset, EmbeddingTable, FrequencyTable};
use derivclust::experiment::{gen_synthetic, run_experiment, ExperimentConfig, Method, SyntheticSpec};
use derivclust::lexnet::{parse_network, DerivPair};
use derivclust::metrics::evaluate;
use derivclust::pipeline;
use derivclust::signature::{longest_common_substring, AffixSignature, ClassMap};
use derivclust::{Error, Execution};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s as f64, || {
        format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn main() {
    let criteria: [Check; 9] = [
        ("metric oracle equivalence", metric_oracle),
        ("agglomerative oracle equivalence", agglomerative_oracle),
        ("k-means optimality at micro scale", kmeans_optimality),
        ("signature correctness", signature_correctness),
        ("synthetic recovery", synthetic_recovery),
        ("POS baseline completeness", pos_completeness),
        ("normalization contract", normalization_contract),
        ("determinism", determinism),
        ("scale smoke test", scale_smoke),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}; {secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({why}; {secs:.1} s)", i + 1);
            }
        }
    }
    let _ = panic::take_hook();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- criterion 1

/// Homogeneity, completeness and V straight from the entropy definitions.
fn entropy_oracle(classes: &[usize], clusters: &[usize]) -> (f64, f64, f64) {
    let n = classes.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut c_tot: HashMap<usize, f64> = HashMap::new();
    let mut k_tot: HashMap<usize, f64> = HashMap::new();
    for (&c, &k) in classes.iter().zip(clusters) {
        *joint.entry((c, k)).or_default() += 1.0;
        *c_tot.entry(c).or_default() += 1.0;
        *k_tot.entry(k).or_default() += 1.0;
    }
    let h_of = |tot: &HashMap<usize, f64>| -tot.values().map(|&m| m / n * (m / n).ln()).sum::<f64>();
    let h_c = h_of(&c_tot);
    let h_k = h_of(&k_tot);
    let h_c_given_k = -joint.iter().map(|(&(_, k), &m)| m / n * (m / k_tot[&k]).ln()).sum::<f64>();
    let h_k_given_c = -joint.iter().map(|(&(c, _), &m)| m / n * (m / c_tot[&c]).ln()).sum::<f64>();
    let h = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let c = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    (h, c, v)
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let n_classes = rng.random_range(1..=12);
        let k = rng.random_range(1..=12);
        let n = rng.random_range(1..=500);
        let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let names: Vec<String> = classes.iter().map(|c| format!("c{c}")).collect();
        let r = evaluate(&names, &ClusterAssignment::new(labels.clone(), k).unwrap()).unwrap();
        let (h, c, v) = entropy_oracle(&classes, &labels);
        for (got, want) in [(r.h, h), (r.c, c), (r.v, v)] {
            let err = (got - want).abs();
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("table {t}: got {got}, oracle {want}"))?;
        }

        let mut per_cluster: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
        let mut per_class: HashMap<usize, usize> = HashMap::new();
        for (&c, &l) in classes.iter().zip(&labels) {
            *per_cluster.entry(l).or_default().entry(c).or_default() += 1;
            *per_class.entry(c).or_default() += 1;
        }
        let majority: usize = per_cluster.values().map(|m| *m.values().max().unwrap()).sum();
        let global = *per_class.values().max().unwrap();
        ensure((r.accuracy - majority as f64 / n as f64).abs() <= 1e-12, || {
            format!("table {t}: accuracy {} vs brute force {}", r.accuracy, majority as f64 / n as f64)
        })?;
        ensure(r.accuracy + 1e-12 >= global as f64 / n as f64, || {
            format!("table {t}: accuracy below the global majority rate")
        })?;
    }
    within(start.elapsed(), 5)?;
    Ok(format!("1000 tables, max |error| {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 2

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Variant {
    WardEuclidean,
    WardCosine,
}

/// Greedy closest-pair merging with linkage values computed from cluster
/// members directly. Returns merges as (id_a, id_b, height, size) with
/// point ids `0..n` and id `n + s` for the cluster made at step `s`.
fn naive_agglomeration(x: &[Vec<f64>], variant: Variant) -> Vec<(usize, usize, f64, usize)> {
    let n = x.len();
    let base = |i: usize, j: usize| -> f64 {
        match variant {
            Variant::WardEuclidean => x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum(),
            Variant::WardCosine => {
                let dot: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
                let ni: f64 = x[i].iter().map(|a| a * a).sum::<f64>().sqrt();
                let nj: f64 = x[j].iter().map(|a| a * a).sum::<f64>().sqrt();
                1.0 - dot / (ni * nj)
            }
        }
    };
    let linkage = |a: &[usize], b: &[usize]| -> f64 {
        let (na, nb) = (a.len() as f64, b.len() as f64);
        match variant {
            // 2 · nA·nB/(nA+nB) · ‖μA − μB‖², on the squared-distance scale
            Variant::WardEuclidean => {
                let dim = x[0].len();
                let mean = |s: &[usize]| -> Vec<f64> {
                    (0..dim).map(|d| s.iter().map(|&i| x[i][d]).sum::<f64>() / s.len() as f64).collect()
                };
                let (ma, mb) = (mean(a), mean(b));
                let sq: f64 = ma.iter().zip(&mb).map(|(p, q)| (p - q) * (p - q)).sum();
                2.0 * na * nb / (na + nb) * sq
            }
            // Ward's criterion written for an arbitrary dissimilarity
            Variant::WardCosine => {
                let cross: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j))).map(|(i, j)| base(i, j)).sum();
                let within = |s: &[usize]| -> f64 {
                    s.iter()
                        .flat_map(|&i| s.iter().map(move |&j| (i, j)))
                        .filter(|(i, j)| i != j)
                        .map(|(i, j)| base(i, j))
                        .sum()
                };
                2.0 * na * nb / (na + nb) * (cross / (na * nb) - within(a) / (2.0 * na * na) - within(b) / (2.0 * nb * nb))
            }
        }
    };
    // (cluster id, members); kept ordered by smallest member
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for s in 0..n - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                let d = linkage(&active[i].1, &active[j].1);
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let (i, j, d) = best.unwrap();
        let (id_i, mut mi) = active[i].clone();
        let (id_j, mj) = active.remove(j);
        mi.extend(mj);
        mi.sort_unstable();
        merges.push((id_i.min(id_j), id_i.max(id_j), d, mi.len()));
        active[i] = (n + s, mi);
    }
    merges
}

/// Flat labels after the first `n − k` merges, numbered by first appearance.
fn naive_cut(n: usize, merges: &[(usize, usize, f64, usize)], k: usize) -> Vec<usize> {
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut alive = vec![true; n];
    for &(a, b, _, _) in &merges[..n - k] {
        let mut m = members[a].clone();
        m.extend(members[b].iter().copied());
        alive[a] = false;
        alive[b] = false;
        members.push(m);
        alive.push(true);
    }
    let mut cluster_of = vec![0; n];
    for (c, m) in members.iter().enumerate() {
        if alive[c] {
            for &p in m {
                cluster_of[p] = c;
            }
        }
    }
    let mut renumber: HashMap<usize, usize> = HashMap::new();
    cluster_of
        .iter()
        .map(|c| {
            let next = renumber.len();
            *renumber.entry(*c).or_insert(next)
        })
        .collect()
}

fn agglomerative_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let n = rng.random_range(2..=64);
        let dim = rng.random_range(2..=8);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let flat: Vec<f64> = x.concat();
        let points = Points::new(&flat, dim).unwrap();
        for (variant, metric) in [(Variant::WardEuclidean, Metric::Euclidean), (Variant::WardCosine, Metric::Cosine)] {
            let want = naive_agglomeration(&x, variant);
            let got = linkage(points, metric, Linkage::Ward, Execution::default()).unwrap();
            for (s, (m, &(a, b, h, size))) in got.steps().iter().zip(&want).enumerate() {
                ensure((m.a, m.b, m.size) == (a, b, size), || {
                    format!("dataset {t} {variant:?} step {s}: merged ({}, {}) size {}, oracle ({a}, {b}) size {size}", m.a, m.b, m.size)
                })?;
                let err = (m.height - h).abs() / h.abs().max(1.0);
                worst = worst.max(err);
                ensure(err <= 1e-9, || format!("dataset {t} {variant:?} step {s}: height {} vs {h}", m.height))?;
            }
            let k = rng.random_range(1..=n);
            let cfg = AggConfig::new(k, metric, Linkage::Ward);
            let labels = agglomerative(points, &cfg).unwrap().labels;
            ensure(labels == naive_cut(n, &want, k), || format!("dataset {t} {variant:?}: cut at k = {k} differs"))?;
        }
    }
    // an exact tie: the lowest-index pair merges first
    let square = [0.0, 0.0, 0.0, 1.0, 10.0, 0.0, 10.0, 1.0];
    let got = agglomerative(Points::new(&square, 2).unwrap(), &AggConfig::ward(2)).unwrap();
    ensure(got.labels == vec![0, 0, 1, 1], || format!("square example gave {:?}", got.labels))?;
    within(start.elapsed(), 30)?;
    Ok(format!("100 datasets x 2 variants, max relative height error {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 3

fn optimal_inertia(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sum = vec![0.0; k];
        let mut sq = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for (&l, &v) in labels.iter().zip(x) {
            sum[l] += v;
            sq[l] += v * v;
            cnt[l] += 1;
        }
        if cnt.iter().all(|&c| c > 0) {
            let inertia: f64 = (0..k)
                .map(|l| {
                    let mean = sum[l] / cnt[l] as f64;
                    x.iter().zip(&labels).filter(|(_, &m)| m == l).map(|(v, _)| (v - mean) * (v - mean)).sum::<f64>()
                })
                .sum();
            best = best.min(inertia);
        }
        // next label vector in base k
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

fn kmeans_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let n = rng.random_range(2..=12);
        let k = rng.random_range(1..=3.min(n));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let cfg = KMeansConfig::new(k).with_seed(t).with_restarts(20);
        let fit = kmeans_fit(Points::new(&x, 1).unwrap(), &cfg).unwrap();
        let opt = optimal_inertia(&x, k);
        let err = (fit.inertia - opt).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("dataset {t} (n = {n}, k = {k}): inertia {} vs optimum {opt}", fit.inertia))?;
    }
    within(start.elapsed(), 10)?;
    Ok(format!("50 datasets, max |inertia - optimum| {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 4

/// Longest common substring by enumeration: longest first, then leftmost in
/// `a`, then leftmost in `b`.
fn brute_lcs(a: &[char], b: &[char]) -> (usize, usize, usize) {
    for len in (1..=a.len().min(b.len())).rev() {
        for sa in 0..=a.len() - len {
            for sb in 0..=b.len() - len {
                if a[sa..sa + len] == b[sb..sb + len] {
                    return (len, sa, sb);
                }
            }
        }
    }
    (0, 0, 0)
}

fn signature_correctness() -> Outcome {
    let sig = |p: &str, c: &str| AffixSignature::between(p, c).to_string();
    ensure(sig("padat", "padnout") == "-at +nout", || format!("padat→padnout gave {:?}", sig("padat", "padnout")))?;
    ensure(sig("živit", "oživit") == "o+", || format!("živit→oživit gave {:?}", sig("živit", "oživit")))?;

    let map = ClassMap::czech();
    ensure(map.len() == 71 && map.classes().len() == 21, || {
        format!("class map has {} types in {} classes", map.len(), map.classes().len())
    })?;
    for s in map.signatures() {
        let parsed: AffixSignature = s.parse().map_err(|e: Error| format!("{s:?}: {e}"))?;
        ensure(parsed.to_string() == s, || format!("{s:?} renders as {:?}", parsed.to_string()))?;
    }

    let alphabet: Vec<char> = "abcčeěiíoř".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let word = |rng: &mut ChaCha8Rng| -> String {
        let len = rng.random_range(0..=12);
        (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    for t in 0..10_000 {
        let (a, b) = (word(&mut rng), word(&mut rng));
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        let (len, sa, sb) = brute_lcs(&ac, &bc);
        let got = longest_common_substring(&a, &b);
        let want_stem: String = ac[sa..sa + len].iter().collect();
        ensure((got.stem.as_str(), got.start_a, got.start_b) == (want_stem.as_str(), sa, sb), || {
            format!("pair {t} ({a:?}, {b:?}): got {got:?}, brute force ({want_stem:?}, {sa}, {sb})")
        })?;
    }
    Ok("fixed examples, 71 types round-trip, 10^4 random LCS pairs".into())
}

// ------------------------------------------------------------ criteria 5 to 7

const SEEDS: u64 = 10;

fn criterion5_data(seed: u64) -> DiffDataset {
    gen_synthetic(&SyntheticSpec::new(21, 250, 64, 0.05, seed)).unwrap()
}

fn run(data: &DiffDataset, method: Method, normalize: bool, seed: u64) -> derivclust::experiment::AggregateReport {
    let cfg = ExperimentConfig {
        method,
        k: 21,
        runs: 1,
        normalize,
        seed,
        ..Default::default()
    };
    pipeline::evaluate_diffs(data, &cfg, Execution::default()).unwrap().report
}

fn synthetic_recovery() -> Outcome {
    let start = Instant::now();
    let (mut v, mut acc, mut v_random) = (0.0, 0.0, 0.0);
    for seed in 0..SEEDS {
        let data = criterion5_data(seed);
        let km = run(&data, Method::KMeans, true, seed);
        v += km.mean_v;
        acc += km.mean_accuracy;
        v_random += run(&data, Method::Random, true, seed).mean_v;
    }
    let n = SEEDS as f64;
    let (v, acc, v_random) = (v / n, acc / n, v_random / n);
    let detail = format!("k-means V {v:.4}, accuracy {acc:.4}; random V {v_random:.4}");
    ensure(v >= 0.95 && acc >= 0.95 && v_random <= 0.05, || detail.clone())?;
    within(start.elapsed(), 60)?;
    Ok(detail)
}

fn pos_completeness() -> Outcome {
    let mut worst_gap = f64::INFINITY;
    for seed in 0..SEEDS {
        let data = criterion5_data(seed);
        let pos = pos_baseline(data.items().iter().map(|i| &i.pair)).unwrap();
        let r = evaluate(&data.classes(), &pos).unwrap();
        ensure(r.c == 1.0, || format!("seed {seed}: completeness {}", r.c))?;
        let km = run(&data, Method::KMeans, true, seed);
        ensure(r.accuracy < km.mean_accuracy, || {
            format!("seed {seed}: POS accuracy {} not below k-means {}", r.accuracy, km.mean_accuracy)
        })?;
        worst_gap = worst_gap.min(km.mean_accuracy - r.accuracy);
    }

    // random datasets where every class has one POS key, shared keys allowed
    let keys = ['A', 'D', 'N', 'V'];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for t in 0..500 {
        let n_classes = rng.random_range(1..=12);
        let key_of: Vec<(char, char)> = (0..n_classes).map(|_| (keys[rng.random_range(0..4)], keys[rng.random_range(0..4)])).collect();
        let n = rng.random_range(1..=300);
        let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
        let pairs: Vec<DerivPair> = classes.iter().map(|&c| DerivPair::new("x", "y", key_of[c].0, key_of[c].1)).collect();
        let names: Vec<String> = classes.iter().map(|c| format!("class{c}")).collect();
        let r = evaluate(&names, &pos_baseline(&pairs).unwrap()).unwrap();
        ensure(r.c == 1.0, || format!("random dataset {t}: completeness {}", r.c))?;
    }
    Ok(format!("c = 1 on 10 synthetic + 500 random datasets; k-means accuracy ahead by at least {worst_gap:.3}"))
}

fn normalization_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 32;
    let mut table = EmbeddingTable::new(dim).unwrap();
    for i in 0..100_000 {
        let scale = 10f64.powf(rng.random_range(-4.0..4.0));
        let v: Vec<f64> = (0..dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        table.insert(&format!("w{i}"), &v).unwrap();
    }
    let normalized = table.normalize().unwrap();
    let worst = normalized
        .tokens()
        .iter()
        .map(|t| {
            let v = normalized.get(t).unwrap();
            (v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    ensure(normalized.len() == 100_000 && worst <= 1e-6, || format!("max |norm - 1| = {worst:e}"))?;

    let (mut v_norm, mut v_raw, mut seeds_ahead) = (0.0, 0.0, 0);
    for seed in 0..SEEDS {
        let mut spec = SyntheticSpec::new(21, 250, 64, 0.05, seed);
        spec.scale_range = Some((0.1, 10.0));
        let data = gen_synthetic(&spec).unwrap();
        let a = run(&data, Method::KMeans, true, seed).mean_v;
        let b = run(&data, Method::KMeans, false, seed).mean_v;
        v_norm += a;
        v_raw += b;
        seeds_ahead += usize::from(a >= b);
    }
    let n = SEEDS as f64;
    let (v_norm, v_raw) = (v_norm / n, v_raw / n);
    let detail = format!(
        "max |norm - 1| {worst:.1e}; mean V normalized {v_norm:.4} vs raw {v_raw:.4}, normalized ahead on {seeds_ahead}/10 seeds"
    );
    ensure(v_norm >= v_raw, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- criterion 8

fn toy(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/fixtures/toy").join(name)
}

/// The toy pipeline from network file to rendered reports.
fn toy_reports(exec: Execution) -> Vec<u8> {
    let read = |name: &str| std::fs::read(toy(name)).unwrap();
    let net = parse_network(&read("network.tsv")[..]).unwrap();
    let mut pairs_file = Vec::new();
    pipeline::write_pairs(&mut pairs_file, &net.extract_pairs()).unwrap();
    let pairs = pipeline::read_pairs(&pairs_file[..]).unwrap();
    let (rows, _) = pipeline::annotate_pairs(&pairs, &ClassMap::czech(), 3, None).unwrap();
    let mut sig_file = Vec::new();
    pipeline::write_annotated(&mut sig_file, &rows).unwrap();
    let rows = pipeline::read_annotated(&sig_file[..]).unwrap();

    let table = load_embeddings_text(&read("embeddings.txt")[..]).unwrap();
    let freq = FrequencyTable::parse(&read("freq.tsv")[..]).unwrap();
    let cfg = ExperimentConfig::parse(&String::from_utf8(read("config.txt")).unwrap()).unwrap();
    let ev = pipeline::evaluate_pairs(&rows, &table, Some(&freq), &cfg, exec).unwrap();

    let mut out = pipeline::report_json(&ev, &cfg, None).unwrap().into_bytes();
    pipeline::write_report_tsv(&mut out, &[&ev.report]).unwrap();
    pipeline::write_per_class_tsv(&mut out, &ev.report).unwrap();
    pipeline::write_exclusions_tsv(&mut out, &ev.exclusions).unwrap();
    out
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn determinism() -> Outcome {
    let reference = in_pool(1, || toy_reports(Execution::Parallel));
    let golden = std::fs::read(toy("golden/report.json")).unwrap();
    ensure(reference.starts_with(&golden), || "JSON report differs from the golden file".into())?;
    let variants = [
        ("1 thread, repeated", in_pool(1, || toy_reports(Execution::Parallel))),
        ("8 threads", in_pool(8, || toy_reports(Execution::Parallel))),
        ("8 threads, repeated", in_pool(8, || toy_reports(Execution::Parallel))),
        ("sequential", toy_reports(Execution::Sequential)),
    ];
    for (name, bytes) in &variants {
        ensure(bytes == &reference, || format!("reports differ for {name}"))?;
    }
    Ok(format!("{} report bytes identical over 5 runs, threads 1 and 8, golden JSON matched", reference.len()))
}

// ---------------------------------------------------------------- criterion 9

fn scale_smoke() -> Outcome {
    let gen_start = Instant::now();
    let data = gen_synthetic(&SyntheticSpec::new(20, 5_000, 512, 0.05, 9)).unwrap();
    let gen_secs = gen_start.elapsed().as_secs_f64();
    ensure(data.len() == 100_000 && data.dim() == 512, || "unexpected dataset shape".into())?;

    let start = Instant::now();
    let cfg = ExperimentConfig {
        method: Method::KMeans,
        k: 21,
        runs: 10,
        seed: 9,
        ..Default::default()
    };
    let report = run_experiment(&data, &cfg).unwrap();
    let elapsed = start.elapsed();
    ensure(report.runs.len() == 10, || "expected 10 runs".into())?;
    within(elapsed, 300)?;

    let points = Points::from(&data);
    let err = agglomerative(points, &AggConfig::ward(21)).unwrap_err();
    let msg = err.to_string();
    ensure(
        matches!(err, Error::InvalidInput(_)) && msg.contains(&DEFAULT_MAX_AGG_ITEMS.to_string()),
        || format!("unexpected cap error: {msg}"),
    )?;
    Ok(format!(
        "10 k-means runs in {:.1} s on {} threads (data generated in {gen_secs:.1} s), V {:.3}; agglomerative rejected {} items: {msg}",
        elapsed.as_secs_f64(),
        rayon::current_num_threads(),
        report.mean_v,
        data.len()
    ))
}
