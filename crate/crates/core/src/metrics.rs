//! External clustering scores: homogeneity, completeness, V-measure,
//! majority-class accuracy and per-class precision/recall.
//!
//! Entropies use the natural logarithm. Class rows of a [`ContingencyTable`]
//! are sorted by label, which also fixes the majority tie rule: among equally
//! frequent classes in a cluster the lexicographically smallest wins.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};

/// Joint counts of gold classes (rows) and clusters (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[c][k]`
    pub counts: Vec<Vec<usize>>,
    pub class_labels: Vec<String>,
    pub total: usize,
}

impl ContingencyTable {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn class_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn cluster_totals(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_clusters()];
        for row in &self.counts {
            out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
        }
        out
    }

    /// The same table with classes and clusters swapped. Former cluster ids
    /// become the class labels.
    pub fn transposed(&self) -> ContingencyTable {
        let (nc, nk) = (self.n_classes(), self.n_clusters());
        ContingencyTable {
            counts: (0..nk).map(|k| (0..nc).map(|c| self.counts[c][k]).collect()).collect(),
            class_labels: (0..nk).map(|k| k.to_string()).collect(),
            total: self.total,
        }
    }
}

/// Cross-tabulates gold classes against cluster labels. Columns cover every
/// cluster id in `0..assignment.k`, empty ones included.
pub fn contingency<S: AsRef<str>>(
    classes: &[S],
    assignment: &ClusterAssignment,
) -> Result<ContingencyTable> {
    if classes.len() != assignment.labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} class labels but {} cluster labels",
            classes.len(),
            assignment.labels.len()
        )));
    }
    let labels: Vec<String> = classes
        .iter()
        .map(|c| c.as_ref())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();
    let row: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut counts = vec![vec![0usize; assignment.k]; labels.len()];
    for (c, &k) in classes.iter().zip(&assignment.labels) {
        if k >= assignment.k {
            return Err(Error::InvalidInput(format!("cluster label {k} ≥ k = {}", assignment.k)));
        }
        counts[row[c.as_ref()]][k] += 1;
    }
    Ok(ContingencyTable {
        counts,
        class_labels: labels,
        total: classes.len(),
    })
}

fn entropy(marginal: &[usize], total: f64) -> f64 {
    -marginal
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// H(rows | columns).
fn conditional_entropy(counts: &[Vec<usize>], col_totals: &[usize], total: f64) -> f64 {
    let mut h = 0.0;
    for row in counts {
        for (&n, &col) in row.iter().zip(col_totals) {
            if n > 0 {
                h -= (n as f64 / total) * (n as f64 / col as f64).ln();
            }
        }
    }
    h
}

/// Homogeneity, completeness and V-measure.
pub fn homogeneity_completeness_v(table: &ContingencyTable) -> Result<(f64, f64, f64)> {
    if table.total == 0 {
        return Err(Error::InvalidInput("contingency table is empty".into()));
    }
    let total = table.total as f64;
    let class_totals = table.class_totals();
    let cluster_totals = table.cluster_totals();
    let h_c = entropy(&class_totals, total);
    let h_k = entropy(&cluster_totals, total);

    let h = if h_c == 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&table.counts, &cluster_totals, total) / h_c
    };
    let c = if h_k == 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&table.transposed().counts, &class_totals, total) / h_k
    };
    // guard tiny negative rounding residue
    let (h, c) = (h.clamp(0.0, 1.0), c.clamp(0.0, 1.0));
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    Ok((h, c, v))
}

/// Majority mapping of clusters to classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorityMapping {
    pub accuracy: f64,
    /// Distinct classes that are the majority of at least one non-empty cluster.
    pub cls_assigned: usize,
    /// Row index of the majority class per cluster; `None` for empty clusters.
    pub cluster_to_class: Vec<Option<usize>>,
}

/// Accuracy of labelling each cluster with its most frequent class.
pub fn majority_accuracy(table: &ContingencyTable) -> Result<MajorityMapping> {
    if table.total == 0 {
        return Err(Error::InvalidInput("contingency table is empty".into()));
    }
    let mut correct = 0usize;
    let mut mapping = Vec::with_capacity(table.n_clusters());
    for k in 0..table.n_clusters() {
        let mut best: Option<(usize, usize)> = None;
        for c in 0..table.n_classes() {
            let n = table.counts[c][k];
            if n > 0 && best.is_none_or(|(_, bn)| n > bn) {
                best = Some((c, n));
            }
        }
        if let Some((_, n)) = best {
            correct += n;
        }
        mapping.push(best.map(|(c, _)| c));
    }
    let cls_assigned = mapping.iter().flatten().collect::<BTreeSet<_>>().len();
    Ok(MajorityMapping {
        accuracy: correct as f64 / table.total as f64,
        cls_assigned,
        cluster_to_class: mapping,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScore {
    /// `None` when no item was predicted as this class.
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Precision and recall per class for the majority classifier.
pub fn per_class_pr(
    table: &ContingencyTable,
    mapping: &MajorityMapping,
) -> BTreeMap<String, ClassScore> {
    let class_totals = table.class_totals();
    let cluster_totals = table.cluster_totals();
    let mut predicted = vec![0usize; table.n_classes()];
    let mut correct = vec![0usize; table.n_classes()];
    for (k, class) in mapping.cluster_to_class.iter().enumerate() {
        if let Some(c) = *class {
            predicted[c] += cluster_totals[k];
            correct[c] += table.counts[c][k];
        }
    }
    table
        .class_labels
        .iter()
        .enumerate()
        .map(|(c, label)| {
            let precision = (predicted[c] > 0).then(|| correct[c] as f64 / predicted[c] as f64);
            let recall = if class_totals[c] > 0 {
                correct[c] as f64 / class_totals[c] as f64
            } else {
                0.0
            };
            (label.clone(), ClassScore { precision, recall })
        })
        .collect()
}

/// All scores for one clustering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub h: f64,
    pub c: f64,
    pub v: f64,
    pub accuracy: f64,
    pub cls_assigned: usize,
    pub per_class: BTreeMap<String, ClassScore>,
}

pub fn evaluate<S: AsRef<str>>(classes: &[S], assignment: &ClusterAssignment) -> Result<EvalReport> {
    let table = contingency(classes, assignment)?;
    let (h, c, v) = homogeneity_completeness_v(&table)?;
    let mapping = majority_accuracy(&table)?;
    let per_class = per_class_pr(&table, &mapping);
    Ok(EvalReport {
        h,
        c,
        v,
        accuracy: mapping.accuracy,
        cls_assigned: mapping.cls_assigned,
        per_class,
    })
}
