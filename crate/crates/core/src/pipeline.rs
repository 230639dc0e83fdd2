//! Versioned interchange files for the command-line stages.
//!
//! Every TSV file starts with a `#derivclust <stage> v1` line. Real numbers
//! are written with 9 significant digits; human-readable reports use
//! percentages with 2 decimals.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde_json::{json, Value};

use crate::embeddings::{build_diffs, DiffDataset, DiffItem, EmbeddingTable, ExclusionReport, FrequencyTable};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment_with, AggregateReport, ExperimentConfig, Method};
use crate::lexnet::{DerivPair, Pos};
use crate::par::Execution;
use crate::signature::{count_types, filter_types, AffixSignature, ClassMap, TypeCounts, TypeHistogram, EMPTY_SIGNATURE, UNMAPPED};

pub const PAIRS_HEADER: &str = "#derivclust pairs v1";
pub const SIGNATURES_HEADER: &str = "#derivclust signatures v1";
pub const DIFFS_HEADER: &str = "#derivclust diffs v1";
pub const REPORT_HEADER: &str = "#derivclust report v1";
pub const PER_CLASS_HEADER: &str = "#derivclust per-class v1";
pub const EXCLUSIONS_HEADER: &str = "#derivclust exclusions v1";

/// Tag given to pairs read from a diffs file, which stores no POS.
pub const UNKNOWN_POS: Pos = Pos('?');

/// `x` rounded to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn num(x: f64) -> String {
    round_sig9(x).to_string()
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Checks the header line and returns the remaining non-blank lines with
/// their 1-based line numbers.
fn body_lines<R: BufRead>(reader: R, header: &str) -> Result<Vec<(usize, String)>> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(first) if first.trim_end_matches('\r') == header => {}
        Some(first) => {
            return Err(Error::parse(1, format!("expected header {header:?}, found {first:?}")));
        }
        None => return Err(Error::parse(1, format!("empty file, expected header {header:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut line = line?;
        if line.ends_with('\r') {
            line.pop();
        }
        if !line.is_empty() {
            out.push((i + 2, line));
        }
    }
    Ok(out)
}

fn pos_field(s: &str, line: usize) -> Result<Pos> {
    Pos::parse(s).ok_or_else(|| Error::parse(line, format!("invalid POS tag {s:?}")))
}

pub fn write_pairs<W: Write>(mut out: W, pairs: &[DerivPair]) -> Result<()> {
    writeln!(out, "{PAIRS_HEADER}")?;
    for p in pairs {
        writeln!(out, "{}\t{}\t{}\t{}", p.parent_lemma, p.child_lemma, p.parent_pos, p.child_pos)?;
    }
    Ok(())
}

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<DerivPair>> {
    body_lines(reader, PAIRS_HEADER)?
        .into_iter()
        .map(|(n, line)| {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(n, format!("expected 4 columns, found {}", cols.len())));
            }
            Ok(DerivPair {
                parent_lemma: cols[0].to_owned(),
                child_lemma: cols[1].to_owned(),
                parent_pos: pos_field(cols[2], n)?,
                child_pos: pos_field(cols[3], n)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    Regular,
    /// No common substring.
    Irregular,
    /// Parent and child lemma are identical.
    Degenerate,
}

impl PairKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::Regular => "regular",
            PairKind::Irregular => "irregular",
            PairKind::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(PairKind::Regular),
            "irregular" => Ok(PairKind::Irregular),
            "degenerate" => Ok(PairKind::Degenerate),
            other => Err(Error::InvalidInput(format!("unknown pair kind {other:?}"))),
        }
    }
}

/// A pair with its rendered derivation type and class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedPair {
    pub pair: DerivPair,
    pub kind: PairKind,
    pub signature: String,
    pub class: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignatureSummary {
    /// Type counts over the pairs that passed the frequency filter.
    pub counts: TypeCounts,
    /// Types at or above the count threshold.
    pub kept: TypeHistogram,
    /// Pairs left out of the counts by the frequency filter.
    pub low_frequency: usize,
}

/// Annotates every pair with its signature. A pair gets a class only when
/// its type occurs at least `min_type_count` times (counted over pairs whose
/// lemmas pass `freq`, if given) and the type is in `map`.
pub fn annotate_pairs(
    pairs: &[DerivPair],
    map: &ClassMap,
    min_type_count: usize,
    freq: Option<(&FrequencyTable, u64)>,
) -> Result<(Vec<AnnotatedPair>, SignatureSummary)> {
    if min_type_count == 0 {
        return Err(Error::Config("min type count must be at least 1".into()));
    }
    let frequent = |p: &DerivPair| {
        freq.is_none_or(|(f, min)| f.count(&p.parent_lemma) >= min && f.count(&p.child_lemma) >= min)
    };
    let counted: Vec<&DerivPair> = pairs.iter().filter(|p| frequent(p)).collect();
    let counts = count_types(counted.iter().copied());
    let kept = filter_types(&counts.histogram, min_type_count);

    let annotated = pairs
        .iter()
        .map(|pair| {
            let (kind, signature) = match AffixSignature::of_pair(pair) {
                Err(_) => (PairKind::Degenerate, EMPTY_SIGNATURE.to_owned()),
                Ok(sig) if sig.irregular => (PairKind::Irregular, sig.to_string()),
                Ok(sig) => (PairKind::Regular, sig.to_string()),
            };
            let class = if kind == PairKind::Regular && kept.contains_key(&signature) {
                map.class_of(&signature).to_owned()
            } else {
                UNMAPPED.to_owned()
            };
            AnnotatedPair {
                pair: pair.clone(),
                kind,
                signature,
                class,
            }
        })
        .collect();
    let summary = SignatureSummary {
        low_frequency: pairs.len() - counted.len(),
        counts,
        kept,
    };
    Ok((annotated, summary))
}

pub fn write_annotated<W: Write>(mut out: W, rows: &[AnnotatedPair]) -> Result<()> {
    writeln!(out, "{SIGNATURES_HEADER}")?;
    for r in rows {
        let p = &r.pair;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.parent_lemma, p.child_lemma, p.parent_pos, p.child_pos, r.kind, r.signature, r.class
        )?;
    }
    Ok(())
}

pub fn read_annotated<R: BufRead>(reader: R) -> Result<Vec<AnnotatedPair>> {
    body_lines(reader, SIGNATURES_HEADER)?
        .into_iter()
        .map(|(n, line)| {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                return Err(Error::parse(n, format!("expected 7 columns, found {}", cols.len())));
            }
            Ok(AnnotatedPair {
                pair: DerivPair {
                    parent_lemma: cols[0].to_owned(),
                    child_lemma: cols[1].to_owned(),
                    parent_pos: pos_field(cols[2], n)?,
                    child_pos: pos_field(cols[3], n)?,
                },
                kind: cols[4].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?,
                signature: cols[5].to_owned(),
                class: cols[6].to_owned(),
            })
        })
        .collect()
}

/// Writes `N D`, then one `parent<TAB>child<TAB>class<TAB>d1 … dD` row per item.
pub fn write_diffs<W: Write>(mut out: W, data: &DiffDataset) -> Result<()> {
    writeln!(out, "{DIFFS_HEADER}")?;
    writeln!(out, "{} {}", data.len(), data.dim())?;
    let mut row = String::new();
    for (i, item) in data.items().iter().enumerate() {
        row.clear();
        for (j, &x) in data.row(i).iter().enumerate() {
            if j > 0 {
                row.push(' ');
            }
            row.push_str(&num(x));
        }
        writeln!(out, "{}\t{}\t{}\t{row}", item.pair.parent_lemma, item.pair.child_lemma, item.class)?;
    }
    Ok(())
}

/// Reads a diffs file. Pairs carry [`UNKNOWN_POS`] tags.
pub fn read_diffs<R: BufRead>(reader: R) -> Result<DiffDataset> {
    let lines = body_lines(reader, DIFFS_HEADER)?;
    let mut lines = lines.into_iter();
    let (n0, shape) = lines
        .next()
        .ok_or_else(|| Error::parse(2, "missing `N D` line"))?;
    let dims: Vec<usize> = shape
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(n0, format!("invalid `N D` line {shape:?}")))?;
    let [n, dim] = dims[..] else {
        return Err(Error::parse(n0, format!("invalid `N D` line {shape:?}")));
    };
    if dim == 0 {
        return Err(Error::parse(n0, "dimension must be positive"));
    }
    let mut data = DiffDataset::new(dim);
    let mut d = Vec::with_capacity(dim);
    for (line_no, line) in lines {
        let mut cols = line.splitn(4, '\t');
        let (Some(parent), Some(child), Some(class), Some(values)) =
            (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(Error::parse(line_no, "expected parent, child, class and vector columns"));
        };
        d.clear();
        for tok in values.split_whitespace() {
            d.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(line_no, format!("invalid number {tok:?}")))?,
            );
        }
        if d.len() != dim {
            return Err(Error::parse(line_no, format!("expected {dim} values, found {}", d.len())));
        }
        let item = DiffItem {
            pair: DerivPair {
                parent_lemma: parent.to_owned(),
                child_lemma: child.to_owned(),
                parent_pos: UNKNOWN_POS,
                child_pos: UNKNOWN_POS,
            },
            class: class.to_owned(),
            source: data.len(),
        };
        data.push(item, &d).map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    if data.len() != n {
        return Err(Error::Integrity(format!("header announces {n} rows, file has {}", data.len())));
    }
    Ok(data)
}

/// Result of the evaluate stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: AggregateReport,
    pub exclusions: ExclusionReport,
}

/// Builds difference vectors from annotated pairs and runs the experiment.
///
/// Embeddings are normalized first when `cfg.normalize` is set. After the
/// difference dataset is built, types with fewer than `cfg.min_type_count`
/// remaining instances are dropped.
pub fn evaluate_pairs(
    annotated: &[AnnotatedPair],
    table: &EmbeddingTable,
    freq: Option<&FrequencyTable>,
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<Evaluation> {
    cfg.validate()?;
    let normalized;
    let table = if cfg.normalize {
        normalized = table.normalize()?;
        &normalized
    } else {
        table
    };
    let pairs: Vec<DerivPair> = annotated.iter().map(|a| a.pair.clone()).collect();
    let classes: Vec<&str> = annotated.iter().map(|a| a.class.as_str()).collect();
    let (data, mut exclusions) = build_diffs(&pairs, &classes, table, freq, cfg.min_freq, exec)?;

    let mut type_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for item in data.items() {
        *type_counts.entry(&annotated[item.source].signature).or_default() += 1;
    }
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| type_counts[annotated[data.items()[i].source].signature.as_str()] >= cfg.min_type_count)
        .collect();
    exclusions.rare_type = data.len() - keep.len();
    let data = if keep.len() == data.len() { data } else { data.subset(&keep) };

    let report = run_experiment_with(&data, cfg, exec)?;
    Ok(Evaluation { report, exclusions })
}

/// Runs the experiment on a ready-made difference dataset, normalizing its
/// rows first when `cfg.normalize` is set.
pub fn evaluate_diffs(data: &DiffDataset, cfg: &ExperimentConfig, exec: Execution) -> Result<Evaluation> {
    cfg.validate()?;
    if cfg.method == Method::Pos
        && data
            .items()
            .iter()
            .any(|i| i.pair.parent_pos == UNKNOWN_POS || i.pair.child_pos == UNKNOWN_POS)
    {
        return Err(Error::Config(
            "method pos needs POS tags; evaluate annotated pairs instead of a diffs file".into(),
        ));
    }
    let normalized;
    let data = if cfg.normalize {
        normalized = data.normalize_rows()?;
        &normalized
    } else {
        data
    };
    let report = run_experiment_with(data, cfg, exec)?;
    Ok(Evaluation {
        report,
        exclusions: ExclusionReport::default(),
    })
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(round_sig9(v)))
}

/// The machine-readable report as pretty-printed JSON with sorted keys.
pub fn report_json(ev: &Evaluation, cfg: &ExperimentConfig, timestamp: Option<u64>) -> Result<String> {
    let r = &ev.report;
    let per_class: serde_json::Map<String, Value> = r
        .per_class
        .iter()
        .map(|(class, s)| {
            let v = json!({
                "precision": opt_num(s.precision),
                "recall": round_sig9(s.recall),
                "precision_undefined_runs": s.precision_undefined_runs,
            });
            (class.clone(), v)
        })
        .collect();
    let per_run: Vec<Value> = r
        .runs
        .iter()
        .map(|e| {
            json!({
                "h": round_sig9(e.h),
                "c": round_sig9(e.c),
                "v": round_sig9(e.v),
                "accuracy": round_sig9(e.accuracy),
                "cls": e.cls_assigned,
            })
        })
        .collect();
    let mut obj = json!({
        "format": "derivclust report v1",
        "method": r.method.name(),
        "k": r.k,
        "items": r.items,
        "runs": r.runs.len(),
        "h": round_sig9(r.mean_h),
        "c": round_sig9(r.mean_c),
        "v": round_sig9(r.mean_v),
        "accuracy": round_sig9(r.mean_accuracy),
        "cls": round_sig9(r.mean_cls),
        "per_class": per_class,
        "per_run": per_run,
        "config": serde_json::to_value(cfg).map_err(|e| Error::InvalidInput(e.to_string()))?,
        "exclusions": serde_json::to_value(ev.exclusions).map_err(|e| Error::InvalidInput(e.to_string()))?,
    });
    if let Some(ts) = timestamp {
        obj["timestamp"] = json!(ts);
    }
    let mut s = serde_json::to_string_pretty(&obj).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One summary row: cls, then H, C, V, A as percentages.
pub fn write_report_tsv<W: Write>(mut out: W, reports: &[&AggregateReport]) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    writeln!(out, "method\tk\truns\tcls\tH\tC\tV\tA")?;
    for r in reports {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.1}\t{}\t{}\t{}\t{}",
            r.method,
            r.k,
            r.runs.len(),
            r.mean_cls,
            pct(r.mean_h),
            pct(r.mean_c),
            pct(r.mean_v),
            pct(r.mean_accuracy)
        )?;
    }
    Ok(())
}

/// Per-class precision and recall as percentages; `n/a` when precision was
/// undefined in every run.
pub fn write_per_class_tsv<W: Write>(mut out: W, report: &AggregateReport) -> Result<()> {
    writeln!(out, "{PER_CLASS_HEADER}")?;
    writeln!(out, "class\tprecision\trecall\tprecision_undefined_runs")?;
    for (class, s) in &report.per_class {
        let p = s.precision.map_or_else(|| "n/a".to_owned(), pct);
        writeln!(out, "{class}\t{p}\t{}\t{}", pct(s.recall), s.precision_undefined_runs)?;
    }
    Ok(())
}

pub fn write_exclusions_tsv<W: Write>(mut out: W, ex: &ExclusionReport) -> Result<()> {
    writeln!(out, "{EXCLUSIONS_HEADER}")?;
    writeln!(out, "reason\tcount")?;
    writeln!(out, "missing_embedding\t{}", ex.missing_embedding)?;
    writeln!(out, "low_frequency\t{}", ex.low_frequency)?;
    writeln!(out, "unmapped\t{}", ex.unmapped)?;
    writeln!(out, "rare_type\t{}", ex.rare_type)?;
    writeln!(out, "total\t{}", ex.total())?;
    Ok(())
}
