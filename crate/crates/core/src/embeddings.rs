//! Embedding tables, corpus frequency lists and difference-vector datasets.

use std::collections::HashMap;
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexnet::DerivPair;
use crate::par::{self, Execution};
use crate::signature::UNMAPPED;

/// Default minimum corpus frequency for both lemmata of a pair.
pub const DEFAULT_MIN_FREQ: u64 = 5;

/// Token → vector map with row-major `f64` storage.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
    normalized: bool,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
            normalized: false,
            duplicates: 0,
        })
    }

    /// Inserts or replaces a vector. Returns `true` if the token was already present.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "vector for {token:?} has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if let Some(bad) = vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite component {bad} for {token:?}")));
        }
        self.normalized = false;
        match self.index.get(token) {
            Some(&row) => {
                self.values[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
                self.duplicates += 1;
                Ok(true)
            }
            None => {
                self.index.insert(token.to_owned(), self.tokens.len());
                self.tokens.push(token.to_owned());
                self.values.extend_from_slice(vector);
                Ok(false)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Rows that replaced an earlier row for the same token while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// Exact-match lookup.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&r| self.row(r))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    /// Scales every vector to unit L2 norm.
    pub fn normalize(&self) -> Result<Self> {
        let mut out = self.clone();
        for (r, row) in out.values.chunks_exact_mut(self.dim).enumerate() {
            let norm = l2_norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroVector(self.tokens[r].clone()));
            }
            row.iter_mut().for_each(|x| *x /= norm);
        }
        out.normalized = true;
        Ok(out)
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Reads the `count dim` header + `token c1 … c_dim` text format.
///
/// Duplicate tokens keep the last row; see [`EmbeddingTable::duplicates`].
pub fn load_embeddings_text<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::parse(1, "missing `count dim` header")),
    };
    let mut fields = header.split_ascii_whitespace();
    let parse_num = |s: Option<&str>, what: &str| -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, format!("header must be `count dim`, bad {what}")))
    };
    let count = parse_num(fields.next(), "count")?;
    let dim = parse_num(fields.next(), "dim")?;
    if fields.next().is_some() {
        return Err(Error::parse(1, "header must be `count dim`"));
    }
    let mut table = EmbeddingTable::new(dim).map_err(|e| Error::parse(1, e.to_string()))?;

    let mut rows = 0usize;
    let mut buf = Vec::with_capacity(dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let token = fields.next().expect("non-blank line has a field");
        buf.clear();
        for f in fields {
            let x: f64 = f
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid component {f:?}")))?;
            if !x.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite component {f:?}")));
            }
            buf.push(x);
        }
        if buf.len() != dim {
            return Err(Error::parse(
                lineno,
                format!("expected {dim} components, found {}", buf.len()),
            ));
        }
        table.insert(token, &buf)?;
        rows += 1;
    }
    if rows != count {
        return Err(Error::parse(
            1,
            format!("header declares {count} rows but {rows} were read"),
        ));
    }
    Ok(table)
}

/// Corpus counts per token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
}

impl FrequencyTable {
    /// Reads `token<TAB>count` lines.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut counts = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let (token, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected `token<TAB>count`"))?;
            let count: u64 = count
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid count {count:?}")))?;
            if counts.insert(token.to_owned(), count).is_some() {
                return Err(Error::parse(lineno, format!("duplicate token {token:?}")));
            }
        }
        Ok(FrequencyTable { counts })
    }

    pub fn from_counts<I, S>(iter: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        FrequencyTable {
            counts: iter.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    /// Count of `token`; absent tokens count 0.
    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffItem {
    pub pair: DerivPair,
    pub class: String,
    /// Position of the pair in the input list it was built from.
    pub source: usize,
}

/// Labeled difference vectors `d = v(child) − v(parent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffDataset {
    dim: usize,
    items: Vec<DiffItem>,
    values: Vec<f64>,
}

impl DiffDataset {
    pub fn new(dim: usize) -> Self {
        DiffDataset {
            dim,
            items: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, item: DiffItem, d: &[f64]) -> Result<()> {
        if d.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "difference vector has {} components, expected {}",
                d.len(),
                self.dim
            )));
        }
        if item.class == UNMAPPED {
            return Err(Error::InvalidInput("dataset items need a mapped class".into()));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite difference component".into()));
        }
        self.items.push(item);
        self.values.extend_from_slice(d);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[DiffItem] {
        &self.items
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major `len × dim` matrix.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Gold class of every item, in order.
    pub fn classes(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.class.as_str()).collect()
    }

    pub fn pairs(&self) -> Vec<&DerivPair> {
        self.items.iter().map(|i| &i.pair).collect()
    }

    /// Items at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> DiffDataset {
        let mut out = DiffDataset::new(self.dim);
        for &i in indices {
            out.items.push(self.items[i].clone());
            out.values.extend_from_slice(self.row(i));
        }
        out
    }

    /// Copy with every row scaled to unit length.
    pub fn normalize_rows(&self) -> Result<DiffDataset> {
        let mut out = self.clone();
        for (i, row) in out.values.chunks_exact_mut(self.dim).enumerate() {
            let norm = l2_norm(row);
            if norm == 0.0 {
                let p = &self.items[i].pair;
                return Err(Error::ZeroVector(format!(
                    "{}→{} (item {i})",
                    p.parent_lemma, p.child_lemma
                )));
            }
            row.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(out)
    }
}

/// Why pairs were left out of a [`DiffDataset`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExclusionReport {
    pub missing_embedding: usize,
    pub low_frequency: usize,
    pub unmapped: usize,
    /// Pairs whose derivation type fell below the type-count threshold.
    pub rare_type: usize,
}

impl ExclusionReport {
    pub fn total(&self) -> usize {
        self.missing_embedding + self.low_frequency + self.unmapped + self.rare_type
    }
}

enum Outcome {
    Kept(Vec<f64>),
    Missing,
    LowFreq,
    Unmapped,
}

/// Builds difference vectors for `pairs`, labeled with `classes[i]`.
///
/// A pair is dropped, for the first matching reason in this order, when
/// either lemma has no embedding, either lemma's corpus count is below
/// `min_freq` (only if `freq` is given), or its class is [`UNMAPPED`].
pub fn build_diffs<S: AsRef<str> + Sync>(
    pairs: &[DerivPair],
    classes: &[S],
    table: &EmbeddingTable,
    freq: Option<&FrequencyTable>,
    min_freq: u64,
    exec: Execution,
) -> Result<(DiffDataset, ExclusionReport)> {
    if pairs.len() != classes.len() {
        return Err(Error::InvalidInput(format!(
            "{} pairs but {} class labels",
            pairs.len(),
            classes.len()
        )));
    }
    let outcomes = par::map_range(exec, pairs.len(), |i| {
        let pair = &pairs[i];
        let (Some(v1), Some(v2)) = (table.get(&pair.parent_lemma), table.get(&pair.child_lemma))
        else {
            return Outcome::Missing;
        };
        if let Some(freq) = freq {
            if freq.count(&pair.parent_lemma) < min_freq || freq.count(&pair.child_lemma) < min_freq
            {
                return Outcome::LowFreq;
            }
        }
        if classes[i].as_ref() == UNMAPPED {
            return Outcome::Unmapped;
        }
        Outcome::Kept(v2.iter().zip(v1).map(|(b, a)| b - a).collect())
    });

    let mut data = DiffDataset::new(table.dim());
    let mut report = ExclusionReport::default();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Outcome::Kept(d) => data.push(
                DiffItem {
                    pair: pairs[i].clone(),
                    class: classes[i].as_ref().to_owned(),
                    source: i,
                },
                &d,
            )?,
            Outcome::Missing => report.missing_embedding += 1,
            Outcome::LowFreq => report.low_frequency += 1,
            Outcome::Unmapped => report.unmapped += 1,
        }
    }
    Ok((data, report))
}
