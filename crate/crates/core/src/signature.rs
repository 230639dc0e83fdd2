//! Affix-change signatures of derivation pairs.
//!
//! A pair is aligned on the longest common substring (the stem) of the two
//! lemmata. Whatever is left in front of the stem is a prefix change, whatever
//! follows is a suffix change. Rendered tokens, in canonical order:
//!
//! | field            | token |
//! |------------------|-------|
//! | prefix deleted   | `X-`  |
//! | prefix added     | `X+`  |
//! | suffix deleted   | `-X`  |
//! | suffix added     | `+X`  |
//!
//! so `padat → padnout` renders as `-at +nout` and `živit → oživit` as `o+`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lexnet::{DerivPair, Pos};

/// Rendering of a signature with no changes.
pub const EMPTY_SIGNATURE: &str = "∅";

/// Class label returned for signatures missing from the class map.
pub const UNMAPPED: &str = "unmapped";

/// Table of the 71 frequent Czech derivation types and their 21 classes.
pub const CZECH_CLASS_MAP_TSV: &str = include_str!("../data/classmap_cs.tsv");

/// Result of a longest-common-substring alignment, in Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemMatch {
    pub stem: String,
    /// Start of the stem in the first string, in chars.
    pub start_a: usize,
    /// Start of the stem in the second string, in chars.
    pub start_b: usize,
}

/// Longest common substring of `a` and `b`, compared per `char`.
///
/// Among equally long candidates the one starting leftmost in `a` wins, then
/// leftmost in `b`. With no common character the stem is empty at `(0, 0)`.
pub fn longest_common_substring(a: &str, b: &str) -> StemMatch {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (len, start_a, start_b) = lcs_chars(&a, &b);
    StemMatch {
        stem: a[start_a..start_a + len].iter().collect(),
        start_a,
        start_b,
    }
}

/// Returns `(length, start_a, start_b)`.
fn lcs_chars(a: &[char], b: &[char]) -> (usize, usize, usize) {
    // run[j + 1] = length of the common suffix of a[..=i] and b[..=j]
    let mut prev = vec![0usize; b.len() + 1];
    let mut run = vec![0usize; b.len() + 1];
    let mut best = (0usize, 0usize, 0usize);
    for (i, &ca) in a.iter().enumerate() {
        for (j, &cb) in b.iter().enumerate() {
            run[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            let len = run[j + 1];
            if len == 0 {
                continue;
            }
            let cand = (len, i + 1 - len, j + 1 - len);
            if len > best.0 || (len == best.0 && (cand.1, cand.2) < (best.1, best.2)) {
                best = cand;
            }
        }
        std::mem::swap(&mut prev, &mut run);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AffixSignature {
    pub prefix_deleted: String,
    pub prefix_added: String,
    pub suffix_deleted: String,
    pub suffix_added: String,
    /// No common substring; the suffix fields hold the whole words.
    pub irregular: bool,
}

impl AffixSignature {
    /// Signature of a pair; fails on degenerate (identical-lemma) pairs.
    pub fn of_pair(pair: &DerivPair) -> Result<Self> {
        if pair.is_degenerate() {
            return Err(Error::DegeneratePair(pair.parent_lemma.clone()));
        }
        Ok(Self::between(&pair.parent_lemma, &pair.child_lemma))
    }

    /// Signature turning `parent` into `child`.
    pub fn between(parent: &str, child: &str) -> Self {
        let a: Vec<char> = parent.chars().collect();
        let b: Vec<char> = child.chars().collect();
        let (len, sa, sb) = lcs_chars(&a, &b);
        if len == 0 {
            return AffixSignature {
                suffix_deleted: parent.to_owned(),
                suffix_added: child.to_owned(),
                irregular: true,
                ..Default::default()
            };
        }
        AffixSignature {
            prefix_deleted: a[..sa].iter().collect(),
            prefix_added: b[..sb].iter().collect(),
            suffix_deleted: a[sa + len..].iter().collect(),
            suffix_added: b[sb + len..].iter().collect(),
            irregular: false,
        }
    }

    /// Applies the signature to `word`, or `None` if the word does not carry
    /// the deleted affixes.
    pub fn apply(&self, word: &str) -> Option<String> {
        let core = word
            .strip_prefix(self.prefix_deleted.as_str())?
            .strip_suffix(self.suffix_deleted.as_str())?;
        Some(format!("{}{}{}", self.prefix_added, core, self.suffix_added))
    }

    pub fn is_empty(&self) -> bool {
        self.prefix_deleted.is_empty()
            && self.prefix_added.is_empty()
            && self.suffix_deleted.is_empty()
            && self.suffix_added.is_empty()
    }
}

impl fmt::Display for AffixSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str(EMPTY_SIGNATURE);
        }
        let tokens = [
            (&self.prefix_deleted, "", "-"),
            (&self.prefix_added, "", "+"),
            (&self.suffix_deleted, "-", ""),
            (&self.suffix_added, "+", ""),
        ];
        let mut first = true;
        for (text, pre, post) in tokens {
            if text.is_empty() {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{pre}{text}{post}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for AffixSignature {
    type Err = Error;

    /// Parses a rendered signature. Tokens must appear in canonical order,
    /// each at most once.
    fn from_str(s: &str) -> Result<Self> {
        let mut sig = AffixSignature::default();
        if s == EMPTY_SIGNATURE {
            return Ok(sig);
        }
        let bad = |why: &str| Error::InvalidInput(format!("signature {s:?}: {why}"));
        let mut last_slot = None;
        for tok in s.split(' ') {
            let (slot, text) = if let Some(t) = tok.strip_prefix('-') {
                (2, t)
            } else if let Some(t) = tok.strip_prefix('+') {
                (3, t)
            } else if let Some(t) = tok.strip_suffix('-') {
                (0, t)
            } else if let Some(t) = tok.strip_suffix('+') {
                (1, t)
            } else {
                return Err(bad(&format!("token {tok:?} has no +/- marker")));
            };
            if text.is_empty() {
                return Err(bad("empty affix"));
            }
            if last_slot.is_some_and(|l| slot <= l) {
                return Err(bad("tokens out of canonical order"));
            }
            last_slot = Some(slot);
            let field = match slot {
                0 => &mut sig.prefix_deleted,
                1 => &mut sig.prefix_added,
                2 => &mut sig.suffix_deleted,
                _ => &mut sig.suffix_added,
            };
            *field = text.to_owned();
        }
        Ok(sig)
    }
}

/// Instance count per rendered signature.
pub type TypeHistogram = BTreeMap<String, usize>;

/// Outcome of signature extraction over a pair list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeCounts {
    pub histogram: TypeHistogram,
    pub degenerate: usize,
    pub irregular: usize,
}

/// Counts derivation types; degenerate and irregular pairs are tallied
/// separately and left out of the histogram.
pub fn count_types<'a, I>(pairs: I) -> TypeCounts
where
    I: IntoIterator<Item = &'a DerivPair>,
{
    let mut out = TypeCounts::default();
    for pair in pairs {
        match AffixSignature::of_pair(pair) {
            Err(_) => out.degenerate += 1,
            Ok(sig) if sig.irregular => out.irregular += 1,
            Ok(sig) => *out.histogram.entry(sig.to_string()).or_insert(0) += 1,
        }
    }
    out
}

/// Drops types seen fewer than `min_count` times.
pub fn filter_types(hist: &TypeHistogram, min_count: usize) -> TypeHistogram {
    hist.iter()
        .filter(|(_, &n)| n >= min_count)
        .map(|(k, &n)| (k.clone(), n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub class: String,
    /// Accepted (parent, child) POS combinations.
    pub pos_pairs: Vec<(Pos, Pos)>,
}

/// Mapping from rendered signature to derivation class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassMap {
    entries: BTreeMap<String, ClassEntry>,
}

impl ClassMap {
    /// The bundled Czech map (71 types, 21 classes).
    pub fn czech() -> Self {
        Self::parse(CZECH_CLASS_MAP_TSV.as_bytes()).expect("bundled class map is valid")
    }

    /// Parses `signature<TAB>class<TAB>parent_pos<TAB>child_pos` lines.
    ///
    /// A POS column may list alternatives separated by `/`; the two columns
    /// are then zipped (`N/A`, `N/A` accepts N→N and A→A).
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(lineno, format!("expected 4 columns, found {}", cols.len())));
            }
            let sig: AffixSignature = cols[0]
                .parse()
                .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
            let rendered = sig.to_string();
            if rendered != cols[0] {
                return Err(Error::parse(
                    lineno,
                    format!("signature {:?} is not canonical (expected {rendered:?})", cols[0]),
                ));
            }
            let parents = parse_pos_list(cols[2], lineno)?;
            let children = parse_pos_list(cols[3], lineno)?;
            if parents.len() != children.len() {
                return Err(Error::parse(lineno, "POS alternative lists differ in length"));
            }
            let entry = ClassEntry {
                class: cols[1].to_owned(),
                pos_pairs: parents.into_iter().zip(children).collect(),
            };
            if entries.insert(rendered, entry).is_some() {
                return Err(Error::parse(lineno, format!("duplicate signature {:?}", cols[0])));
            }
        }
        Ok(ClassMap { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, rendered: &str) -> Option<&ClassEntry> {
        self.entries.get(rendered)
    }

    /// Class of a signature by exact rendered-string lookup, or [`UNMAPPED`].
    pub fn assign_class(&self, sig: &AffixSignature) -> &str {
        self.class_of(&sig.to_string())
    }

    pub fn class_of(&self, rendered: &str) -> &str {
        self.entries
            .get(rendered)
            .map_or(UNMAPPED, |e| e.class.as_str())
    }

    /// Distinct class labels, sorted.
    pub fn classes(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.entries.values().map(|e| e.class.as_str()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn signatures(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn parse_pos_list(s: &str, lineno: usize) -> Result<Vec<Pos>> {
    s.split('/')
        .map(|t| Pos::parse(t).ok_or_else(|| Error::parse(lineno, format!("invalid POS {t:?}"))))
        .collect()
}
