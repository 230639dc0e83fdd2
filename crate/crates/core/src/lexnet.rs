//! Derivational network ingestion.
//!
//! The network file is a headerless UTF-8 TSV with five columns:
//! `id`, `lemma`, `techlemma`, `pos`, `parent_id` (empty for roots). Every
//! lexeme has at most one derivational parent, so the network is a forest.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-letter part-of-speech tag (`N`, `A`, `V`, `D`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos(pub char);

impl Pos {
    pub fn parse(s: &str) -> Option<Pos> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if !c.is_whitespace() => Some(Pos(c)),
            _ => None,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexeme {
    pub id: u64,
    pub lemma: String,
    /// Opaque technical lemma, preserved verbatim.
    pub techlemma: String,
    pub pos: Pos,
    pub parent_id: Option<u64>,
}

/// A validated derivational forest.
///
/// Lexemes are stored sorted by id; `children[i]` lists the positions of the
/// children of `lexemes[i]` in ascending id order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DerivNetwork {
    lexemes: Vec<Lexeme>,
    position: HashMap<u64, usize>,
    children: Vec<Vec<usize>>,
}

/// One parent → child derivation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivPair {
    pub parent_lemma: String,
    pub child_lemma: String,
    pub parent_pos: Pos,
    pub child_pos: Pos,
}

impl DerivPair {
    pub fn new(parent: &str, child: &str, parent_pos: char, child_pos: char) -> Self {
        DerivPair {
            parent_lemma: parent.to_owned(),
            child_lemma: child.to_owned(),
            parent_pos: Pos(parent_pos),
            child_pos: Pos(child_pos),
        }
    }

    /// Parent and child share the same lemma string.
    pub fn is_degenerate(&self) -> bool {
        self.parent_lemma == self.child_lemma
    }

    /// The pair with parent and child swapped.
    pub fn reversed(&self) -> Self {
        DerivPair {
            parent_lemma: self.child_lemma.clone(),
            child_lemma: self.parent_lemma.clone(),
            parent_pos: self.child_pos,
            child_pos: self.parent_pos,
        }
    }
}

impl DerivNetwork {
    /// Builds a network from lexemes, checking id uniqueness, parent
    /// existence and acyclicity.
    pub fn from_lexemes(mut lexemes: Vec<Lexeme>) -> Result<Self> {
        lexemes.sort_by_key(|l| l.id);
        let mut position = HashMap::with_capacity(lexemes.len());
        for (i, lex) in lexemes.iter().enumerate() {
            if position.insert(lex.id, i).is_some() {
                return Err(Error::Integrity(format!("duplicate lexeme id {}", lex.id)));
            }
        }

        let mut children = vec![Vec::new(); lexemes.len()];
        let mut parent_pos = vec![None; lexemes.len()];
        for (i, lex) in lexemes.iter().enumerate() {
            if let Some(pid) = lex.parent_id {
                let &p = position.get(&pid).ok_or_else(|| {
                    Error::Integrity(format!(
                        "lexeme {} refers to missing parent {}",
                        lex.id, pid
                    ))
                })?;
                children[p].push(i);
                parent_pos[i] = Some(p);
            }
        }

        if let Some(node) = find_cycle(&parent_pos) {
            return Err(Error::Integrity(format!(
                "parent links form a cycle through lexeme {}",
                lexemes[node].id
            )));
        }

        Ok(DerivNetwork {
            lexemes,
            position,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.lexemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lexemes.is_empty()
    }

    /// Number of parent links.
    pub fn relation_count(&self) -> usize {
        self.lexemes.iter().filter(|l| l.parent_id.is_some()).count()
    }

    /// Lexemes in ascending id order.
    pub fn lexemes(&self) -> &[Lexeme] {
        &self.lexemes
    }

    pub fn get(&self, id: u64) -> Option<&Lexeme> {
        self.position.get(&id).map(|&i| &self.lexemes[i])
    }

    /// Ids of the children of `id`, ascending.
    pub fn children(&self, id: u64) -> Vec<u64> {
        self.position
            .get(&id)
            .map(|&i| self.children[i].iter().map(|&c| self.lexemes[c].id).collect())
            .unwrap_or_default()
    }

    /// Ids of all lexemes without a parent, ascending.
    pub fn roots(&self) -> Vec<u64> {
        self.lexemes
            .iter()
            .filter(|l| l.parent_id.is_none())
            .map(|l| l.id)
            .collect()
    }

    /// Depth-first preorder of all ids, starting from each root in turn.
    pub fn preorder(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.lexemes.len());
        let mut stack = Vec::new();
        for (i, lex) in self.lexemes.iter().enumerate() {
            if lex.parent_id.is_some() {
                continue;
            }
            stack.push(i);
            while let Some(n) = stack.pop() {
                out.push(self.lexemes[n].id);
                stack.extend(self.children[n].iter().rev());
            }
        }
        out
    }

    /// One pair per parent link, ordered by ascending child id.
    pub fn extract_pairs(&self) -> Vec<DerivPair> {
        self.lexemes
            .iter()
            .filter_map(|child| {
                let parent = self.get(child.parent_id?)?;
                Some(DerivPair {
                    parent_lemma: parent.lemma.clone(),
                    child_lemma: child.lemma.clone(),
                    parent_pos: parent.pos,
                    child_pos: child.pos,
                })
            })
            .collect()
    }

    /// Writes the network back in the five-column TSV format, ascending id.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for lex in &self.lexemes {
            let parent = lex.parent_id.map(|p| p.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                lex.id, lex.lemma, lex.techlemma, lex.pos, parent
            )?;
        }
        Ok(())
    }
}

/// Returns a node lying on a cycle of the parent relation, if any.
fn find_cycle(parent: &[Option<usize>]) -> Option<usize> {
    // 0 = unvisited, 1 = on the current walk, 2 = known to reach a root
    let mut state = vec![0u8; parent.len()];
    let mut walk = Vec::new();
    for start in 0..parent.len() {
        let mut node = Some(start);
        while let Some(n) = node {
            match state[n] {
                2 => break,
                1 => return Some(n),
                _ => {
                    state[n] = 1;
                    walk.push(n);
                    node = parent[n];
                }
            }
        }
        for n in walk.drain(..) {
            state[n] = 2;
        }
    }
    None
}

fn parse_line(line: &str, lineno: usize) -> Result<Lexeme> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 5 {
        return Err(Error::parse(
            lineno,
            format!("expected 5 tab-separated columns, found {}", cols.len()),
        ));
    }
    let id = cols[0]
        .parse::<u64>()
        .map_err(|_| Error::parse(lineno, format!("invalid id {:?}", cols[0])))?;
    let pos = Pos::parse(cols[3])
        .ok_or_else(|| Error::parse(lineno, format!("invalid POS tag {:?}", cols[3])))?;
    let parent_id = match cols[4] {
        "" => None,
        p => Some(
            p.parse::<u64>()
                .map_err(|_| Error::parse(lineno, format!("invalid parent id {p:?}")))?,
        ),
    };
    Ok(Lexeme {
        id,
        lemma: cols[1].to_owned(),
        techlemma: cols[2].to_owned(),
        pos,
        parent_id,
    })
}

/// Parses a network from a five-column TSV stream.
///
/// A trailing `\r` is tolerated; blank lines are skipped.
pub fn parse_network<R: BufRead>(reader: R) -> Result<DerivNetwork> {
    let mut lexemes = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        lexemes.push(parse_line(line, i + 1)?);
    }
    DerivNetwork::from_lexemes(lexemes)
}
