//! Derivational relations in embedding space.
//!
//! The pipeline runs from a derivational network file to clustering scores:
//!
//! 1. [`lexnet`] parses the network and extracts parent → child pairs.
//! 2. [`signature`] aligns each pair on its longest common substring, renders
//!    the affix change (`-at +nout`) and maps frequent types to classes.
//! 3. [`embeddings`] loads vectors and builds difference vectors
//!    `v(child) − v(parent)` for the labelled pairs.
//! 4. [`cluster`] runs k-means or agglomerative clustering on them.
//! 5. [`metrics`] scores clusters against the classes; [`baselines`] and
//!    [`experiment`] provide reference clusterings and multi-run averaging.
//!
//! [`pipeline`] holds the versioned TSV/JSON interchange formats used by the
//! command-line tool.
//!
//! The `parallel` feature (on by default) runs inner loops on rayon. Results
//! are bitwise identical with or without it.

pub mod baselines;
pub mod cluster;
pub mod embeddings;
mod error;
pub mod experiment;
pub mod lexnet;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod signature;

pub use error::{Error, Result};
pub use par::Execution;
