//! Semantic IDs coordinated with hashed item IDs inside an ID-based ranking model.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! * [`quantizer`] fits residual k-means codebooks over item content embeddings and
//!   encodes every item into `L` base semantic IDs.
//! * [`sid`] composes adjacent base IDs into radix-`B` composite IDs, giving each item
//!   the five-member set `{s1, s2, s3, s12, s23}`.
//! * [`embedding`] owns the hashed-ID table, the semantic-ID vocabulary and the shared
//!   semantic-ID table.
//! * [`model`] is the ranking network: attention fusion over resolutions, the
//!   popularity-driven HID/SID gate, the user-item semantic alignment features and a
//!   small backbone, all with hand-written backpropagation.
//! * [`data`] generates synthetic catalogs and interaction logs with planted head/tail
//!   structure and reads/writes them as line-delimited JSON.
//! * [`eval`] computes AUC, UAUC, the long-tail slice and the gate-vs-popularity table.
//! * [`experiment`] wires the modules into the runs used by the CLI and the examples.
//! * [`cli`] implements the `sidcoord` command.

pub mod cli;
pub mod data;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod quantizer;
pub mod rng;
pub mod sid;

pub use error::{Error, Result};
