//! Hierarchical semantic ID sets.
//!
//! Adjacent base IDs are combined as `composite = base * parent + child`. With
//! `base` strictly larger than every base ID the map from ordered pair to composite is
//! injective, and `composite / base` recovers the coarse parent. Only adjacent pairs
//! (`s12`, `s23`) exist; there is deliberately no `s13` or `s123`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radix used for composite IDs unless configured otherwise.
pub const DEFAULT_BASE: u64 = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SidError {
    #[error("base {base} must exceed every base id, got id {id}")]
    IdNotBelowBase { id: u64, base: u64 },
    #[error("base {base} must be strictly greater than codebook size {codebook_size}")]
    BaseTooSmall { base: u64, codebook_size: u64 },
    #[error("base {base} is too large: base^2 - 1 does not fit in 64 bits")]
    BaseOverflow { base: u64 },
    #[error("composite ids inconsistent with base ids: {0}")]
    Inconsistent(String),
}

/// The five resolutions an item is described at, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    S1,
    S2,
    S3,
    S12,
    S23,
}

impl Resolution {
    pub const ALL: [Resolution; 5] = [Self::S1, Self::S2, Self::S3, Self::S12, Self::S23];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::S1 => "s1",
            Self::S2 => "s2",
            Self::S3 => "s3",
            Self::S12 => "s12",
            Self::S23 => "s23",
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `{s1, s2, s3, s12, s23}` for one item together with the radix that produced the
/// composites. Construct through [`compose`] or [`SidComposer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSidSet")]
pub struct SemanticIdSet {
    s1: u64,
    s2: u64,
    s3: u64,
    s12: u64,
    s23: u64,
    base: u64,
}

#[derive(Deserialize)]
struct RawSidSet {
    s1: u64,
    s2: u64,
    s3: u64,
    s12: u64,
    s23: u64,
    base: u64,
}

impl TryFrom<RawSidSet> for SemanticIdSet {
    type Error = SidError;

    fn try_from(raw: RawSidSet) -> Result<Self, SidError> {
        let set = compose([raw.s1, raw.s2, raw.s3], raw.base)?;
        if set.s12 != raw.s12 || set.s23 != raw.s23 {
            return Err(SidError::Inconsistent(format!(
                "s12={} s23={} but base ids give {} and {}",
                raw.s12, raw.s23, set.s12, set.s23
            )));
        }
        Ok(set)
    }
}

impl SemanticIdSet {
    pub fn s1(&self) -> u64 {
        self.s1
    }
    pub fn s2(&self) -> u64 {
        self.s2
    }
    pub fn s3(&self) -> u64 {
        self.s3
    }
    pub fn s12(&self) -> u64 {
        self.s12
    }
    pub fn s23(&self) -> u64 {
        self.s23
    }
    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn base_ids(&self) -> [u64; 3] {
        [self.s1, self.s2, self.s3]
    }

    pub fn get(&self, resolution: Resolution) -> u64 {
        match resolution {
            Resolution::S1 => self.s1,
            Resolution::S2 => self.s2,
            Resolution::S3 => self.s3,
            Resolution::S12 => self.s12,
            Resolution::S23 => self.s23,
        }
    }

    /// Values in [`Resolution::ALL`] order.
    pub fn values(&self) -> [u64; 5] {
        [self.s1, self.s2, self.s3, self.s12, self.s23]
    }
}

fn check_base(base: u64) -> Result<(), SidError> {
    // base * (base - 1) + (base - 1) = base^2 - 1 must fit.
    if base > 1 << 32 {
        return Err(SidError::BaseOverflow { base });
    }
    Ok(())
}

/// `base * parent + child`.
pub fn compose_pair(parent: u64, child: u64, base: u64) -> Result<u64, SidError> {
    check_base(base)?;
    for id in [parent, child] {
        if id >= base {
            return Err(SidError::IdNotBelowBase { id, base });
        }
    }
    Ok(base * parent + child)
}

/// Builds the five-member set from three base IDs.
pub fn compose(base_ids: [u64; 3], base: u64) -> Result<SemanticIdSet, SidError> {
    let [s1, s2, s3] = base_ids;
    Ok(SemanticIdSet {
        s1,
        s2,
        s3,
        s12: compose_pair(s1, s2, base)?,
        s23: compose_pair(s2, s3, base)?,
        base,
    })
}

/// `(composite / base, composite % base)`. Panics if `base == 0`.
pub fn decompose(composite: u64, base: u64) -> (u64, u64) {
    assert!(base > 0, "base must be positive");
    (composite / base, composite % base)
}

/// A radix validated once against the codebook size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SidComposer {
    base: u64,
    codebook_size: u64,
}

impl SidComposer {
    pub fn new(base: u64, codebook_size: u64) -> Result<Self, SidError> {
        check_base(base)?;
        if base <= codebook_size {
            return Err(SidError::BaseTooSmall { base, codebook_size });
        }
        Ok(Self { base, codebook_size })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn compose(&self, base_ids: [u64; 3]) -> Result<SemanticIdSet, SidError> {
        if let Some(&id) = base_ids.iter().find(|&&id| id >= self.codebook_size) {
            return Err(SidError::IdNotBelowBase { id, base: self.codebook_size });
        }
        compose(base_ids, self.base)
    }
}
