//! Multi-indices, the two index-set families, and combination coefficients.

use std::collections::BTreeMap;
use std::fmt;

/// Spatial refinement levels `(l1, l2)`: `h_x = h0 2^-l1`, `h_y = h0 2^-l2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LevelIndex {
    pub l1: u32,
    pub l2: u32,
}

impl LevelIndex {
    pub const fn new(l1: u32, l2: u32) -> Self {
        LevelIndex { l1, l2 }
    }

    pub fn sum(self) -> u32 {
        self.l1 + self.l2
    }

    pub fn is_interior(self) -> bool {
        self.l1 > 0 && self.l2 > 0
    }

    /// The up-to-four signed neighbours entering the mixed difference.
    pub fn mixed_terms(self) -> Vec<(LevelIndex, i64)> {
        let mut out = vec![(self, 1)];
        if self.l1 > 0 {
            out.push((LevelIndex::new(self.l1 - 1, self.l2), -1));
        }
        if self.l2 > 0 {
            out.push((LevelIndex::new(self.l1, self.l2 - 1), -1));
        }
        if self.l1 > 0 && self.l2 > 0 {
            out.push((LevelIndex::new(self.l1 - 1, self.l2 - 1), 1));
        }
        out
    }
}

impl fmt::Display for LevelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.l1, self.l2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexKind {
    /// `{l1 + l2 <= l + 1}`.
    Standard,
    /// Axes up to `l`, plus interior indices with `l1 + l2 <= l - l_star`.
    Balanced { l_star: u32 },
}

impl IndexKind {
    pub fn set(self, level: u32) -> IndexSet {
        match self {
            IndexKind::Standard => standard_index_set(level),
            IndexKind::Balanced { l_star } => balanced_index_set(level, l_star),
        }
    }
}

/// Sorted, duplicate-free set of multi-indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    pub level: u32,
    pub kind: IndexKind,
    indices: Vec<LevelIndex>,
}

impl IndexSet {
    fn build(level: u32, kind: IndexKind, mut indices: Vec<LevelIndex>) -> Self {
        indices.sort();
        indices.dedup();
        IndexSet {
            level,
            kind,
            indices,
        }
    }

    pub fn indices(&self) -> &[LevelIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: LevelIndex) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }

    /// Coefficients `c(l)` with `sum_{l in I} dP_l = sum_l c(l) P_l`; only
    /// non-zero entries are returned, in index order.
    pub fn combination(&self) -> Vec<(LevelIndex, i64)> {
        let mut coeff: BTreeMap<LevelIndex, i64> = BTreeMap::new();
        for idx in &self.indices {
            for (m, s) in idx.mixed_terms() {
                *coeff.entry(m).or_insert(0) += s;
            }
        }
        coeff.into_iter().filter(|(_, c)| *c != 0).collect()
    }
}

pub fn standard_index_set(level: u32) -> IndexSet {
    let mut v = Vec::new();
    for l1 in 0..=level + 1 {
        for l2 in 0..=level + 1 - l1 {
            v.push(LevelIndex::new(l1, l2));
        }
    }
    IndexSet::build(level, IndexKind::Standard, v)
}

pub fn balanced_index_set(level: u32, l_star: u32) -> IndexSet {
    let mut v = Vec::new();
    for l in 0..=level {
        v.push(LevelIndex::new(l, 0));
        v.push(LevelIndex::new(0, l));
    }
    if level >= 2 + l_star {
        let m = level - l_star;
        for l1 in 1..m {
            for l2 in 1..=m - l1 {
                v.push(LevelIndex::new(l1, l2));
            }
        }
    }
    IndexSet::build(level, IndexKind::Balanced { l_star }, v)
}
