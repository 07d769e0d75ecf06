use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// A set of state indices, kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StateSet {
    members: Vec<usize>,
}

impl StateSet {
    /// Builds a set over `m` states. Duplicates collapse; out-of-range indices are rejected.
    pub fn new(members: impl IntoIterator<Item = usize>, m: usize) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        if let Some(&state) = members.iter().find(|&&s| s >= m) {
            return Err(Error::StateOutOfRange { state, m });
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self { members })
    }

    pub fn singleton(state: usize, m: usize) -> Result<Self> {
        Self::new([state], m)
    }

    pub fn full(m: usize) -> Self {
        Self { members: (0..m).collect() }
    }

    /// Bit `i` of `mask` selects state `i`. Requires `m <= 64`.
    pub fn from_mask(mask: u64, m: usize) -> Self {
        debug_assert!(m <= 64);
        Self {
            members: (0..m).filter(|&i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn to_mask(&self) -> u64 {
        self.members.iter().fold(0, |acc, &i| acc | 1 << i)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.members.binary_search(&state).is_ok()
    }

    pub fn complement(&self, m: usize) -> Self {
        Self {
            members: (0..m).filter(|&i| !self.contains(i)).collect(),
        }
    }

    pub fn is_disjoint(&self, other: &StateSet) -> bool {
        self.members.iter().all(|&i| !other.contains(i))
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    /// Membership indicator of length `m`.
    pub fn indicator(&self, m: usize) -> Vec<bool> {
        let mut v = alloc::vec![false; m];
        for &i in &self.members {
            v[i] = true;
        }
        v
    }

    pub(crate) fn non_empty(&self) -> Result<&Self> {
        if self.is_empty() {
            Err(Error::EmptySet)
        } else {
            Ok(self)
        }
    }
}

/// Formats as `|`-separated indices, e.g. `0|2|5`; the empty set prints as nothing.
impl fmt::Display for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.members.iter().enumerate() {
            if k > 0 {
                f.write_str("|")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}
