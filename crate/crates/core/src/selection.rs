use serde::{Deserialize, Serialize};

/// A set of association indices, kept sorted and free of duplicates.
///
/// Interchangeable with a binary indicator vector over the `m` putative
/// associations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Selection {
    indices: Vec<usize>,
}

impl Selection {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a selection from arbitrary indices; sorts and removes duplicates.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    /// Selection of every index whose indicator entry is nonzero.
    pub fn from_indicator(u: &[bool]) -> Self {
        Self {
            indices: u
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect(),
        }
    }

    pub fn all(m: usize) -> Self {
        Self {
            indices: (0..m).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Largest index + 1, or 0 for the empty selection.
    pub fn bound(&self) -> usize {
        self.indices.last().map_or(0, |&i| i + 1)
    }

    pub fn to_indicator(&self, m: usize) -> Vec<bool> {
        let mut u = vec![false; m];
        for &i in &self.indices {
            u[i] = true;
        }
        u
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

impl FromIterator<usize> for Selection {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::from_indices(iter)
    }
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
