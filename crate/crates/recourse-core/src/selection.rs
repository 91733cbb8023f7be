//! Index-set selections shared by the DPP and quadratic selectors.

/// A subset of candidate indices, kept sorted ascending. Equivalent to a
/// binary indicator vector `z` with `z_i = 1` for the stored indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    indices: Vec<usize>,
}

impl Selection {
    /// Builds a selection from arbitrary indices; duplicates are dropped.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Selection { indices }
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

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Indicator vector of length `n`.
    pub fn to_indicator(&self, n: usize) -> Vec<f64> {
        let mut z = vec![0.0; n];
        for &i in &self.indices {
            z[i] = 1.0;
        }
        z
    }

    /// Union of supports, as used by screening.
    pub fn union(&self, other: &Selection) -> Selection {
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        Selection::new(indices)
    }
}

impl From<Vec<usize>> for Selection {
    fn from(indices: Vec<usize>) -> Self {
        Selection::new(indices)
    }
}
