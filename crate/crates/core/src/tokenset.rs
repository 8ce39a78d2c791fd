use fixedbitset::FixedBitSet;

/// A set of token indices drawn from `0..universe`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TokenSet {
    bits: FixedBitSet,
}

impl TokenSet {
    pub fn empty(universe: usize) -> Self {
        TokenSet {
            bits: FixedBitSet::with_capacity(universe),
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        TokenSet { bits }
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(universe);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.bits.contains(index)
    }

    pub fn insert(&mut self, index: usize) {
        self.bits.insert(index);
    }

    pub fn remove(&mut self, index: usize) {
        self.bits.set(index, false);
    }

    /// Ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn union(&self, other: &TokenSet) -> TokenSet {
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        TokenSet { bits }
    }

    pub fn intersection(&self, other: &TokenSet) -> TokenSet {
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        TokenSet { bits }
    }

    pub fn difference(&self, other: &TokenSet) -> TokenSet {
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        TokenSet { bits }
    }

    pub fn complement(&self) -> TokenSet {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        TokenSet { bits }
    }

    pub fn intersection_len(&self, other: &TokenSet) -> usize {
        self.bits.intersection_count(&other.bits)
    }

    pub fn union_with(&mut self, other: &TokenSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &TokenSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn is_subset(&self, other: &TokenSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &TokenSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }
}

impl std::fmt::Debug for TokenSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
