//! Fixed-universe bitset over atom indices.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomSet {
    len: usize,
    words: Vec<u64>,
}

impl AtomSet {
    pub fn empty(len: usize) -> Self {
        AtomSet { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut s = Self::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn universe_len(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "atom {i} outside universe of {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn is_subset(&self, other: &AtomSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &AtomSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference(&self, other: &AtomSet) -> AtomSet {
        AtomSet { len: self.len, words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect() }
    }

    /// Number of members of `self` missing from `state`.
    pub fn count_missing(&self, state: &AtomSet) -> usize {
        self.words.iter().zip(&state.words).map(|(a, b)| (a & !b).count_ones() as usize).sum()
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}

impl fmt::Debug for AtomSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_operations() {
        let a = AtomSet::from_indices(130, [0, 64, 129]);
        let b = AtomSet::from_indices(130, [0, 1, 64, 129]);
        assert!(a.is_subset(&b));
        assert!(!b.is_subset(&a));
        assert_eq!(a.count_missing(&AtomSet::from_indices(130, [0])), 2);
        assert_eq!(b.difference(&a).iter().collect::<Vec<_>>(), vec![1]);
        let mut c = a.clone();
        c.union_with(&AtomSet::from_indices(130, [5]));
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![0, 5, 64, 129]);
        assert_eq!(c.count(), 4);
        assert!(AtomSet::empty(3).is_empty());
    }
}
