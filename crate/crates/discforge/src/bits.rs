//! Fixed-width bitsets backed by u64 words. Bits above `width` are kept zero
//! so equality, hashing and popcounts can work on whole words.

pub const WORD_BITS: usize = 64;

#[inline]
pub fn words_for(width: usize) -> usize {
    width.div_ceil(WORD_BITS)
}

#[inline]
fn div_rem(i: usize) -> (usize, usize) {
    (i / WORD_BITS, i % WORD_BITS)
}

/// Hamming distance between two equal-length word slices.
#[inline]
pub fn xor_count_words(a: &[u64], b: &[u64]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    let mut total = 0u32;
    for (x, y) in a.iter().zip(b) {
        total += (x ^ y).count_ones();
    }
    total as usize
}

#[inline]
pub fn count_words(a: &[u64]) -> usize {
    a.iter().map(|w| w.count_ones() as usize).sum()
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitSet {
    width: usize,
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(width: usize) -> Self {
        BitSet { width, words: vec![0; words_for(width)] }
    }

    pub fn from_indices(width: usize, indices: &[usize]) -> Self {
        let mut b = BitSet::new(width);
        for &i in indices {
            b.insert(i);
        }
        b
    }

    pub fn from_words(width: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), words_for(width));
        let b = BitSet { width, words };
        debug_assert!(b.tail_is_clean());
        b
    }

    /// Full ground set `0..width`.
    pub fn full(width: usize) -> Self {
        let mut b = BitSet::new(width);
        for w in &mut b.words {
            *w = u64::MAX;
        }
        b.clear_tail();
        b
    }

    fn tail_is_clean(&self) -> bool {
        let rem = self.width % WORD_BITS;
        rem == 0
            || self.words.is_empty()
            || self.words[self.words.len() - 1] & !((1u64 << rem) - 1) == 0
    }

    fn clear_tail(&mut self) {
        let rem = self.width % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.width);
        let (w, b) = div_rem(i);
        self.words[w] |= 1u64 << b;
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.width);
        let (w, b) = div_rem(i);
        self.words[w] &= !(1u64 << b);
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        let (w, b) = div_rem(i);
        self.words[w] >> b & 1 == 1
    }

    #[inline]
    pub fn count(&self) -> usize {
        count_words(&self.words)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn xor_count(&self, other: &BitSet) -> usize {
        debug_assert_eq!(self.width, other.width);
        xor_count_words(&self.words, &other.words)
    }

    #[inline]
    pub fn intersection_count(&self, other: &BitSet) -> usize {
        debug_assert_eq!(self.width, other.width);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn intersect(&self, other: &BitSet) -> BitSet {
        debug_assert_eq!(self.width, other.width);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        BitSet { width: self.width, words }
    }

    pub fn union(&self, other: &BitSet) -> BitSet {
        debug_assert_eq!(self.width, other.width);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        BitSet { width: self.width, words }
    }

    /// Elements of `self` not in `other`.
    pub fn minus(&self, other: &BitSet) -> BitSet {
        debug_assert_eq!(self.width, other.width);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect();
        BitSet { width: self.width, words }
    }

    pub fn is_subset_of(&self, other: &BitSet) -> bool {
        debug_assert_eq!(self.width, other.width);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> OnesIter<'_> {
        OnesIter { words: &self.words, word_idx: 0, current: self.words.first().copied().unwrap_or(0) }
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }
}

impl std::fmt::Debug for BitSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitSet(w={}, {:?})", self.width, self.to_indices())
    }
}

pub struct OnesIter<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for OnesIter<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        while self.current == 0 {
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
        let bit = self.current.trailing_zeros() as usize;
        self.current &= self.current - 1;
        Some(self.word_idx * WORD_BITS + bit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_contains_remove() {
        let mut b = BitSet::new(130);
        b.insert(0);
        b.insert(64);
        b.insert(129);
        assert!(b.contains(0) && b.contains(64) && b.contains(129));
        assert_eq!(b.count(), 3);
        b.remove(64);
        assert!(!b.contains(64));
        assert_eq!(b.to_indices(), vec![0, 129]);
    }

    #[test]
    fn full_respects_width() {
        let b = BitSet::full(70);
        assert_eq!(b.count(), 70);
        assert!(b.contains(69));
    }

    #[test]
    fn xor_count_is_symmetric_difference_size() {
        let a = BitSet::from_indices(100, &[1, 5, 70]);
        let b = BitSet::from_indices(100, &[5, 70, 99]);
        assert_eq!(a.xor_count(&b), 2);
        assert_eq!(b.xor_count(&a), 2);
        assert_eq!(a.xor_count(&a), 0);
    }

    #[test]
    fn set_algebra() {
        let a = BitSet::from_indices(10, &[1, 2, 3]);
        let b = BitSet::from_indices(10, &[3, 4]);
        assert_eq!(a.intersect(&b).to_indices(), vec![3]);
        assert_eq!(a.union(&b).to_indices(), vec![1, 2, 3, 4]);
        assert_eq!(a.minus(&b).to_indices(), vec![1, 2]);
        assert!(BitSet::from_indices(10, &[2]).is_subset_of(&a));
        assert!(!b.is_subset_of(&a));
    }

    #[test]
    fn iter_ones_crosses_word_boundaries() {
        let idx = [0usize, 63, 64, 127, 128, 191];
        let b = BitSet::from_indices(192, &idx);
        assert_eq!(b.to_indices(), idx.to_vec());
    }
}
