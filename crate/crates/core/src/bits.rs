//! Packed bit rows and square bit matrices.
//!
//! Rows are stored as contiguous runs of `u64` words. Bit `c` of row `r`
//! lives in word `c / 64` at position `c % 64`.

use std::fmt;

pub const WORD_BITS: usize = 64;

#[inline]
pub fn words_for(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

#[inline]
pub fn test_bit(row: &[u64], c: usize) -> bool {
    row[c / WORD_BITS] >> (c % WORD_BITS) & 1 == 1
}

#[inline]
pub fn set_bit(row: &mut [u64], c: usize) {
    row[c / WORD_BITS] |= 1 << (c % WORD_BITS);
}

#[inline]
pub fn clear_bit(row: &mut [u64], c: usize) {
    row[c / WORD_BITS] &= !(1 << (c % WORD_BITS));
}

#[inline]
pub fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

#[inline]
pub fn is_disjoint(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

#[inline]
pub fn is_empty(a: &[u64]) -> bool {
    a.iter().all(|&w| w == 0)
}

#[inline]
pub fn count(a: &[u64]) -> usize {
    a.iter().map(|w| w.count_ones() as usize).sum()
}

/// Iterator over the set bit positions of a row, ascending.
#[derive(Clone)]
pub struct Ones<'a> {
    words: &'a [u64],
    index: usize,
    current: u64,
}

impl<'a> Ones<'a> {
    pub fn new(words: &'a [u64]) -> Self {
        Ones {
            words,
            index: 0,
            current: words.first().copied().unwrap_or(0),
        }
    }
}

impl Iterator for Ones<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.index * WORD_BITS + bit);
            }
            self.index += 1;
            if self.index >= self.words.len() {
                return None;
            }
            self.current = self.words[self.index];
        }
    }
}

/// A set of poset elements backed by packed bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ElementSet {
    words: Vec<u64>,
}

impl ElementSet {
    pub fn empty(n: usize) -> Self {
        ElementSet {
            words: vec![0; words_for(n)],
        }
    }

    pub fn from_words(words: Vec<u64>) -> Self {
        ElementSet { words }
    }

    pub fn insert(&mut self, x: usize) {
        set_bit(&mut self.words, x);
    }

    pub fn contains(&self, x: usize) -> bool {
        x / WORD_BITS < self.words.len() && test_bit(&self.words, x)
    }

    pub fn len(&self) -> usize {
        count(&self.words)
    }

    pub fn is_empty(&self) -> bool {
        is_empty(&self.words)
    }

    pub fn iter(&self) -> Ones<'_> {
        Ones::new(&self.words)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for ElementSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Square boolean matrix with packed rows; `get(r, c)` is bit `c` of row `r`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words = words_for(n);
        BitMatrix {
            n,
            words,
            data: vec![0; n * words],
        }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut m = BitMatrix::new(n);
        for &(r, c) in pairs {
            m.set(r, c, true);
        }
        m
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn words_per_row(&self) -> usize {
        self.words
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        test_bit(self.row(r), c)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        let row = self.row_mut(r);
        if value {
            set_bit(row, c)
        } else {
            clear_bit(row, c)
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words..(r + 1) * self.words]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.words..(r + 1) * self.words]
    }

    pub fn ones_in_row(&self, r: usize) -> Ones<'_> {
        Ones::new(self.row(r))
    }

    pub fn count_ones(&self) -> usize {
        count(&self.data)
    }

    /// All set entries as `(row, column)` pairs in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|r| self.ones_in_row(r).map(move |c| (r, c)))
            .collect()
    }

    /// The transpose, so that row `c` of the result lists the rows of
    /// `self` with bit `c` set.
    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::new(self.n);
        for r in 0..self.n {
            for c in self.ones_in_row(r) {
                t.set(c, r, true);
            }
        }
        t
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMatrix({}) ", self.n)?;
        f.debug_list().entries(self.pairs()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_crosses_word_boundaries() {
        let mut row = vec![0u64; 3];
        for c in [0, 63, 64, 100, 191] {
            set_bit(&mut row, c);
        }
        assert_eq!(Ones::new(&row).collect::<Vec<_>>(), vec![0, 63, 64, 100, 191]);
        clear_bit(&mut row, 64);
        assert!(!test_bit(&row, 64));
        assert_eq!(count(&row), 4);
    }

    #[test]
    fn transpose_swaps_coordinates() {
        let m = BitMatrix::from_pairs(70, &[(0, 69), (3, 65), (64, 66)]);
        let t = m.transpose();
        assert_eq!(t.pairs(), vec![(65, 3), (66, 64), (69, 0)]);
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn subset_and_disjoint() {
        assert!(is_subset(&[0b0101], &[0b1101]));
        assert!(!is_subset(&[0b0111], &[0b1101]));
        assert!(is_disjoint(&[0b0101], &[0b1010]));
        assert!(!is_disjoint(&[0b0101], &[0b0100]));
    }
}
