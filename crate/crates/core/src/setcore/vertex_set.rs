use std::cmp::Ordering;
use std::fmt;

use serde::de::{SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A finite subset of the ground set `[0, n)`.
///
/// Stored as a bitmask of 64-bit words, inline for `n <= 128`. Trailing zero
/// words are always trimmed, so derived equality and hashing are canonical.
/// Ordering is lexicographic on the increasing member sequence.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct VertexSet {
    words: SmallVec<[u64; 2]>,
}

impl VertexSet {
    pub fn new() -> Self {
        VertexSet::default()
    }

    pub fn singleton(v: usize) -> Self {
        let mut s = VertexSet::new();
        s.insert(v);
        s
    }

    /// `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        let mut words: SmallVec<[u64; 2]> = SmallVec::new();
        let whole = n / 64;
        words.resize(whole, u64::MAX);
        if !n.is_multiple_of(64) {
            words.push((1u64 << (n % 64)) - 1);
        }
        VertexSet { words }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = VertexSet::new();
        for v in iter {
            s.insert(v);
        }
        s
    }

    /// Builds a set from indices, rejecting duplicates and indices `>= n`.
    pub fn try_from_indices(indices: &[usize], n: usize) -> Result<Self> {
        let mut s = VertexSet::new();
        for &v in indices {
            if v >= n {
                return Err(Error::Parameter(format!("vertex {v} outside ground set of size {n}")));
            }
            if !s.insert(v) {
                return Err(Error::Parameter(format!("duplicate vertex {v}")));
            }
        }
        Ok(s)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.words.get(v / 64).is_some_and(|w| w >> (v % 64) & 1 == 1)
    }

    /// Returns `true` if `v` was not already present.
    pub fn insert(&mut self, v: usize) -> bool {
        let (w, b) = (v / 64, v % 64);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] >> b & 1 == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, v: usize) -> bool {
        let (w, b) = (v / 64, v % 64);
        if w >= self.words.len() || self.words[w] >> b & 1 == 0 {
            return false;
        }
        self.words[w] &= !(1 << b);
        self.trim();
        true
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn iter(&self) -> Members<'_> {
        Members { words: &self.words, index: 0, current: self.words.first().copied().unwrap_or(0) }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn max_element(&self) -> Option<usize> {
        let last = *self.words.last()?;
        Some((self.words.len() - 1) * 64 + 63 - last.leading_zeros() as usize)
    }

    pub fn min_element(&self) -> Option<usize> {
        self.iter().next()
    }

    /// True when every member is `< n`.
    pub fn fits(&self, n: usize) -> bool {
        self.max_element().is_none_or(|m| m < n)
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        if self.words.len() > other.words.len() {
            return false;
        }
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_superset(&self, other: &VertexSet) -> bool {
        other.is_subset(self)
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let (long, short) = if self.words.len() >= other.words.len() { (self, other) } else { (other, self) };
        let mut words = long.words.clone();
        for (w, s) in words.iter_mut().zip(&short.words) {
            *w |= s;
        }
        VertexSet { words }
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        let mut s = VertexSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect() };
        s.trim();
        s
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        let mut words = self.words.clone();
        for (w, o) in words.iter_mut().zip(&other.words) {
            *w &= !o;
        }
        let mut s = VertexSet { words };
        s.trim();
        s
    }

    pub fn intersection_len(&self, other: &VertexSet) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    /// `[0, n) \ self`.
    pub fn complement(&self, n: usize) -> VertexSet {
        VertexSet::full(n).difference(self)
    }

    /// Number of members strictly below `v`, i.e. the position `v` would take in the member sequence.
    pub fn rank_of(&self, v: usize) -> usize {
        let (w, b) = (v / 64, v % 64);
        let mut r: usize = self.words.iter().take(w).map(|x| x.count_ones() as usize).sum();
        if let Some(x) = self.words.get(w) {
            r += (x & ((1u64 << b) - 1)).count_ones() as usize;
        }
        r
    }

    /// Comma-joined sorted indices, `""` for the empty set.
    pub fn key(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let key = key.trim();
        if key.is_empty() {
            return Ok(VertexSet::new());
        }
        let mut s = VertexSet::new();
        let mut prev: Option<usize> = None;
        for part in key.split(',') {
            let v: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad set key {key:?}")))?;
            if prev.is_some_and(|p| p >= v) {
                return Err(Error::Parameter(format!("set key {key:?} is not strictly increasing")));
            }
            prev = Some(v);
            s.insert(v);
        }
        Ok(s)
    }
}

impl Ord for VertexSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for VertexSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

impl FromIterator<usize> for VertexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        VertexSet::from_indices(iter)
    }
}

impl<'a> IntoIterator for &'a VertexSet {
    type Item = usize;
    type IntoIter = Members<'a>;
    fn into_iter(self) -> Members<'a> {
        self.iter()
    }
}

/// Increasing iterator over the members of a [`VertexSet`].
pub struct Members<'a> {
    words: &'a [u64],
    index: usize,
    current: u64,
}

impl Iterator for Members<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let b = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.index * 64 + b);
            }
            self.index += 1;
            if self.index >= self.words.len() {
                return None;
            }
            self.current = self.words[self.index];
        }
    }
}

impl Serialize for VertexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for VertexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct SetVisitor;
        impl<'de> Visitor<'de> for SetVisitor {
            type Value = VertexSet;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of distinct vertex indices")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<VertexSet, A::Error> {
                let mut s = VertexSet::new();
                while let Some(v) = seq.next_element::<usize>()? {
                    if !s.insert(v) {
                        return Err(serde::de::Error::custom(format!("duplicate vertex {v}")));
                    }
                }
                Ok(s)
            }
        }
        deserializer.deserialize_seq(SetVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_ops() {
        let a = VertexSet::from_indices([1, 2, 3]);
        let b = VertexSet::from_indices([2, 4]);
        assert_eq!(a.intersection(&b).to_vec(), vec![2]);
        assert_eq!(a.union(&b).to_vec(), vec![1, 2, 3, 4]);
        assert_eq!(a.difference(&b).to_vec(), vec![1, 3]);
        assert!(VertexSet::from_indices([2]).is_subset(&a));
        assert!(!b.is_subset(&a));
        assert_eq!(a.rank_of(3), 2);
        assert_eq!(a.key(), "1,2,3");
        assert_eq!(VertexSet::parse_key("1,2,3").unwrap(), a);
        assert!(VertexSet::parse_key("3,1").is_err());
    }

    #[test]
    fn equality_is_canonical_across_word_boundaries() {
        let mut a = VertexSet::from_indices([3, 130]);
        a.remove(130);
        assert_eq!(a, VertexSet::singleton(3));
        assert_eq!(a.words().len(), 1);
        let big = VertexSet::from_indices([200, 5]);
        assert_eq!(big.to_vec(), vec![5, 200]);
        assert_eq!(big.max_element(), Some(200));
        assert!(VertexSet::singleton(5).difference(&big).is_empty());
    }

    #[test]
    fn full_and_complement() {
        assert_eq!(VertexSet::full(0), VertexSet::new());
        assert_eq!(VertexSet::full(64).len(), 64);
        assert_eq!(VertexSet::full(130).len(), 130);
        let c = VertexSet::from_indices([0, 2]).complement(4);
        assert_eq!(c.to_vec(), vec![1, 3]);
    }

    #[test]
    fn ordering_is_lexicographic_on_members() {
        let mut v = [
            VertexSet::from_indices([0, 2]),
            VertexSet::from_indices([0, 1, 2]),
            VertexSet::from_indices([0, 1]),
            VertexSet::new(),
        ];
        v.sort();
        let keys: Vec<String> = v.iter().map(|s| s.key()).collect();
        assert_eq!(keys, vec!["", "0,1", "0,1,2", "0,2"]);
    }

    #[test]
    fn try_from_indices_rejects_bad_input() {
        assert!(VertexSet::try_from_indices(&[1, 1], 5).is_err());
        assert!(VertexSet::try_from_indices(&[5], 5).is_err());
        assert!(VertexSet::try_from_indices(&[4, 0], 5).is_ok());
    }

    proptest! {
        #[test]
        fn set_algebra_matches_btreeset(
            a in proptest::collection::btree_set(0usize..300, 0..40),
            b in proptest::collection::btree_set(0usize..300, 0..40),
        ) {
            let sa = VertexSet::from_indices(a.iter().copied());
            let sb = VertexSet::from_indices(b.iter().copied());
            prop_assert_eq!(sa.to_vec(), a.iter().copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.intersection(&sb).to_vec(), a.intersection(&b).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.union(&sb).to_vec(), a.union(&b).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.difference(&sb).to_vec(), a.difference(&b).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.is_subset(&sb), a.is_subset(&b));
            prop_assert_eq!(sa.is_disjoint(&sb), a.is_disjoint(&b));
            prop_assert_eq!(sa.cmp(&sb), a.iter().cmp(b.iter()));
            let json = serde_json::to_string(&sa).unwrap();
            prop_assert_eq!(serde_json::from_str::<VertexSet>(&json).unwrap(), sa);
        }
    }
}
