use itertools::Itertools;

use super::VertexSet;

/// Every `k`-subset of `[n]`, once each, in lexicographic order.
pub fn enumerate_k_subsets(n: usize, k: usize) -> impl Iterator<Item = VertexSet> {
    (0..n).combinations(k).map(VertexSet::from_indices)
}

/// Every subset of `set` with exactly `size` members, lexicographic.
pub fn subsets_of_size(set: &VertexSet, size: usize) -> impl Iterator<Item = VertexSet> {
    set.to_vec().into_iter().combinations(size).map(VertexSet::from_indices)
}

/// Subsets of `set` with sizes `1..=d` (or `0..=d` with `include_empty`),
/// ordered by size and then lexicographically.
pub fn enumerate_small_subsets(set: &VertexSet, d: usize, include_empty: bool) -> impl Iterator<Item = VertexSet> {
    let members = set.to_vec();
    let lo = usize::from(!include_empty);
    let hi = d.min(members.len());
    (lo..=hi).flat_map(move |s| members.clone().into_iter().combinations(s).map(VertexSet::from_indices))
}

/// All `2^|set|` subsets of `set`.
pub fn power_set(set: &VertexSet) -> impl Iterator<Item = VertexSet> {
    let members = set.to_vec();
    assert!(members.len() < 64, "power set of a {}-element set", members.len());
    (0u64..(1u64 << members.len())).map(move |mask| {
        VertexSet::from_indices(members.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn keys<I: Iterator<Item = VertexSet>>(it: I) -> Vec<String> {
        it.map(|s| s.key()).collect()
    }

    #[test]
    fn k_subsets_small_cases() {
        assert_eq!(keys(enumerate_k_subsets(3, 2)), vec!["0,1", "0,2", "1,2"]);
        assert_eq!(keys(enumerate_k_subsets(4, 0)), vec![""]);
        let all: Vec<VertexSet> = enumerate_k_subsets(6, 3).collect();
        assert_eq!(all.len(), 20);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 20);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_subsets() {
        let s12 = VertexSet::from_indices([1, 2]);
        assert_eq!(keys(enumerate_small_subsets(&s12, 1, false)), vec!["1", "2"]);
        let s123 = VertexSet::from_indices([1, 2, 3]);
        assert_eq!(enumerate_small_subsets(&s123, 2, false).count(), 6);
        assert_eq!(enumerate_small_subsets(&s123, 3, true).count(), 8);
        // d larger than |S| is truncated.
        assert_eq!(enumerate_small_subsets(&s12, 5, false).count(), 3);
    }

    #[test]
    fn power_set_size() {
        let s = VertexSet::from_indices([0, 5, 9, 70]);
        let all: HashSet<VertexSet> = power_set(&s).collect();
        assert_eq!(all.len(), 16);
        assert!(all.iter().all(|a| a.is_subset(&s)));
    }
}
