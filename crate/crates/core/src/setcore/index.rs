/// Exact binomial coefficient; saturates at `u128::MAX`.
pub fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn binom_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of subsets of an `m`-set with sizes `1..=d` (or `0..=d`).
pub fn small_domain_len(m: usize, d: usize, include_empty: bool) -> usize {
    (usize::from(!include_empty)..=d.min(m)).map(|s| binom(m, s) as usize).sum()
}

/// The rank [`SubsetIndexer::rank_positions`] would assign, computed without
/// a table. Positions must be strictly increasing and below `m`.
pub fn small_subset_rank(m: usize, include_empty: bool, positions: &[usize]) -> usize {
    let lo = usize::from(!include_empty);
    let offset: usize = (lo..positions.len()).map(|s| binom(m, s) as usize).sum();
    offset + positions.iter().enumerate().map(|(i, &p)| binom(p, i + 1) as usize).sum::<usize>()
}

/// Dense ranking of the subsets of `[0, m)` with sizes in `lo..=d`
/// (`lo` is 0 when the empty set is part of the domain, 1 otherwise).
///
/// Within a size class the rank is colexicographic:
/// `rank({p_0 < ... < p_{s-1}}) = offset[s] + sum_i C(p_i, i + 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetIndexer {
    m: usize,
    lo: usize,
    hi: usize,
    offsets: Vec<usize>,
    len: usize,
    // table[s][p] = C(p, s) for s in 1..=hi, p in 0..m
    table: Vec<Vec<usize>>,
}

impl SubsetIndexer {
    pub fn new(m: usize, d: usize, include_empty: bool) -> Self {
        let lo = usize::from(!include_empty);
        let hi = d.min(m);
        let mut offsets = vec![0; hi + 2];
        let mut len = 0usize;
        for s in lo..=hi {
            offsets[s] = len;
            len += binom(m, s) as usize;
        }
        let table = (0..=hi).map(|s| (0..m).map(|p| binom(p, s) as usize).collect()).collect();
        SubsetIndexer { m, lo, hi, offsets, len, table }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn universe(&self) -> usize {
        self.m
    }

    pub fn min_size(&self) -> usize {
        self.lo
    }

    pub fn max_size(&self) -> usize {
        self.hi
    }

    pub fn in_domain(&self, size: usize) -> bool {
        size >= self.lo && size <= self.hi
    }

    /// Rank of the subset given by strictly increasing positions in `[0, m)`.
    #[inline]
    pub fn rank_positions<I: IntoIterator<Item = usize>>(&self, positions: I) -> Option<usize> {
        let mut sum = 0usize;
        let mut s = 0usize;
        for p in positions {
            if p >= self.m || s + 1 > self.hi {
                return None;
            }
            sum += self.table[s + 1][p];
            s += 1;
        }
        if s < self.lo {
            return None;
        }
        Some(self.offsets[s] + sum)
    }
}
