//! Set partitions as restricted-growth strings, in lexicographic order.

use crate::partition::Partition;

/// Iterates over all partitions of `{0, .., n-1}`.
///
/// A restricted-growth string `a` has `a[0] = 0` and
/// `a[i] <= 1 + max(a[..i])`; each one is a block labelling.
#[derive(Debug, Clone)]
pub struct RestrictedGrowth {
    a: Vec<usize>,
    /// `m[i] = max(a[..=i])`
    m: Vec<usize>,
    done: bool,
}

impl RestrictedGrowth {
    pub fn new(n: usize) -> Self {
        Self {
            a: vec![0; n],
            m: vec![0; n],
            done: n == 0,
        }
    }

    fn advance(&mut self) {
        let n = self.a.len();
        let mut i = n;
        while i > 1 {
            i -= 1;
            if self.a[i] <= self.m[i - 1] {
                self.a[i] += 1;
                self.m[i] = self.m[i - 1].max(self.a[i]);
                for j in i + 1..n {
                    self.a[j] = 0;
                    self.m[j] = self.m[i];
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for RestrictedGrowth {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.a.clone();
        self.advance();
        Some(out)
    }
}

/// All partitions of `n` points.
pub fn all_partitions(n: usize) -> impl Iterator<Item = Partition> {
    RestrictedGrowth::new(n).map(|a| Partition::from_labels(&a))
}

/// Bell numbers `B_0..=B_n`.
pub fn bell_numbers(n: usize) -> Vec<u128> {
    let mut bell = vec![1u128];
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        bell.push(next[0]);
        row = next;
    }
    bell
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_bell_numbers() {
        let bell = bell_numbers(8);
        assert_eq!(&bell[..], &[1, 1, 2, 5, 15, 52, 203, 877, 4140]);
        for n in 1..=8 {
            assert_eq!(RestrictedGrowth::new(n).count() as u128, bell[n]);
        }
    }

    #[test]
    fn lexicographic_and_distinct() {
        let all: Vec<_> = RestrictedGrowth::new(5).collect();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let parts: std::collections::HashSet<_> = all_partitions(5).collect();
        assert_eq!(parts.len(), 52);
    }

    #[test]
    fn three_points() {
        let all: Vec<_> = RestrictedGrowth::new(3).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 0, 0],
                vec![0, 0, 1],
                vec![0, 1, 0],
                vec![0, 1, 1],
                vec![0, 1, 2]
            ]
        );
    }
}
