//! Associated endpoints and the largest gap of a finite space.
//!
//! A pair is associated when no chain of strictly shorter steps joins it, that
//! is when its distance equals the bottleneck (minimax) distance along the
//! minimum spanning tree. Every tree edge is associated, so the largest gap is
//! the heaviest tree edge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, Shape};
use crate::partition::minimum_spanning_tree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociatedPair {
    pub pair: (usize, usize),
    pub gap: f64,
    pub ln_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargestGap {
    /// 0 for a one-point set.
    pub gap: f64,
    pub ln_gap: f64,
    pub pair: Option<(usize, usize)>,
}

/// Bottleneck distances `u(i, j)` in log form, from the spanning tree.
pub(crate) fn bottleneck_matrix(space: &FiniteMetricSpace) -> Vec<f64> {
    let n = space.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (w, i, j) in minimum_spanning_tree(space) {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    let mut u = vec![f64::NEG_INFINITY; n * n];
    let mut stack = Vec::new();
    for root in 0..n {
        let row = &mut u[root * n..(root + 1) * n];
        let mut seen = vec![false; n];
        seen[root] = true;
        stack.push(root);
        while let Some(v) = stack.pop() {
            for &(w, weight) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    row[w] = row[v].max(weight);
                    stack.push(w);
                }
            }
        }
    }
    u
}

/// All associated pairs `(i, j)` with `i < j`, in lexicographic order.
pub fn associated_endpoints(space: &FiniteMetricSpace) -> Vec<AssociatedPair> {
    let n = space.len();
    let make = |i: usize, j: usize| AssociatedPair {
        pair: (i, j),
        gap: space.dist(i, j),
        ln_gap: space.ln_dist(i, j),
    };
    match space.shape() {
        Shape::Line(order) => {
            let mut pairs: Vec<_> = order
                .windows(2)
                .map(|w| make(w[0].min(w[1]), w[0].max(w[1])))
                .collect();
            pairs.sort_by_key(|p| p.pair);
            pairs
        }
        Shape::MaxUltra(_) | Shape::Ultrametric => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| make(i, j))
            .collect(),
        Shape::General => {
            let u = bottleneck_matrix(space);
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if u[i * n + j] >= space.ln_dist(i, j) {
                        out.push(make(i, j));
                    }
                }
            }
            out
        }
    }
}

/// The largest gap `Γ(A)` of the subset `A` (indices into `space`).
pub fn largest_gap(space: &FiniteMetricSpace, subset: &[usize]) -> Result<LargestGap> {
    if subset.is_empty() {
        return Err(Error::Empty);
    }
    if subset.len() == 1 {
        return Ok(LargestGap {
            gap: 0.0,
            ln_gap: f64::NEG_INFINITY,
            pair: None,
        });
    }
    let sub = space.subspace(subset)?;
    let (i, j) = match sub.shape() {
        // Every pair of an ultrametric is associated.
        Shape::MaxUltra(order) => (order[0], order[order.len() - 1]),
        _ => {
            let edges = minimum_spanning_tree(&sub);
            let &(_, i, j) = edges.last().expect("two points give one edge");
            (i, j)
        }
    };
    let (a, b) = (subset[i], subset[j]);
    Ok(LargestGap {
        gap: space.dist(a, b),
        ln_gap: space.ln_dist(a, b),
        pair: Some((a.min(b), a.max(b))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{default_labels, ValidateOptions};

    fn dense_line(x: &[f64]) -> FiniteMetricSpace {
        let m: Vec<Vec<f64>> = x
            .iter()
            .map(|a| x.iter().map(|b| (a - b).abs()).collect())
            .collect();
        FiniteMetricSpace::validate(&m, default_labels(x.len()), &ValidateOptions::default())
            .unwrap()
    }

    #[test]
    fn two_points() {
        let s = dense_line(&[0.0, 0.6]);
        let a = associated_endpoints(&s);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].gap, 0.6);
        assert_eq!(largest_gap(&s, &[0, 1]).unwrap().gap, 0.6);
    }

    #[test]
    fn harmonic_sequence_gap() {
        // X = {0} ∪ {1/n : n ≤ 6}; the largest gap is 1 - 1/2.
        let mut x: Vec<f64> = (1..=6).map(|n| 1.0 / n as f64).collect();
        x.push(0.0);
        let s = dense_line(&x);
        let all: Vec<usize> = (0..x.len()).collect();
        let g = largest_gap(&s, &all).unwrap();
        assert_eq!(g.gap, 0.5);
        assert_eq!(g.pair, Some((0, 1)));
        let pairs = associated_endpoints(&s);
        assert!(pairs.iter().any(|p| p.pair == (0, 1)));
        // Only neighbours on the line are associated.
        assert_eq!(pairs.len(), x.len() - 1);
        let fast = FiniteMetricSpace::from_line(default_labels(x.len()), x.clone()).unwrap();
        let fast_pairs: Vec<_> = associated_endpoints(&fast).iter().map(|p| p.pair).collect();
        let slow_pairs: Vec<_> = pairs.iter().map(|p| p.pair).collect();
        assert_eq!(fast_pairs, slow_pairs);
    }

    #[test]
    fn singleton_gap_is_zero() {
        let s = dense_line(&[0.0, 0.6]);
        assert_eq!(largest_gap(&s, &[1]).unwrap().gap, 0.0);
        assert!(largest_gap(&s, &[]).is_err());
    }
}
